#ifndef VBS_ERROR_HPP
#define VBS_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace vbs {

/// Machine-parsable failure categories. The CLI prints these verbatim as
/// `error: <code>: <detail>` on a single line.
enum class ErrorCode {
  InvalidLogits,
  EmptyInput,
  InvalidInput,
  KernelTooLarge,
  InsufficientRows,
  InvalidTemperature,
  EmptyValidationSet,
  InsufficientMembers,
  InvalidLabel,
  LengthMismatch,
  EmptyEvaluationSet,
  InvalidSpec,
  EmptyDataset,
  ShapeError,
  MalformedHeader,
  RowCountMismatch,
  NonFiniteValue,
  ConfigError,
  IoError,
};

std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + detail),
        code_(code),
        detail_(detail) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& detail) {
  throw Error(code, detail);
}

inline void require(bool condition, ErrorCode code, const std::string& detail) {
  if (!condition) raise(code, detail);
}

}  // namespace vbs

#endif  // VBS_ERROR_HPP
