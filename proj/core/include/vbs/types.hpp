#ifndef VBS_TYPES_HPP
#define VBS_TYPES_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "vbs/error.hpp"

namespace vbs {

/// Dense row-major matrix of doubles. Dimensions are always carried
/// explicitly, never inferred from the payload.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }
  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }

  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<double> row(std::size_t r) {
    return {data_.data() + r * cols_, cols_};
  }

  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& data() noexcept { return data_; }

  bool all_finite() const noexcept;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// T sub-patch logit rows by K class columns, captured before any pooling.
/// Construction enforces T >= 1, K >= 2 and finite entries.
class LogitMatrix {
 public:
  explicit LogitMatrix(Matrix values);

  const Matrix& values() const noexcept { return values_; }
  std::size_t subpatches() const noexcept { return values_.rows(); }  // T
  std::size_t classes() const noexcept { return values_.cols(); }     // K

  friend bool operator==(const LogitMatrix&, const LogitMatrix&) = default;

 private:
  Matrix values_;
};

/// Output of average pooling over a LogitMatrix: T' window rows by K columns.
class PooledLogits {
 public:
  explicit PooledLogits(Matrix values);

  const Matrix& values() const noexcept { return values_; }
  std::size_t windows() const noexcept { return values_.rows(); }  // T'
  std::size_t classes() const noexcept { return values_.cols(); }

 private:
  Matrix values_;
};

/// M ensemble-member logit rows by K class columns. M >= 2 enforced.
class EnsembleLogits {
 public:
  explicit EnsembleLogits(Matrix values);

  const Matrix& values() const noexcept { return values_; }
  std::size_t members() const noexcept { return values_.rows(); }  // M
  std::size_t classes() const noexcept { return values_.cols(); }

  friend bool operator==(const EnsembleLogits&, const EnsembleLogits&) = default;

 private:
  Matrix values_;
};

/// Probability distribution over K >= 2 classes. Construction enforces
/// entries in [0, 1] and a total of 1 within 1e-9.
class ProbVector {
 public:
  static constexpr double kSumTolerance = 1e-9;

  explicit ProbVector(std::vector<double> probs);

  const std::vector<double>& probs() const noexcept { return probs_; }
  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t k) const { return probs_[k]; }

  std::span<const double> span() const noexcept {
    return {probs_.data(), probs_.size()};
  }

 private:
  std::vector<double> probs_;
};

/// Per-class standard deviations together with their aggregate and the
/// floored temperature derived from them. sigma_bar must equal the mean of
/// per_class within 1e-12 and sigma_tilde must be >= 1 exactly.
class SigmaStats {
 public:
  SigmaStats(std::vector<double> per_class, double sigma_bar, double sigma_tilde);

  const std::vector<double>& per_class() const noexcept { return per_class_; }
  double sigma_bar() const noexcept { return sigma_bar_; }
  double sigma_tilde() const noexcept { return sigma_tilde_; }

 private:
  std::vector<double> per_class_;
  double sigma_bar_;
  double sigma_tilde_;
};

/// How the beta offset of the temperature rule is chosen.
struct BetaPolicy {
  enum class Kind { Fixed, MeanOffset, NegPercentile };

  Kind kind = Kind::Fixed;
  double param = 0.0;  // fixed value, mean offset, or percentile q in (0, 100)

  static BetaPolicy fixed(double value) { return {Kind::Fixed, value}; }
  static BetaPolicy mean_offset(double offset) { return {Kind::MeanOffset, offset}; }
  static BetaPolicy neg_percentile(double q);

  void validate() const;

  friend bool operator==(const BetaPolicy&, const BetaPolicy&) = default;
};

/// Hyperparameters of the smoothing path: temperature sensitivity alpha,
/// the beta policy, and the average-pooling window geometry.
struct SmoothingConfig {
  double alpha = 1.0;
  BetaPolicy beta_policy = BetaPolicy::fixed(0.0);
  int pool_kernel = 1;
  int pool_stride = 1;

  void validate() const;
};

/// Index of the largest entry; ties resolve to the lowest index so that
/// argmax-preservation checks are exact.
std::size_t argmax(std::span<const double> values);

/// Numerically stable softmax: exp(z_k - max z) / sum_j exp(z_j - max z).
ProbVector softmax(std::span<const double> logits);

/// Column-wise arithmetic mean; the conventional pre-softmax output.
std::vector<double> mean_over_rows(const Matrix& matrix);

/// Column means of rows [row_begin, row_end), computed about the first row of
/// the range as pivot. A matrix of identical rows therefore averages to that
/// row bit-exactly. Shared by mean_over_rows and average pooling.
std::vector<double> column_mean_range(const Matrix& matrix, std::size_t row_begin,
                                      std::size_t row_end);

}  // namespace vbs

#endif  // VBS_TYPES_HPP
