#ifndef VBS_IO_HPP
#define VBS_IO_HPP

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "vbs/baselines.hpp"
#include "vbs/metrics.hpp"
#include "vbs/smoothing.hpp"
#include "vbs/synth.hpp"
#include "vbs/types.hpp"

namespace vbs::io {

// Text formats, all with explicit version tags and space-separated decimals
// written at 17 significant digits so doubles survive a round trip exactly:
//   VSL 1 <T> <K>        sub-patch logits, T rows of K values
//   VSE 1 <M> <K>        ensemble logits, M rows of K values
//   VSD 1 <N> <T> <d> <K> dataset; per sample a label line then T patch rows
//   VSM 1 <K> <d>        model; K weight rows of d values, then one bias row
//                        of K values

std::string format_logits(const LogitMatrix& logits);
std::string format_logits(const EnsembleLogits& logits);
std::variant<LogitMatrix, EnsembleLogits> parse_logits(const std::string& text,
                                                       const std::string& origin);

void write_logits(const LogitMatrix& logits, const std::filesystem::path& path);
void write_logits(const EnsembleLogits& logits, const std::filesystem::path& path);
std::variant<LogitMatrix, EnsembleLogits> read_logits(const std::filesystem::path& path);

std::string format_dataset(const std::vector<SynthSample>& samples, int classes);
std::vector<SynthSample> parse_dataset(const std::string& text,
                                       const std::string& origin, int* classes_out = nullptr);
void write_dataset(const std::vector<SynthSample>& samples, int classes,
                   const std::filesystem::path& path);
std::vector<SynthSample> read_dataset(const std::filesystem::path& path,
                                      int* classes_out = nullptr);

std::string format_model(const PatchClassifier& model);
PatchClassifier parse_model(const std::string& text, const std::string& origin);
void write_model(const PatchClassifier& model, const std::filesystem::path& path);
PatchClassifier read_model(const std::filesystem::path& path);

/// One label per line.
std::vector<int> read_labels(const std::filesystem::path& path);

/// Calibration record persisted by `calibrate` and consumed by `evaluate`
/// and `sweep`. Which fields are meaningful depends on the method.
struct CalibrationRecord {
  std::string method;
  SmoothingConfig config;       // variance_smoothing / ensemble_smoothing
  BetaCalibration beta;         // variance_smoothing / ensemble_smoothing
  FittedTemperature temperature;  // temp_scaling
};

std::string calibration_to_json(const CalibrationRecord& record);
CalibrationRecord calibration_from_json(const std::string& text,
                                        const std::string& origin);

/// Report JSON with frozen snake_case field names; NaN markers of empty bins
/// serialize as null.
std::string report_to_json(const CalibrationReport& report);

/// CSV `bin_lo,bin_hi,count,mean_conf,accuracy`; empty bins print nan.
std::string bins_to_csv(const std::vector<ReliabilityBin>& bins);

std::string read_text(const std::filesystem::path& path);

/// Write-temp-then-rename, so readers never observe a partial file.
void write_text_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace vbs::io

#endif  // VBS_IO_HPP
