#include "vbs/types.hpp"

#include <cmath>
#include <string>

namespace vbs {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidLogits: return "InvalidLogits";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::KernelTooLarge: return "KernelTooLarge";
    case ErrorCode::InsufficientRows: return "InsufficientRows";
    case ErrorCode::InvalidTemperature: return "InvalidTemperature";
    case ErrorCode::EmptyValidationSet: return "EmptyValidationSet";
    case ErrorCode::InsufficientMembers: return "InsufficientMembers";
    case ErrorCode::InvalidLabel: return "InvalidLabel";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyEvaluationSet: return "EmptyEvaluationSet";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::ShapeError: return "ShapeError";
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::RowCountMismatch: return "RowCountMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "UnknownError";
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return Matrix{};
  Matrix out(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(rows[r].size() == out.cols(), ErrorCode::ShapeError,
            "row " + std::to_string(r) + " has " + std::to_string(rows[r].size()) +
                " columns, expected " + std::to_string(out.cols()));
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = rows[r][c];
  }
  return out;
}

bool Matrix::all_finite() const noexcept {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

namespace {

void check_logit_shape(const Matrix& values, std::size_t min_rows,
                       const char* row_name) {
  require(values.rows() >= min_rows, ErrorCode::InvalidLogits,
          std::string(row_name) + " count must be >= " + std::to_string(min_rows) +
              ", got " + std::to_string(values.rows()));
  require(values.cols() >= 2, ErrorCode::InvalidLogits,
          "class count must be >= 2, got " + std::to_string(values.cols()));
  require(values.all_finite(), ErrorCode::InvalidLogits,
          "logit matrix contains non-finite entries");
}

}  // namespace

LogitMatrix::LogitMatrix(Matrix values) : values_(std::move(values)) {
  check_logit_shape(values_, 1, "sub-patch");
}

PooledLogits::PooledLogits(Matrix values) : values_(std::move(values)) {
  check_logit_shape(values_, 1, "window");
}

EnsembleLogits::EnsembleLogits(Matrix values) : values_(std::move(values)) {
  require(values_.rows() >= 2, ErrorCode::InsufficientMembers,
          "ensemble needs at least 2 members, got " +
              std::to_string(values_.rows()));
  check_logit_shape(values_, 2, "member");
}

ProbVector::ProbVector(std::vector<double> probs) : probs_(std::move(probs)) {
  require(probs_.size() >= 2, ErrorCode::InvalidInput,
          "probability vector needs at least 2 classes");
  double sum = 0.0;
  for (double p : probs_) {
    require(std::isfinite(p) && p >= 0.0 && p <= 1.0, ErrorCode::InvalidInput,
            "probability entry outside [0, 1]");
    sum += p;
  }
  require(std::abs(sum - 1.0) <= kSumTolerance, ErrorCode::InvalidInput,
          "probabilities sum to " + std::to_string(sum) + ", not 1");
}

SigmaStats::SigmaStats(std::vector<double> per_class, double sigma_bar,
                       double sigma_tilde)
    : per_class_(std::move(per_class)),
      sigma_bar_(sigma_bar),
      sigma_tilde_(sigma_tilde) {
  require(!per_class_.empty(), ErrorCode::InvalidInput, "per-class sigmas empty");
  double sum = 0.0;
  for (double s : per_class_) {
    require(std::isfinite(s) && s >= 0.0, ErrorCode::InvalidInput,
            "per-class sigma must be finite and >= 0");
    sum += s;
  }
  const double mean = sum / static_cast<double>(per_class_.size());
  require(std::abs(mean - sigma_bar_) <= 1e-12 * std::max(1.0, std::abs(mean)),
          ErrorCode::InvalidInput, "sigma_bar is not the mean of per-class sigmas");
  require(sigma_tilde_ >= 1.0, ErrorCode::InvalidInput,
          "sigma_tilde must be >= 1");
}

BetaPolicy BetaPolicy::neg_percentile(double q) {
  BetaPolicy policy{Kind::NegPercentile, q};
  policy.validate();
  return policy;
}

void BetaPolicy::validate() const {
  if (kind == Kind::NegPercentile) {
    require(param > 0.0 && param < 100.0, ErrorCode::InvalidInput,
            "percentile q must lie in (0, 100)");
  } else {
    require(std::isfinite(param), ErrorCode::InvalidInput,
            "beta policy parameter must be finite");
  }
}

void SmoothingConfig::validate() const {
  require(std::isfinite(alpha) && alpha > 0.0, ErrorCode::InvalidInput,
          "alpha must be > 0");
  beta_policy.validate();
  require(pool_kernel >= 1, ErrorCode::InvalidInput, "pool kernel must be >= 1");
  require(pool_stride >= 1, ErrorCode::InvalidInput, "pool stride must be >= 1");
}

std::size_t argmax(std::span<const double> values) {
  require(!values.empty(), ErrorCode::EmptyInput, "argmax of empty range");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

ProbVector softmax(std::span<const double> logits) {
  require(logits.size() >= 2, ErrorCode::InvalidLogits,
          "softmax needs at least 2 classes");
  double max_logit = logits[0];
  for (double z : logits) {
    require(std::isfinite(z), ErrorCode::InvalidLogits,
            "softmax input contains a non-finite entry");
    max_logit = std::max(max_logit, z);
  }
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out[k] = std::exp(logits[k] - max_logit);
    sum += out[k];
  }
  for (double& p : out) p /= sum;
  return ProbVector(std::move(out));
}

std::vector<double> column_mean_range(const Matrix& matrix, std::size_t row_begin,
                                      std::size_t row_end) {
  require(row_begin < row_end && row_end <= matrix.rows(), ErrorCode::EmptyInput,
          "empty or out-of-range row window");
  const std::span<const double> pivot = matrix.row(row_begin);
  std::vector<double> mean(matrix.cols(), 0.0);
  for (std::size_t r = row_begin + 1; r < row_end; ++r) {
    for (std::size_t c = 0; c < matrix.cols(); ++c) {
      mean[c] += matrix(r, c) - pivot[c];
    }
  }
  const double inv = 1.0 / static_cast<double>(row_end - row_begin);
  for (std::size_t c = 0; c < matrix.cols(); ++c) {
    mean[c] = pivot[c] + mean[c] * inv;
  }
  return mean;
}

std::vector<double> mean_over_rows(const Matrix& matrix) {
  require(matrix.rows() >= 1, ErrorCode::EmptyInput,
          "mean over rows of an empty matrix");
  return column_mean_range(matrix, 0, matrix.rows());
}

}  // namespace vbs
