#include "vbs/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace vbs {

PooledLogits pool_logits(const LogitMatrix& logits, int kernel, int stride) {
  const std::size_t t = logits.subpatches();
  require(kernel >= 1, ErrorCode::InvalidInput, "pool kernel must be >= 1");
  require(stride >= 1, ErrorCode::InvalidInput, "pool stride must be >= 1");
  require(static_cast<std::size_t>(kernel) <= t, ErrorCode::KernelTooLarge,
          "pool kernel " + std::to_string(kernel) + " exceeds row count " +
              std::to_string(t));

  const std::size_t windows =
      (t - static_cast<std::size_t>(kernel)) / static_cast<std::size_t>(stride) + 1;
  Matrix out(windows, logits.classes());
  for (std::size_t i = 0; i < windows; ++i) {
    const std::size_t begin = i * static_cast<std::size_t>(stride);
    const std::vector<double> mean = column_mean_range(
        logits.values(), begin, begin + static_cast<std::size_t>(kernel));
    for (std::size_t c = 0; c < out.cols(); ++c) out(i, c) = mean[c];
  }
  return PooledLogits(std::move(out));
}

namespace {

/// Welford's online update; a deliberately different route than the two-pass
/// definition the tests check against.
std::vector<double> column_sample_stddev(const Matrix& values, ErrorCode too_few,
                                         const char* row_name) {
  const std::size_t rows = values.rows();
  require(rows >= 2, too_few,
          "sample standard deviation needs at least 2 " + std::string(row_name) +
              ", got " + std::to_string(rows));
  std::vector<double> mean(values.cols(), 0.0);
  std::vector<double> m2(values.cols(), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double inv_n = 1.0 / static_cast<double>(r + 1);
    for (std::size_t c = 0; c < values.cols(); ++c) {
      const double delta = values(r, c) - mean[c];
      mean[c] += delta * inv_n;
      m2[c] += delta * (values(r, c) - mean[c]);
    }
  }
  std::vector<double> sigma(values.cols());
  const double inv_dof = 1.0 / static_cast<double>(rows - 1);
  for (std::size_t c = 0; c < values.cols(); ++c) {
    sigma[c] = std::sqrt(std::max(0.0, m2[c] * inv_dof));
  }
  return sigma;
}

}  // namespace

std::vector<double> class_sigma(const PooledLogits& pooled) {
  return column_sample_stddev(pooled.values(), ErrorCode::InsufficientRows,
                              "pooled rows");
}

std::vector<double> ensemble_sigma(const EnsembleLogits& ensemble) {
  return column_sample_stddev(ensemble.values(), ErrorCode::InsufficientMembers,
                              "members");
}

SigmaStats aggregate_sigma(std::span<const double> per_class, double alpha,
                           double beta) {
  require(!per_class.empty(), ErrorCode::InvalidInput, "per-class sigmas empty");
  require(std::isfinite(alpha) && alpha > 0.0, ErrorCode::InvalidInput,
          "alpha must be finite and > 0");
  require(std::isfinite(beta), ErrorCode::InvalidInput, "beta must be finite");
  double sum = 0.0;
  for (double s : per_class) {
    require(std::isfinite(s) && s >= 0.0, ErrorCode::InvalidInput,
            "per-class sigma must be finite and >= 0");
    sum += s;
  }
  const double sigma_bar = sum / static_cast<double>(per_class.size());
  const double scaled = alpha * (sigma_bar + beta);
  // max() written so that a -inf overflow still lands on the floor.
  const double sigma_tilde = scaled >= 1.0 ? scaled : 1.0;
  return SigmaStats(std::vector<double>(per_class.begin(), per_class.end()),
                    sigma_bar, sigma_tilde);
}

ProbVector smooth_predict(std::span<const double> mean_logits, double sigma_tilde) {
  require(sigma_tilde >= 1.0, ErrorCode::InvalidTemperature,
          "sigma_tilde must be >= 1, got " + std::to_string(sigma_tilde));
  std::vector<double> scaled(mean_logits.size());
  for (std::size_t k = 0; k < mean_logits.size(); ++k) {
    scaled[k] = mean_logits[k] / sigma_tilde;
  }
  return softmax(scaled);
}

SmoothedPrediction variance_smoothed_forward(const LogitMatrix& logits,
                                             const SmoothingConfig& config,
                                             const BetaCalibration& beta) {
  config.validate();
  const PooledLogits pooled =
      pool_logits(logits, config.pool_kernel, config.pool_stride);
  SigmaStats stats =
      aggregate_sigma(class_sigma(pooled), config.alpha, beta.beta);
  // The prediction path uses the unpooled rows; pooling only feeds variance.
  ProbVector probs =
      smooth_predict(mean_over_rows(logits.values()), stats.sigma_tilde());
  return {std::move(probs), std::move(stats)};
}

double percentile_linear(std::span<const double> values, double q) {
  require(!values.empty(), ErrorCode::EmptyValidationSet, "percentile of empty set");
  require(q > 0.0 && q < 100.0, ErrorCode::InvalidInput,
          "percentile q must lie in (0, 100)");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double rank = q / 100.0 * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(rank);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

BetaCalibration calibrate_beta(std::span<const double> validation_sigma_bars,
                               const BetaPolicy& policy) {
  policy.validate();
  require(!validation_sigma_bars.empty(), ErrorCode::EmptyValidationSet,
          "no validation sigma-bar values");
  require(validation_sigma_bars.size() >= 2, ErrorCode::EmptyValidationSet,
          "beta calibration needs at least 2 validation values");
  double sum = 0.0;
  for (double v : validation_sigma_bars) {
    require(std::isfinite(v) && v >= 0.0, ErrorCode::InvalidInput,
            "validation sigma-bar must be finite and >= 0");
    sum += v;
  }
  const double mean = sum / static_cast<double>(validation_sigma_bars.size());

  BetaCalibration out;
  out.policy = policy;
  out.validation_mean = mean;
  out.n_validation = validation_sigma_bars.size();
  switch (policy.kind) {
    case BetaPolicy::Kind::Fixed:
      out.beta = policy.param;
      break;
    case BetaPolicy::Kind::MeanOffset:
      out.beta = mean + policy.param;
      break;
    case BetaPolicy::Kind::NegPercentile:
      out.requested_percentile = policy.param;
      out.beta = -percentile_linear(validation_sigma_bars, policy.param);
      break;
  }
  return out;
}

SmoothedPrediction ensemble_smoothed_predict(const EnsembleLogits& ensemble,
                                             double alpha, double beta) {
  SigmaStats stats = aggregate_sigma(ensemble_sigma(ensemble), alpha, beta);
  ProbVector probs =
      smooth_predict(mean_over_rows(ensemble.values()), stats.sigma_tilde());
  return {std::move(probs), std::move(stats)};
}

}  // namespace vbs
