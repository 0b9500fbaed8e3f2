#ifndef VBS_SMOOTHING_HPP
#define VBS_SMOOTHING_HPP

#include <span>
#include <vector>

#include "vbs/types.hpp"

namespace vbs {

/// A fitted beta offset plus a record of how it was obtained: the policy and
/// the validation sigma-bar statistics it consumed.
struct BetaCalibration {
  double beta = 0.0;
  BetaPolicy policy = BetaPolicy::fixed(0.0);
  double validation_mean = 0.0;          // mean of the validation sigma-bars
  double requested_percentile = 0.0;     // only meaningful for NegPercentile
  std::size_t n_validation = 0;

  static BetaCalibration fixed(double value) {
    return {value, BetaPolicy::fixed(value), 0.0, 0.0, 0};
  }
};

/// Prediction together with the variance statistics that produced it.
struct SmoothedPrediction {
  ProbVector probs;
  SigmaStats stats;
};

/// Average pooling over sub-patch rows: output row i is the mean of input
/// rows [i*stride, i*stride + kernel). T' = floor((T - kernel) / stride) + 1.
/// kernel = 1, stride = 1 is the identity.
PooledLogits pool_logits(const LogitMatrix& logits, int kernel, int stride);

/// Sample standard deviation of each class column across pooled rows,
/// sigma_k = sqrt(1/(T'-1) * sum_t ([z_t]_k - mu_k)^2). Requires T' >= 2.
std::vector<double> class_sigma(const PooledLogits& pooled);

/// sigma_bar = mean_k sigma_k and sigma_tilde = max(alpha * (sigma_bar + beta), 1).
/// The floor guarantees the temperature never sharpens a prediction.
SigmaStats aggregate_sigma(std::span<const double> per_class, double alpha,
                           double beta);

/// Temperature-scaled softmax of the mean logits. sigma_tilde >= 1 required;
/// the argmax always matches the argmax of the input logits.
ProbVector smooth_predict(std::span<const double> mean_logits, double sigma_tilde);

/// Full single-model pipeline: pool for the variance path, derive the
/// temperature, and scale the softmax of the *unpooled* row mean, so the
/// conventional pre-softmax output is preserved.
SmoothedPrediction variance_smoothed_forward(const LogitMatrix& logits,
                                             const SmoothingConfig& config,
                                             const BetaCalibration& beta);

/// Fit beta from per-sample validation sigma-bars under the given policy.
BetaCalibration calibrate_beta(std::span<const double> validation_sigma_bars,
                               const BetaPolicy& policy);

/// Standard deviation of each class column across ensemble members; the same
/// formula as class_sigma with members in place of pooled windows.
std::vector<double> ensemble_sigma(const EnsembleLogits& ensemble);

/// Ensemble variant: temperature from across-member logit variance applied to
/// the softmax of the member-mean logits.
SmoothedPrediction ensemble_smoothed_predict(const EnsembleLogits& ensemble,
                                             double alpha, double beta);

/// q-th percentile with linear interpolation between closest order statistics
/// (rank = q/100 * (n-1)). q must lie in (0, 100).
double percentile_linear(std::span<const double> values, double q);

}  // namespace vbs

#endif  // VBS_SMOOTHING_HPP
