#ifndef VBS_METRICS_HPP
#define VBS_METRICS_HPP

#include <span>
#include <vector>

#include "vbs/types.hpp"

namespace vbs {

/// One confidence bin of a reliability diagram. For an empty bin,
/// mean_confidence and empirical_accuracy carry NaN as the undefined marker.
struct ReliabilityBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  double mean_confidence = 0.0;
  double empirical_accuracy = 0.0;
};

/// Everything one evaluation run reports. Entropies are in nats, so
/// mean_entropy + mean_kl_to_uniform equals ln K.
struct CalibrationReport {
  std::vector<ReliabilityBin> bins;
  double ece = 0.0;
  double brier = 0.0;
  double mean_entropy = 0.0;
  double mean_kl_to_uniform = 0.0;
  double accuracy = 0.0;
  std::size_t n = 0;
};

/// Shannon entropy in nats, with 0 * ln 0 taken as 0. Range [0, ln K].
double predictive_entropy(const ProbVector& p);

/// D_KL(p || uniform) = ln K - H(p). Zero exactly when p is uniform.
double kl_to_uniform(const ProbVector& p);

/// Multi-class Brier score sum_k (p_k - 1[k = label])^2, in [0, 2].
double brier(const ProbVector& p, int label);

/// -ln softmax(logits)[label], evaluated as log-sum-exp minus the logit so
/// large magnitudes never overflow.
double cross_entropy(std::span<const double> logits, int label);

/// Assign each sample to bin floor(confidence * n_bins), clamping
/// confidence 1.0 into the top bin, and aggregate per-bin statistics.
/// Confidence is the max class probability.
std::vector<ReliabilityBin> reliability_bins(const std::vector<ProbVector>& predictions,
                                             const std::vector<int>& labels,
                                             int n_bins);

/// Expected calibration error: count-weighted mean absolute gap between bin
/// confidence and bin accuracy; empty bins contribute nothing.
double ece(const std::vector<ProbVector>& predictions,
           const std::vector<int>& labels, int n_bins);

/// Full report over one prediction set: bins, ECE, Brier, mean entropy,
/// mean KL-to-uniform, accuracy.
CalibrationReport evaluate(const std::vector<ProbVector>& predictions,
                           const std::vector<int>& labels, int n_bins);

}  // namespace vbs

#endif  // VBS_METRICS_HPP
