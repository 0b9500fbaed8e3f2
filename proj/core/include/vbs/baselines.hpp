#ifndef VBS_BASELINES_HPP
#define VBS_BASELINES_HPP

#include <span>
#include <vector>

#include "vbs/types.hpp"

namespace vbs {

/// Result of the scalar temperature fit. `at_bound` flags a fit that landed
/// on the edge of the search range [0.05, 20].
struct FittedTemperature {
  double t = 1.0;
  double final_nll = 0.0;
  int iterations = 0;
  bool at_bound = false;
};

inline constexpr double kTemperatureSearchLo = 0.05;
inline constexpr double kTemperatureSearchHi = 20.0;

/// Softmax of the column-mean logits; the conventional classifier output.
ProbVector conventional_predict(const LogitMatrix& logits);

/// Mean of the per-row softmax distributions. Tempering by averaging
/// already-softmaxed sub-patch outputs; flattens but can hurt sharpness.
ProbVector naive_subpatch_average(const LogitMatrix& logits);

/// Mean of the per-member softmax distributions.
ProbVector ensemble_mean_predict(const EnsembleLogits& members);

/// Mean negative log-likelihood of softmax(z / t) over a labeled set.
double temperature_nll(const std::vector<std::vector<double>>& mean_logits,
                       const std::vector<int>& labels, double t);

/// Fit t by minimizing mean NLL with golden-section search on log t over
/// [log 0.05, log 20]; at most 200 iterations, stopping when the bracket
/// width falls below 1e-6. Deterministic.
FittedTemperature fit_temperature(const std::vector<std::vector<double>>& val_mean_logits,
                                  const std::vector<int>& labels);

/// softmax(mean_logits / t) for a fixed t > 0. Argmax preserved.
ProbVector apply_temperature(std::span<const double> mean_logits, double t);

}  // namespace vbs

#endif  // VBS_BASELINES_HPP
