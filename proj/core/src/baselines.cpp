#include "vbs/baselines.hpp"

#include <cmath>
#include <string>

namespace vbs {

ProbVector conventional_predict(const LogitMatrix& logits) {
  return softmax(mean_over_rows(logits.values()));
}

namespace {

ProbVector mean_of_row_softmaxes(const Matrix& values) {
  std::vector<double> acc(values.cols(), 0.0);
  for (std::size_t r = 0; r < values.rows(); ++r) {
    const ProbVector p = softmax(values.row(r));
    for (std::size_t c = 0; c < values.cols(); ++c) acc[c] += p[c];
  }
  const double inv = 1.0 / static_cast<double>(values.rows());
  for (double& v : acc) v *= inv;
  return ProbVector(std::move(acc));
}

}  // namespace

ProbVector naive_subpatch_average(const LogitMatrix& logits) {
  return mean_of_row_softmaxes(logits.values());
}

ProbVector ensemble_mean_predict(const EnsembleLogits& members) {
  return mean_of_row_softmaxes(members.values());
}

double temperature_nll(const std::vector<std::vector<double>>& mean_logits,
                       const std::vector<int>& labels, double t) {
  require(!mean_logits.empty(), ErrorCode::EmptyValidationSet,
          "temperature NLL over an empty set");
  require(mean_logits.size() == labels.size(), ErrorCode::LengthMismatch,
          "logits and labels differ in length");
  require(std::isfinite(t) && t > 0.0, ErrorCode::InvalidTemperature,
          "temperature must be > 0");
  double total = 0.0;
  for (std::size_t i = 0; i < mean_logits.size(); ++i) {
    const std::vector<double>& z = mean_logits[i];
    const int label = labels[i];
    require(label >= 0 && static_cast<std::size_t>(label) < z.size(),
            ErrorCode::InvalidLabel,
            "label " + std::to_string(label) + " out of range at sample " +
                std::to_string(i));
    double max_scaled = z[0] / t;
    for (double v : z) max_scaled = std::max(max_scaled, v / t);
    double sum = 0.0;
    for (double v : z) sum += std::exp(v / t - max_scaled);
    total += max_scaled + std::log(sum) - z[static_cast<std::size_t>(label)] / t;
  }
  return total / static_cast<double>(mean_logits.size());
}

FittedTemperature fit_temperature(const std::vector<std::vector<double>>& val_mean_logits,
                                  const std::vector<int>& labels) {
  require(!val_mean_logits.empty(), ErrorCode::EmptyValidationSet,
          "temperature fit needs at least 1 labeled sample");

  const auto objective = [&](double log_t) {
    return temperature_nll(val_mean_logits, labels, std::exp(log_t));
  };

  constexpr double kInvPhi = 0.6180339887498949;  // 1/phi
  double lo = std::log(kTemperatureSearchLo);
  double hi = std::log(kTemperatureSearchHi);
  double x1 = hi - kInvPhi * (hi - lo);
  double x2 = lo + kInvPhi * (hi - lo);
  double f1 = objective(x1);
  double f2 = objective(x2);

  int iterations = 0;
  while (iterations < 200 && hi - lo >= 1e-6) {
    ++iterations;
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kInvPhi * (hi - lo);
      f1 = objective(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kInvPhi * (hi - lo);
      f2 = objective(x2);
    }
  }

  FittedTemperature fit;
  fit.iterations = iterations;
  fit.t = std::exp(0.5 * (lo + hi));
  fit.final_nll = temperature_nll(val_mean_logits, labels, fit.t);
  // In-sample fitting must never lose to the untouched model.
  const double nll_at_one = temperature_nll(val_mean_logits, labels, 1.0);
  if (nll_at_one < fit.final_nll) {
    fit.t = 1.0;
    fit.final_nll = nll_at_one;
  }
  const double bound_slack =
      1e-5 * (std::log(kTemperatureSearchHi) - std::log(kTemperatureSearchLo));
  fit.at_bound =
      std::log(fit.t) - std::log(kTemperatureSearchLo) <= bound_slack ||
      std::log(kTemperatureSearchHi) - std::log(fit.t) <= bound_slack;
  return fit;
}

ProbVector apply_temperature(std::span<const double> mean_logits, double t) {
  require(std::isfinite(t) && t > 0.0, ErrorCode::InvalidTemperature,
          "temperature must be > 0, got " + std::to_string(t));
  std::vector<double> scaled(mean_logits.size());
  for (std::size_t k = 0; k < mean_logits.size(); ++k) {
    scaled[k] = mean_logits[k] / t;
  }
  return softmax(scaled);
}

}  // namespace vbs
