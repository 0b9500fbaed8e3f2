#include "vbs/metrics.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace vbs {

namespace {

/// Kahan compensated accumulator; keeps reductions insensitive to order at
/// the 1e-12 level the report contracts require.
class KahanSum {
 public:
  void add(double value) {
    const double y = value - compensation_;
    const double t = sum_ + y;
    compensation_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

void check_label(int label, std::size_t classes) {
  require(label >= 0 && static_cast<std::size_t>(label) < classes,
          ErrorCode::InvalidLabel,
          "label " + std::to_string(label) + " out of range [0, " +
              std::to_string(classes) + ")");
}

void check_prediction_set(const std::vector<ProbVector>& predictions,
                          const std::vector<int>& labels, int n_bins) {
  require(n_bins >= 2, ErrorCode::InvalidInput, "need at least 2 bins");
  require(predictions.size() == labels.size(), ErrorCode::LengthMismatch,
          "got " + std::to_string(predictions.size()) + " predictions but " +
              std::to_string(labels.size()) + " labels");
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    require(predictions[i].size() == predictions.front().size(),
            ErrorCode::LengthMismatch,
            "prediction " + std::to_string(i) + " has a different class count");
    check_label(labels[i], predictions[i].size());
  }
}

std::size_t bin_index(double confidence, int n_bins) {
  // Half-open [lo, hi) bins; confidence 1.0 is clamped into the top bin.
  const auto raw = static_cast<std::size_t>(confidence * n_bins);
  return std::min(raw, static_cast<std::size_t>(n_bins - 1));
}

}  // namespace

double predictive_entropy(const ProbVector& p) {
  KahanSum h;
  for (double v : p.probs()) {
    if (v > 0.0) h.add(-v * std::log(v));
  }
  return h.value();
}

double kl_to_uniform(const ProbVector& p) {
  return std::log(static_cast<double>(p.size())) - predictive_entropy(p);
}

double brier(const ProbVector& p, int label) {
  check_label(label, p.size());
  KahanSum sum;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double diff = p[k] - (k == static_cast<std::size_t>(label) ? 1.0 : 0.0);
    sum.add(diff * diff);
  }
  return sum.value();
}

double cross_entropy(std::span<const double> logits, int label) {
  check_label(label, logits.size());
  double max_logit = logits[0];
  for (double z : logits) {
    require(std::isfinite(z), ErrorCode::InvalidLogits,
            "cross entropy of non-finite logits");
    max_logit = std::max(max_logit, z);
  }
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - max_logit);
  return max_logit + std::log(sum) - logits[static_cast<std::size_t>(label)];
}

std::vector<ReliabilityBin> reliability_bins(const std::vector<ProbVector>& predictions,
                                             const std::vector<int>& labels,
                                             int n_bins) {
  check_prediction_set(predictions, labels, n_bins);

  const double width = 1.0 / static_cast<double>(n_bins);
  std::vector<ReliabilityBin> bins(static_cast<std::size_t>(n_bins));
  std::vector<KahanSum> conf_sums(bins.size());
  std::vector<std::size_t> correct(bins.size(), 0);
  for (std::size_t b = 0; b < bins.size(); ++b) {
    bins[b].lo = static_cast<double>(b) * width;
    bins[b].hi = static_cast<double>(b + 1) * width;
  }

  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const std::size_t pred = argmax(predictions[i].span());
    const double confidence = predictions[i][pred];
    const std::size_t b = bin_index(confidence, n_bins);
    bins[b].count += 1;
    conf_sums[b].add(confidence);
    if (pred == static_cast<std::size_t>(labels[i])) correct[b] += 1;
  }

  const double undefined = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t b = 0; b < bins.size(); ++b) {
    if (bins[b].count == 0) {
      bins[b].mean_confidence = undefined;
      bins[b].empirical_accuracy = undefined;
    } else {
      const double n = static_cast<double>(bins[b].count);
      bins[b].mean_confidence = conf_sums[b].value() / n;
      bins[b].empirical_accuracy = static_cast<double>(correct[b]) / n;
    }
  }
  return bins;
}

double ece(const std::vector<ProbVector>& predictions,
           const std::vector<int>& labels, int n_bins) {
  require(!predictions.empty(), ErrorCode::EmptyEvaluationSet,
          "ECE over an empty prediction set");
  const std::vector<ReliabilityBin> bins =
      reliability_bins(predictions, labels, n_bins);
  const double n = static_cast<double>(predictions.size());
  KahanSum total;
  for (const ReliabilityBin& bin : bins) {
    if (bin.count == 0) continue;
    total.add(static_cast<double>(bin.count) / n *
              std::abs(bin.empirical_accuracy - bin.mean_confidence));
  }
  return total.value();
}

CalibrationReport evaluate(const std::vector<ProbVector>& predictions,
                           const std::vector<int>& labels, int n_bins) {
  require(!predictions.empty(), ErrorCode::EmptyEvaluationSet,
          "evaluation of an empty prediction set");
  check_prediction_set(predictions, labels, n_bins);

  CalibrationReport report;
  report.n = predictions.size();
  report.bins = reliability_bins(predictions, labels, n_bins);

  const double n = static_cast<double>(predictions.size());
  KahanSum ece_sum;
  for (const ReliabilityBin& bin : report.bins) {
    if (bin.count == 0) continue;
    ece_sum.add(static_cast<double>(bin.count) / n *
                std::abs(bin.empirical_accuracy - bin.mean_confidence));
  }
  report.ece = ece_sum.value();

  KahanSum brier_sum;
  KahanSum entropy_sum;
  KahanSum kl_sum;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    brier_sum.add(brier(predictions[i], labels[i]));
    const double h = predictive_entropy(predictions[i]);
    entropy_sum.add(h);
    kl_sum.add(std::log(static_cast<double>(predictions[i].size())) - h);
    if (argmax(predictions[i].span()) == static_cast<std::size_t>(labels[i])) {
      ++correct;
    }
  }
  report.brier = brier_sum.value() / n;
  report.mean_entropy = entropy_sum.value() / n;
  report.mean_kl_to_uniform = kl_sum.value() / n;
  report.accuracy = static_cast<double>(correct) / n;
  return report;
}

}  // namespace vbs
