#ifndef VBS_SYNTH_HPP
#define VBS_SYNTH_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "vbs/types.hpp"

namespace vbs {

/// One synthetic sample: T patch rows of dimension d plus its class label.
struct SynthSample {
  Matrix patches;
  int label = 0;
};

/// Generator parameters. Each informative patch is
/// signal_strength * prototype(label) + patch_noise * eta with eta standard
/// normal; the remaining (1 - informative_fraction) share of patches is pure
/// noise, standing in for silent or uninformative input regions.
struct SynthDatasetSpec {
  std::size_t n_samples = 0;
  int classes = 2;           // K
  int patches = 2;           // T
  int patch_dim = 2;         // d
  double signal_strength = 1.0;
  double patch_noise = 0.0;
  double informative_fraction = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Linear per-patch classifier: logits = weights * patch + bias.
struct PatchClassifier {
  Matrix weights;             // K x d
  std::vector<double> bias;   // K

  friend bool operator==(const PatchClassifier&, const PatchClassifier&) = default;
};

/// One line of the training log.
struct TrainLogEntry {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Gradients of the mean cross-entropy loss over a batch.
struct Gradients {
  Matrix weights;             // K x d
  std::vector<double> bias;   // K
};

inline constexpr int kTrainBatchSize = 32;

std::vector<SynthSample> generate_dataset(const SynthDatasetSpec& spec);

/// Small random initialization; distinct seeds give distinct ensemble members.
PatchClassifier random_init(int classes, int patch_dim, std::uint64_t seed);

/// Column mean of the sample's patches; the classifier input after pooling.
std::vector<double> mean_patch(const SynthSample& sample);

/// Mean softmax cross-entropy of the mean-pooled patch logits over `samples`.
double mean_loss(const PatchClassifier& model,
                 std::span<const SynthSample> samples);

/// Analytic gradients of mean_loss; checked against finite differences.
Gradients loss_gradients(const PatchClassifier& model,
                         std::span<const SynthSample> samples);

/// Mini-batch gradient descent (batch 32, reshuffled per epoch from `seed`).
/// Pass `log` to capture per-epoch loss and accuracy.
PatchClassifier train(PatchClassifier init, const std::vector<SynthSample>& dataset,
                      int epochs, double learning_rate, std::uint64_t seed,
                      std::vector<TrainLogEntry>* log = nullptr);

/// Per-patch logits for one sample: row t = weights * patch_t + bias.
LogitMatrix predict_logits(const PatchClassifier& model, const SynthSample& sample);

/// Fraction of samples whose mean-logit argmax equals the label.
double dataset_accuracy(const PatchClassifier& model,
                        std::span<const SynthSample> samples);

/// Train M classifiers on the same data with seeds base_seed + 0 .. M-1
/// (independent inits and shuffles).
std::vector<PatchClassifier> make_ensemble(const std::vector<SynthSample>& dataset,
                                           int classes, int members,
                                           std::uint64_t base_seed, int epochs,
                                           double learning_rate);

/// Member-mean logits of one sample stacked into an M x K ensemble matrix.
EnsembleLogits ensemble_logits_for_sample(std::span<const PatchClassifier> members,
                                          const SynthSample& sample);

}  // namespace vbs

#endif  // VBS_SYNTH_HPP
