#include "vbs/synth.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "vbs/rng.hpp"

namespace vbs {

void SynthDatasetSpec::validate() const {
  require(n_samples >= 1, ErrorCode::InvalidSpec, "n_samples must be >= 1");
  require(classes >= 2, ErrorCode::InvalidSpec, "need at least 2 classes");
  require(patches >= 2, ErrorCode::InvalidSpec, "need at least 2 patches");
  require(patch_dim >= 1, ErrorCode::InvalidSpec, "patch_dim must be >= 1");
  require(std::isfinite(signal_strength) && signal_strength > 0.0,
          ErrorCode::InvalidSpec, "signal_strength must be > 0");
  require(std::isfinite(patch_noise) && patch_noise >= 0.0, ErrorCode::InvalidSpec,
          "patch_noise must be >= 0");
  require(informative_fraction > 0.0 && informative_fraction <= 1.0,
          ErrorCode::InvalidSpec, "informative_fraction must lie in (0, 1]");
}

namespace {

/// Seeded unit-vector prototypes, pairwise cos < 0.9 enforced by rejection so
/// every class is geometrically distinguishable.
std::vector<std::vector<double>> make_prototypes(int classes, int dim,
                                                 rng::Engine& eng) {
  rng::NormalSampler normal;
  std::vector<std::vector<double>> prototypes;
  prototypes.reserve(static_cast<std::size_t>(classes));
  int attempts = 0;
  while (prototypes.size() < static_cast<std::size_t>(classes)) {
    require(++attempts <= 10000 * classes, ErrorCode::InvalidSpec,
            "could not place " + std::to_string(classes) +
                " separated class prototypes in dimension " + std::to_string(dim));
    std::vector<double> candidate(static_cast<std::size_t>(dim));
    double norm_sq = 0.0;
    for (double& v : candidate) {
      v = normal(eng);
      norm_sq += v * v;
    }
    if (norm_sq < 1e-12) continue;
    const double inv_norm = 1.0 / std::sqrt(norm_sq);
    for (double& v : candidate) v *= inv_norm;

    bool separated = true;
    for (const std::vector<double>& other : prototypes) {
      const double cosine =
          std::inner_product(candidate.begin(), candidate.end(), other.begin(), 0.0);
      if (cosine >= 0.9) {
        separated = false;
        break;
      }
    }
    if (separated) prototypes.push_back(std::move(candidate));
  }
  return prototypes;
}

}  // namespace

std::vector<SynthSample> generate_dataset(const SynthDatasetSpec& spec) {
  spec.validate();
  rng::Engine eng = rng::make_engine(spec.seed);
  rng::NormalSampler normal;

  const auto prototypes = make_prototypes(spec.classes, spec.patch_dim, eng);
  const auto t = static_cast<std::size_t>(spec.patches);
  const auto d = static_cast<std::size_t>(spec.patch_dim);
  const auto n_noise_patches = static_cast<std::size_t>(std::lround(
      (1.0 - spec.informative_fraction) * static_cast<double>(spec.patches)));

  std::vector<SynthSample> samples;
  samples.reserve(spec.n_samples);
  std::vector<std::size_t> patch_order(t);
  for (std::size_t i = 0; i < spec.n_samples; ++i) {
    SynthSample sample;
    sample.label = static_cast<int>(
        rng::bounded(eng, static_cast<std::uint64_t>(spec.classes)));
    // Which patches carry no signal this sample: first n_noise_patches of a
    // fresh shuffle of the patch indices.
    std::iota(patch_order.begin(), patch_order.end(), std::size_t{0});
    rng::shuffle(patch_order, eng);
    std::vector<bool> is_noise(t, false);
    for (std::size_t j = 0; j < n_noise_patches; ++j) is_noise[patch_order[j]] = true;

    const std::vector<double>& mu =
        prototypes[static_cast<std::size_t>(sample.label)];
    sample.patches = Matrix(t, d);
    for (std::size_t p = 0; p < t; ++p) {
      for (std::size_t j = 0; j < d; ++j) {
        const double signal = is_noise[p] ? 0.0 : spec.signal_strength * mu[j];
        sample.patches(p, j) = signal + spec.patch_noise * normal(eng);
      }
    }
    samples.push_back(std::move(sample));
  }
  return samples;
}

PatchClassifier random_init(int classes, int patch_dim, std::uint64_t seed) {
  require(classes >= 2 && patch_dim >= 1, ErrorCode::InvalidSpec,
          "classifier needs K >= 2 and d >= 1");
  rng::Engine eng = rng::make_engine(seed);
  rng::NormalSampler normal;
  const double scale = 0.1 / std::sqrt(static_cast<double>(patch_dim));
  PatchClassifier model;
  model.weights = Matrix(static_cast<std::size_t>(classes),
                         static_cast<std::size_t>(patch_dim));
  for (double& w : model.weights.data()) w = scale * normal(eng);
  model.bias.assign(static_cast<std::size_t>(classes), 0.0);
  return model;
}

std::vector<double> mean_patch(const SynthSample& sample) {
  return mean_over_rows(sample.patches);
}

namespace {

void check_dims(const PatchClassifier& model, const SynthSample& sample) {
  require(model.weights.cols() == sample.patches.cols(), ErrorCode::ShapeError,
          "classifier expects patch dimension " +
              std::to_string(model.weights.cols()) + ", sample has " +
              std::to_string(sample.patches.cols()));
}

std::vector<double> mean_patch_logits(const PatchClassifier& model,
                                      const SynthSample& sample) {
  check_dims(model, sample);
  const std::vector<double> pooled = mean_patch(sample);
  std::vector<double> logits(model.weights.rows());
  for (std::size_t k = 0; k < logits.size(); ++k) {
    double acc = model.bias[k];
    for (std::size_t j = 0; j < pooled.size(); ++j) {
      acc += model.weights(k, j) * pooled[j];
    }
    logits[k] = acc;
  }
  return logits;
}

}  // namespace

double mean_loss(const PatchClassifier& model,
                 std::span<const SynthSample> samples) {
  require(!samples.empty(), ErrorCode::EmptyDataset, "loss over an empty set");
  double total = 0.0;
  for (const SynthSample& sample : samples) {
    const std::vector<double> logits = mean_patch_logits(model, sample);
    double max_z = logits[0];
    for (double z : logits) max_z = std::max(max_z, z);
    double sum = 0.0;
    for (double z : logits) sum += std::exp(z - max_z);
    total += max_z + std::log(sum) -
             logits[static_cast<std::size_t>(sample.label)];
  }
  return total / static_cast<double>(samples.size());
}

Gradients loss_gradients(const PatchClassifier& model,
                         std::span<const SynthSample> samples) {
  require(!samples.empty(), ErrorCode::EmptyDataset, "gradients of an empty set");
  const std::size_t classes = model.weights.rows();
  const std::size_t dim = model.weights.cols();
  Gradients grads{Matrix(classes, dim), std::vector<double>(classes, 0.0)};

  for (const SynthSample& sample : samples) {
    const std::vector<double> logits = mean_patch_logits(model, sample);
    const ProbVector probs = softmax(logits);
    const std::vector<double> pooled = mean_patch(sample);
    for (std::size_t k = 0; k < classes; ++k) {
      // d(mean CE)/d(logit_k) = p_k - 1[k = label], chained through u = W x + b.
      const double delta =
          probs[k] - (k == static_cast<std::size_t>(sample.label) ? 1.0 : 0.0);
      grads.bias[k] += delta;
      for (std::size_t j = 0; j < dim; ++j) {
        grads.weights(k, j) += delta * pooled[j];
      }
    }
  }

  const double inv_n = 1.0 / static_cast<double>(samples.size());
  for (double& g : grads.weights.data()) g *= inv_n;
  for (double& g : grads.bias) g *= inv_n;
  return grads;
}

PatchClassifier train(PatchClassifier init, const std::vector<SynthSample>& dataset,
                      int epochs, double learning_rate, std::uint64_t seed,
                      std::vector<TrainLogEntry>* log) {
  require(!dataset.empty(), ErrorCode::EmptyDataset, "training set is empty");
  require(epochs >= 0, ErrorCode::InvalidInput, "epochs must be >= 0");
  require(std::isfinite(learning_rate) && learning_rate > 0.0,
          ErrorCode::InvalidInput, "learning rate must be > 0");
  for (const SynthSample& sample : dataset) check_dims(init, sample);

  PatchClassifier model = std::move(init);
  rng::Engine eng = rng::make_engine(seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<SynthSample> batch;
  batch.reserve(kTrainBatchSize);

  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng::shuffle(order, eng);
    for (std::size_t start = 0; start < order.size(); start += kTrainBatchSize) {
      const std::size_t end = std::min(order.size(), start + kTrainBatchSize);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(dataset[order[i]]);
      const Gradients grads = loss_gradients(model, batch);
      for (std::size_t idx = 0; idx < model.weights.data().size(); ++idx) {
        model.weights.data()[idx] -= learning_rate * grads.weights.data()[idx];
      }
      for (std::size_t k = 0; k < model.bias.size(); ++k) {
        model.bias[k] -= learning_rate * grads.bias[k];
      }
    }
    if (log != nullptr) {
      log->push_back({epoch + 1, mean_loss(model, dataset),
                      dataset_accuracy(model, dataset)});
    }
  }
  return model;
}

LogitMatrix predict_logits(const PatchClassifier& model, const SynthSample& sample) {
  check_dims(model, sample);
  const std::size_t t = sample.patches.rows();
  const std::size_t classes = model.weights.rows();
  Matrix logits(t, classes);
  for (std::size_t p = 0; p < t; ++p) {
    const std::span<const double> patch = sample.patches.row(p);
    for (std::size_t k = 0; k < classes; ++k) {
      double acc = model.bias[k];
      for (std::size_t j = 0; j < patch.size(); ++j) {
        acc += model.weights(k, j) * patch[j];
      }
      logits(p, k) = acc;
    }
  }
  return LogitMatrix(std::move(logits));
}

double dataset_accuracy(const PatchClassifier& model,
                        std::span<const SynthSample> samples) {
  require(!samples.empty(), ErrorCode::EmptyDataset, "accuracy over an empty set");
  std::size_t correct = 0;
  for (const SynthSample& sample : samples) {
    const std::vector<double> logits = mean_patch_logits(model, sample);
    if (argmax(logits) == static_cast<std::size_t>(sample.label)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

std::vector<PatchClassifier> make_ensemble(const std::vector<SynthSample>& dataset,
                                           int classes, int members,
                                           std::uint64_t base_seed, int epochs,
                                           double learning_rate) {
  require(members >= 2, ErrorCode::InsufficientMembers,
          "an ensemble needs at least 2 members");
  require(!dataset.empty(), ErrorCode::EmptyDataset, "training set is empty");
  const int patch_dim = static_cast<int>(dataset.front().patches.cols());

  std::vector<PatchClassifier> ensemble;
  ensemble.reserve(static_cast<std::size_t>(members));
  for (int m = 0; m < members; ++m) {
    const std::uint64_t member_seed = base_seed + static_cast<std::uint64_t>(m);
    PatchClassifier init = random_init(classes, patch_dim,
                                       rng::derive(member_seed, "synth.init"));
    ensemble.push_back(train(std::move(init), dataset, epochs, learning_rate,
                             rng::derive(member_seed, "synth.shuffle")));
  }
  return ensemble;
}

EnsembleLogits ensemble_logits_for_sample(std::span<const PatchClassifier> members,
                                          const SynthSample& sample) {
  require(members.size() >= 2, ErrorCode::InsufficientMembers,
          "an ensemble needs at least 2 members");
  Matrix stacked(members.size(), members.front().weights.rows());
  for (std::size_t m = 0; m < members.size(); ++m) {
    const std::vector<double> member_logits =
        mean_over_rows(predict_logits(members[m], sample).values());
    for (std::size_t k = 0; k < stacked.cols(); ++k) {
      stacked(m, k) = member_logits[k];
    }
  }
  return EnsembleLogits(std::move(stacked));
}

}  // namespace vbs
