#include "vbs/noise.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include "vbs/metrics.hpp"
#include "vbs/rng.hpp"

namespace vbs {

std::string_view to_string(NoiseKind kind) noexcept {
  switch (kind) {
    case NoiseKind::Gaussian: return "gaussian";
    case NoiseKind::Speckle: return "speckle";
    case NoiseKind::Affine: return "affine";
    case NoiseKind::Elastic: return "elastic";
  }
  return "unknown";
}

NoiseKind noise_kind_from_string(std::string_view name) {
  if (name == "gaussian") return NoiseKind::Gaussian;
  if (name == "speckle") return NoiseKind::Speckle;
  if (name == "affine") return NoiseKind::Affine;
  if (name == "elastic") return NoiseKind::Elastic;
  raise(ErrorCode::InvalidInput, "unknown noise kind '" + std::string(name) + "'");
}

namespace {

void check_lambda(double lambda) {
  require(std::isfinite(lambda) && lambda >= 0.0 && lambda <= 1.0,
          ErrorCode::InvalidInput,
          "noise intensity lambda must lie in [0, 1], got " +
              std::to_string(lambda));
}

}  // namespace

void NoiseSpec::validate() const { check_lambda(lambda); }

ImageGrid::ImageGrid(std::size_t h, std::size_t w, std::size_t c)
    : height(h), width(w), channels(c), pixels(h * w * c, 0.0) {
  validate();
}

void ImageGrid::validate() const {
  require(height >= 1 && width >= 1 && channels >= 1, ErrorCode::InvalidInput,
          "image grid dimensions must all be >= 1");
  require(pixels.size() == height * width * channels, ErrorCode::ShapeError,
          "pixel buffer size does not match H*W*C");
  for (double v : pixels) {
    require(std::isfinite(v), ErrorCode::NonFiniteValue,
            "image grid contains a non-finite pixel");
  }
}

std::vector<double> gaussian_noise(std::span<const double> x, double lambda,
                                   std::uint64_t seed) {
  check_lambda(lambda);
  std::vector<double> out(x.begin(), x.end());
  if (lambda == 0.0) return out;
  rng::Engine eng = rng::make_engine(seed);
  rng::NormalSampler normal;
  for (double& v : out) v += lambda * normal(eng);
  return out;
}

std::vector<double> speckle_noise(std::span<const double> x, double lambda,
                                  std::uint64_t seed) {
  check_lambda(lambda);
  std::vector<double> out(x.begin(), x.end());
  if (lambda == 0.0) return out;
  rng::Engine eng = rng::make_engine(seed);
  rng::NormalSampler normal;
  for (double& v : out) v += lambda * (v * normal(eng));
  return out;
}

std::array<double, 4> affine_matrix(double lambda) {
  check_lambda(lambda);
  constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
  const double theta = lambda * 30.0 * kDegToRad;
  const double shear = lambda * 10.0 * kDegToRad;
  const double scale = 1.0 + lambda;
  return {scale * std::cos(theta), -scale * std::sin(theta) + shear,
          scale * std::sin(theta), scale * std::cos(theta) + shear};
}

namespace {

/// Edge-replicating pad; avoids injecting a border value the image never had.
ImageGrid pad_replicate(const ImageGrid& img, std::size_t pad) {
  ImageGrid out(img.height + 2 * pad, img.width + 2 * pad, img.channels);
  for (std::size_t y = 0; y < out.height; ++y) {
    const std::size_t sy =
        std::min(img.height - 1,
                 static_cast<std::size_t>(std::max<std::ptrdiff_t>(
                     0, static_cast<std::ptrdiff_t>(y) -
                            static_cast<std::ptrdiff_t>(pad))));
    for (std::size_t x = 0; x < out.width; ++x) {
      const std::size_t sx =
          std::min(img.width - 1,
                   static_cast<std::size_t>(std::max<std::ptrdiff_t>(
                       0, static_cast<std::ptrdiff_t>(x) -
                              static_cast<std::ptrdiff_t>(pad))));
      for (std::size_t c = 0; c < img.channels; ++c) {
        out.at(y, x, c) = img.at(sy, sx, c);
      }
    }
  }
  return out;
}

std::size_t clamp_index(double v, std::size_t upper) {
  const auto r = std::lround(v);
  if (r < 0) return 0;
  const auto u = static_cast<long>(upper);
  return static_cast<std::size_t>(std::min(r, u));
}

}  // namespace

ImageGrid affine_transform(const ImageGrid& img, double lambda) {
  check_lambda(lambda);
  img.validate();
  const std::array<double, 4> fwd = affine_matrix(lambda);
  const double det = fwd[0] * fwd[3] - fwd[1] * fwd[2];
  require(std::abs(det) > 1e-12, ErrorCode::InvalidInput,
          "affine matrix is singular");
  const std::array<double, 4> inv = {fwd[3] / det, -fwd[1] / det, -fwd[2] / det,
                                     fwd[0] / det};

  const auto pad = static_cast<std::size_t>(
      std::lround(0.2 * static_cast<double>(std::max(img.height, img.width))));
  const ImageGrid padded = pad_replicate(img, pad);
  const double cx = (static_cast<double>(padded.width) - 1.0) / 2.0;
  const double cy = (static_cast<double>(padded.height) - 1.0) / 2.0;

  // Inverse mapping: pull every output pixel from its source location, so the
  // result has no holes regardless of the scale factor.
  ImageGrid warped(padded.height, padded.width, padded.channels);
  for (std::size_t y = 0; y < padded.height; ++y) {
    for (std::size_t x = 0; x < padded.width; ++x) {
      const double dx = static_cast<double>(x) - cx;
      const double dy = static_cast<double>(y) - cy;
      const double src_x = inv[0] * dx + inv[1] * dy + cx;
      const double src_y = inv[2] * dx + inv[3] * dy + cy;
      const std::size_t sx = clamp_index(src_x, padded.width - 1);
      const std::size_t sy = clamp_index(src_y, padded.height - 1);
      for (std::size_t c = 0; c < padded.channels; ++c) {
        warped.at(y, x, c) = padded.at(sy, sx, c);
      }
    }
  }

  ImageGrid out(img.height, img.width, img.channels);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      for (std::size_t c = 0; c < img.channels; ++c) {
        out.at(y, x, c) = warped.at(y + pad, x + pad, c);
      }
    }
  }
  return out;
}

ImageGrid elastic_distortion(const ImageGrid& img, double lambda,
                             std::uint64_t seed) {
  check_lambda(lambda);
  img.validate();
  rng::Engine eng = rng::make_engine(seed);
  const double limit = 5.0 * lambda;

  ImageGrid out(img.height, img.width, img.channels);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      // Row-major draw order, dx before dy.
      const double dx = (2.0 * rng::unit(eng) - 1.0) * limit;
      const double dy = (2.0 * rng::unit(eng) - 1.0) * limit;
      const double src_x = std::clamp(static_cast<double>(x) + dx, 0.0,
                                      static_cast<double>(img.width - 1));
      const double src_y = std::clamp(static_cast<double>(y) + dy, 0.0,
                                      static_cast<double>(img.height - 1));
      const std::size_t sx = clamp_index(src_x, img.width - 1);
      const std::size_t sy = clamp_index(src_y, img.height - 1);
      for (std::size_t c = 0; c < img.channels; ++c) {
        out.at(y, x, c) = img.at(sy, sx, c);
      }
    }
  }
  return out;
}

namespace {

ImageGrid patches_as_image(const Matrix& patches) {
  ImageGrid img(patches.rows(), patches.cols(), 1);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      img.at(y, x, 0) = patches(y, x);
    }
  }
  return img;
}

Matrix image_as_patches(const ImageGrid& img) {
  Matrix patches(img.height, img.width);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      patches(y, x) = img.at(y, x, 0);
    }
  }
  return patches;
}

}  // namespace

SynthSample perturb_sample(const SynthSample& sample, NoiseKind kind,
                           double lambda, std::uint64_t seed) {
  SynthSample out;
  out.label = sample.label;
  switch (kind) {
    case NoiseKind::Gaussian: {
      out.patches = sample.patches;
      out.patches.data() = gaussian_noise(sample.patches.data(), lambda, seed);
      break;
    }
    case NoiseKind::Speckle: {
      out.patches = sample.patches;
      out.patches.data() = speckle_noise(sample.patches.data(), lambda, seed);
      break;
    }
    case NoiseKind::Affine:
      out.patches =
          image_as_patches(affine_transform(patches_as_image(sample.patches), lambda));
      break;
    case NoiseKind::Elastic:
      out.patches = image_as_patches(
          elastic_distortion(patches_as_image(sample.patches), lambda, seed));
      break;
  }
  return out;
}

SweepCurve noise_sweep(const PatchClassifier& model,
                       std::span<const SynthSample> dataset, NoiseKind kind,
                       std::span<const double> lambda_grid,
                       const SmoothingConfig& config, const BetaCalibration& beta,
                       std::uint64_t sweep_seed) {
  require(!lambda_grid.empty(), ErrorCode::InvalidInput, "empty lambda grid");
  require(!dataset.empty(), ErrorCode::EmptyDataset, "sweep over an empty dataset");
  for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
    check_lambda(lambda_grid[i]);
    require(i == 0 || lambda_grid[i] > lambda_grid[i - 1], ErrorCode::InvalidInput,
            "lambda grid must be strictly ascending");
  }
  config.validate();

  SweepCurve curve;
  curve.lambdas.assign(lambda_grid.begin(), lambda_grid.end());
  curve.sigma_bar.reserve(lambda_grid.size());
  curve.mean_entropy.reserve(lambda_grid.size());
  curve.accuracy.reserve(lambda_grid.size());

  for (std::size_t li = 0; li < lambda_grid.size(); ++li) {
    double sigma_sum = 0.0, sigma_c = 0.0;
    double entropy_sum = 0.0, entropy_c = 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      const std::uint64_t sample_seed = rng::derive(sweep_seed, i, li);
      const SynthSample noisy =
          perturb_sample(dataset[i], kind, lambda_grid[li], sample_seed);
      const LogitMatrix logits = predict_logits(model, noisy);
      const SmoothedPrediction pred =
          variance_smoothed_forward(logits, config, beta);

      // Compensated accumulation keeps the reduction order-insensitive.
      double y = pred.stats.sigma_bar() - sigma_c;
      double t = sigma_sum + y;
      sigma_c = (t - sigma_sum) - y;
      sigma_sum = t;

      y = predictive_entropy(pred.probs) - entropy_c;
      t = entropy_sum + y;
      entropy_c = (t - entropy_sum) - y;
      entropy_sum = t;

      if (argmax(pred.probs.span()) ==
          static_cast<std::size_t>(dataset[i].label)) {
        ++correct;
      }
    }
    const double n = static_cast<double>(dataset.size());
    curve.sigma_bar.push_back(sigma_sum / n);
    curve.mean_entropy.push_back(entropy_sum / n);
    curve.accuracy.push_back(static_cast<double>(correct) / n);
  }
  return curve;
}

std::string sweep_to_csv(const SweepCurve& curve) {
  std::string csv = "lambda,sigma_bar,mean_entropy,accuracy\n";
  char line[160];
  for (std::size_t i = 0; i < curve.lambdas.size(); ++i) {
    std::snprintf(line, sizeof(line), "%.9g,%.9g,%.9g,%.9g\n", curve.lambdas[i],
                  curve.sigma_bar[i], curve.mean_entropy[i], curve.accuracy[i]);
    csv += line;
  }
  return csv;
}

}  // namespace vbs
