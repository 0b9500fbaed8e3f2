#ifndef VBS_NOISE_HPP
#define VBS_NOISE_HPP

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "vbs/smoothing.hpp"
#include "vbs/synth.hpp"
#include "vbs/types.hpp"

namespace vbs {

enum class NoiseKind { Gaussian, Speckle, Affine, Elastic };

std::string_view to_string(NoiseKind kind) noexcept;
NoiseKind noise_kind_from_string(std::string_view name);

/// A single perturbation request, intensity lambda in [0, 1].
struct NoiseSpec {
  NoiseKind kind = NoiseKind::Gaussian;
  double lambda = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// H x W x C pixel grid for the geometric operators.
struct ImageGrid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;
  std::vector<double> pixels;  // row-major, channel innermost

  ImageGrid() = default;
  ImageGrid(std::size_t h, std::size_t w, std::size_t c);

  double at(std::size_t y, std::size_t x, std::size_t c) const {
    return pixels[(y * width + x) * channels + c];
  }
  double& at(std::size_t y, std::size_t x, std::size_t c) {
    return pixels[(y * width + x) * channels + c];
  }

  void validate() const;
};

/// One sweep over an ascending lambda grid: per-lambda mean sigma-bar,
/// mean predictive entropy and accuracy, all series sharing the grid length.
struct SweepCurve {
  std::vector<double> lambdas;
  std::vector<double> sigma_bar;
  std::vector<double> mean_entropy;
  std::vector<double> accuracy;
};

/// x + lambda * eps with eps ~ N(0, I). lambda = 0 returns the input
/// unchanged, bit for bit.
std::vector<double> gaussian_noise(std::span<const double> x, double lambda,
                                   std::uint64_t seed);

/// x + lambda * (x ⊙ eps): perturbation proportional to the signal itself.
std::vector<double> speckle_noise(std::span<const double> x, double lambda,
                                  std::uint64_t seed);

/// The 2x2 transform for intensity lambda: rotation by lambda*30deg, shear
/// term lambda*10deg (in radians) added to the right column, isotropic scale
/// 1 + lambda. Row-major {a00, a01, a10, a11}; lambda = 0 is the identity.
std::array<double, 4> affine_matrix(double lambda);

/// Pad by 0.2 * max(H, W) with edge replication, inverse-map through
/// affine_matrix(lambda) about the padded center with nearest-neighbor
/// sampling, then center-crop back to H x W.
ImageGrid affine_transform(const ImageGrid& img, double lambda);

/// Per-pixel displacements from U(-5*lambda, 5*lambda); coordinates are
/// clamped to the image bounds and sampled nearest-neighbor, so the output
/// never contains a value absent from the input.
ImageGrid elastic_distortion(const ImageGrid& img, double lambda,
                             std::uint64_t seed);

/// Apply one perturbation to a synthetic sample. Gaussian and speckle act on
/// the flat patch values; affine and elastic treat the T x d patch matrix as
/// a single-channel image.
SynthSample perturb_sample(const SynthSample& sample, NoiseKind kind,
                           double lambda, std::uint64_t seed);

/// For each lambda, perturb every sample with a per-sample derived seed, run
/// the variance-smoothed forward pass, and record mean sigma-bar, mean
/// entropy and accuracy.
SweepCurve noise_sweep(const PatchClassifier& model,
                       std::span<const SynthSample> dataset, NoiseKind kind,
                       std::span<const double> lambda_grid,
                       const SmoothingConfig& config, const BetaCalibration& beta,
                       std::uint64_t sweep_seed);

/// CSV with header `lambda,sigma_bar,mean_entropy,accuracy`, one row per
/// grid point, 9 significant digits.
std::string sweep_to_csv(const SweepCurve& curve);

}  // namespace vbs

#endif  // VBS_NOISE_HPP
