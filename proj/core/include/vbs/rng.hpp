#ifndef VBS_RNG_HPP
#define VBS_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace vbs::rng {

/// splitmix64 finalizer; the mixing primitive behind all seed derivation.
constexpr std::uint64_t mix(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Module seed = mix of the run seed and an FNV-1a hash of the module tag.
/// Every stream in the toolkit is derived from the one `--seed` value this way.
constexpr std::uint64_t derive(std::uint64_t base, std::string_view tag) noexcept {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return mix(base ^ h);
}

constexpr std::uint64_t derive(std::uint64_t base, std::uint64_t a) noexcept {
  return mix(base ^ mix(a));
}

constexpr std::uint64_t derive(std::uint64_t base, std::uint64_t a,
                               std::uint64_t b) noexcept {
  return mix(mix(base ^ mix(a)) ^ mix(b));
}

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed) { return Engine(seed); }

/// Uniform double in [0, 1), 53 significand bits.
inline double unit(Engine& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

/// Uniform double in (0, 1]; safe as a log() argument.
inline double unit_positive(Engine& eng) {
  return static_cast<double>((eng() >> 11) + 1) * 0x1.0p-53;
}

/// Unbiased integer in [0, n); rejection sampling on the top of the range.
inline std::uint64_t bounded(Engine& eng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = eng();
  } while (x >= limit);
  return x % n;
}

/// Standard normal draws via Box-Muller. Distributions from <random> are
/// implementation-defined bit-wise; this sampler keeps every seeded stream
/// reproducible across standard libraries.
class NormalSampler {
 public:
  double operator()(Engine& eng) {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = unit_positive(eng);
    const double u2 = unit(eng);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(angle);
    has_spare_ = true;
    return r * std::cos(angle);
  }

 private:
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Fisher-Yates with the local bounded() helper, so shuffles are identical
/// on every platform for a given seed.
template <typename T>
void shuffle(std::vector<T>& items, Engine& eng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(bounded(eng, i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace vbs::rng

#endif  // VBS_RNG_HPP
