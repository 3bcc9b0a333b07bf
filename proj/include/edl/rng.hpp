#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace edl {

/// splitmix64 finalizer; bijective on 64-bit integers.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives an independent stream key from a base seed and up to three
/// structural indices (ensemble, snapshot, particle...). Streams with
/// different keys are independent for practical purposes, which keeps
/// per-particle trajectories identical under any parallel schedule.
inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t a,
                                std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t k = mix64(seed);
  k = mix64(k ^ (a + 0x9e3779b97f4a7c15ULL));
  k = mix64(k ^ (b + 0xbf58476d1ce4e5b9ULL));
  k = mix64(k ^ (c + 0x94d049bb133111ebULL));
  return k;
}

// Purpose tags so that e.g. simulation and observation-noise streams derived
// from the same user seed never collide.
namespace stream_tag {
constexpr std::uint64_t kSimulate = 0x51;
constexpr std::uint64_t kInitMeans = 0x52;
constexpr std::uint64_t kObservationNoise = 0x53;
constexpr std::uint64_t kWeightInit = 0x54;
constexpr std::uint64_t kEval = 0x55;
constexpr std::uint64_t kSubsample = 0x56;
}  // namespace stream_tag

/// Small counter-based generator (splitmix64 stream) with Box-Muller normals.
/// Cheap to construct, so each (seed, q, j) pair gets its own instance.
class Rng {
 public:
  explicit Rng(std::uint64_t key) : state_(key) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in (0,1); never returns 0, so it is safe inside log().
  double uniform01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard normal via Box-Muller; caches the second draw of each pair.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace edl
