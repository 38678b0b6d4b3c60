#pragma once

#include <cmath>
#include <cstdint>

namespace exitflow {

// Counter-based random stream. Each draw is a pure function of
// (seed, stream_id, counter), so trajectories can be simulated in any
// order, on any number of threads, and still produce identical output.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream_id)
      : base_(mix64(seed ^ mix64(stream_id + 0x9e3779b97f4a7c15ull))) {}

  // k-th 64-bit word of the stream.
  std::uint64_t word(std::uint64_t k) const {
    return mix64(base_ + k * 0x9e3779b97f4a7c15ull);
  }

  // Uniform on (0,1]; never returns 0 so log() is safe.
  double uniform(std::uint64_t k) const {
    return static_cast<double>((word(k) >> 11) + 1) * 0x1.0p-53;
  }

  // Standard normal pair by Box-Muller from counters (2k, 2k+1).
  void normal_pair(std::uint64_t k, double& g0, double& g1) const {
    const double u1 = uniform(2 * k);
    const double u2 = uniform(2 * k + 1);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    g0 = r * std::cos(a);
    g1 = r * std::sin(a);
  }

 private:
  static std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ull;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebull;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t base_;
};

// Sequential view over a CounterRng that hands out normals one at a time.
// The amount of randomness consumed per step is fixed, so the cursor
// position stays a deterministic function of the step index.
class NormalStream {
 public:
  explicit NormalStream(CounterRng rng) : rng_(rng) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double g0, g1;
    rng_.normal_pair(pair_++, g0, g1);
    spare_ = g1;
    have_spare_ = true;
    return g0;
  }

  // Drop any buffered half-pair; aligns the stream at a step boundary.
  void round_up() { have_spare_ = false; }

 private:
  CounterRng rng_;
  std::uint64_t pair_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace exitflow
