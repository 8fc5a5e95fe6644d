#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace swsim {

// Counter-style seed derivation: every consumer of randomness owns a stream
// whose seed is a stable hash of (parent seed, tag, indices). Replicates and
// cluster-period cells therefore draw from independent streams regardless of
// scheduling order or thread count.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_stream(std::uint64_t base, std::uint64_t a,
                                   std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t s = base;
  std::uint64_t h = splitmix64(s);
  s ^= a + 0x9e3779b97f4a7c15ULL;
  h ^= splitmix64(s);
  s ^= b + 0xc2b2ae3d27d4eb4fULL;
  h ^= splitmix64(s);
  s ^= c + 0x165667b19e3779f9ULL;
  h ^= splitmix64(s);
  return h;
}

// Stream tags used by the data generator.
namespace stream_tag {
inline constexpr std::uint64_t replicate = 0x5245504cULL;  // per-replicate root
inline constexpr std::uint64_t times = 0x54494d45ULL;      // recruitment times, per cell
inline constexpr std::uint64_t gamma = 0x47414d41ULL;      // cluster-time random effects
inline constexpr std::uint64_t random_intervention = 0x52494e54ULL;
inline constexpr std::uint64_t noise = 0x4e4f4953ULL;      // residual errors, per cell
inline constexpr std::uint64_t pattern_control = 0x50415430ULL;
inline constexpr std::uint64_t pattern_treated = 0x50415431ULL;
}  // namespace stream_tag

// xoshiro256++ with a Box-Muller normal variate cache. Distribution code is
// hand-rolled (not std::*_distribution) so streams are identical across
// standard-library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    for (auto& word : state_) word = splitmix64(s);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform on the half-open interval (lo, hi].
  double uniform_open_closed(double lo, double hi) {
    return hi - (hi - lo) * uniform01();
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // 1 - u in (0, 1] keeps the log argument positive.
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * pi * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  double exponential(double rate) {
    return -std::log(1.0 - uniform01()) / rate;
  }

  // Uniform over {0, ..., n-1}.
  int uniform_index(int n) {
    int k = static_cast<int>(uniform01() * n);
    return k < n ? k : n - 1;
  }

 private:
  static constexpr double pi = 3.14159265358979323846;
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::array<std::uint64_t, 4> state_{};
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace swsim
