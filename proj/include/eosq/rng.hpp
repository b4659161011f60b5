#pragma once

#include <cmath>
#include <cstdint>

namespace eosq {

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Counter-based generator (SplitMix64). State advances by a fixed increment,
// so stream position n is a pure function of (seed, n); sub-streams are
// derived by hashing tags into fresh seeds. Output is identical across
// platforms and thread schedules.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix64(state_);
  }

  // Uniform in (0, 1], safe as a log() argument.
  double uniform() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

  // Standard normal via Box-Muller; avoids the implementation-defined
  // std::normal_distribution so streams are reproducible everywhere.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  double rademacher() { return (next_u64() >> 63) ? 1.0 : -1.0; }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Independent sub-stream roles hashed into a block's seed.
enum class StreamRole : std::uint64_t {
  kNoise = 1,
  kLeftVectors = 2,
  kRightVectors = 3,
  kRotation = 4,
  kProjection = 5,
  kQueries = 6,
  kBlock = 7,
};

inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t tag) {
  return mix64(seed ^ mix64(tag + 0x632BE59BD9B4E019ULL));
}

inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t block_index,
                                   StreamRole role) {
  return derive_stream(derive_stream(seed, block_index),
                       static_cast<std::uint64_t>(role));
}

}  // namespace eosq
