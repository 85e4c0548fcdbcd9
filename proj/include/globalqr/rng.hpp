#pragma once

// Counter-based random streams. Every stream is addressed by a 64-bit key and
// a 64-bit stream id, so draws for replicate i never depend on how many draws
// other replicates consumed or on which worker ran them.

#include <array>
#include <cstdint>
#include <limits>
#include <vector>

namespace gqr {

/// Philox4x32 with 10 rounds (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// SplitMix64 finaliser, used to combine seeds and indices into stream keys.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t combine_seed(std::uint64_t seed, std::uint64_t index) {
  return mix64(seed ^ mix64(index + 0x632BE59BD9B4E019ULL));
}

/// UniformRandomBitGenerator over one Philox stream.
class PhiloxStream {
 public:
  using result_type = std::uint32_t;

  PhiloxStream(std::uint64_t key, std::uint64_t stream) : key_(key), stream_(stream) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// 64 uniformly distributed bits.
  std::uint64_t next_u64();
  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, bound) without modulo bias.
  std::uint64_t below(std::uint64_t bound);

 private:
  std::uint64_t key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;
};

/// Uniformly random permutation of {0,...,n-1} (Fisher-Yates).
std::vector<std::size_t> random_permutation(std::size_t n, PhiloxStream& rng);

}  // namespace gqr
