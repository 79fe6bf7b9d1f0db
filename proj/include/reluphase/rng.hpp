#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>

namespace reluphase {

// Deterministic random numbers with a pinned algorithm, so streams do not
// depend on the standard library implementation:
//   state    xoshiro256++, the four words seeded as mix64(seed + i*GOLDEN)
//   uniforms top 53 bits of each output word, scaled to [0, 1)
//   normals  Box-Muller over a uniform pair (u1 mapped to (0, 1] to keep the
//            log finite); cosine branch returned first, sine branch cached
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  double uniform53();  // [0, 1)
  double normal();     // N(0, 1)

 private:
  std::array<std::uint64_t, 4> state_{};
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

// 64-bit finalizer (splitmix64 style) used for seed derivation.
std::uint64_t mix64(std::uint64_t z);

// Order-sensitive combiner for per-run seeds: h = base, then for each word
// h = mix64((h + GOLDEN) ^ word). Appending words never changes the prefix
// derivation, so adding replicates keeps existing run seeds stable.
std::uint64_t mix_seed(std::uint64_t base, std::initializer_list<std::uint64_t> words);

}  // namespace reluphase
