#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace histolens {

/// Lower-case hex SHA-256 of the bytes.
std::string sha256_hex(std::string_view bytes);

/// SplitMix64-seeded xoshiro256** generator. Used instead of std::mt19937 +
/// std::shuffle so seeded permutations are identical across standard libraries.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  std::uint64_t next();

  /// Uniform integer in [0, bound) by rejection sampling.
  std::uint64_t below(std::uint64_t bound);

 private:
  std::uint64_t s_[4];
};

/// Fisher-Yates permutation of [0, n) for a fixed seed.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

template <typename T>
void seeded_shuffle(std::vector<T>& items, std::uint64_t seed) {
  SeededRng rng(seed);
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

/// Stable 64-bit FNV-1a, used to derive per-item sub-seeds.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace histolens
