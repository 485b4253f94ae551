#pragma once

#include <cstddef>
#include <cstdint>

namespace compopt {

/// Stream identifiers for CounterRng draws. Distinct streams never share a key.
enum class Stream : std::uint64_t {
  inner = 1,
  outer = 2,
  inner_extra = 3,
  data = 4,
  check = 5,
};

/// Counter-based generator: every draw is a pure function of
/// (seed, epoch, iteration, stream, slot), so draws are reproducible and
/// independent of evaluation order.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t bits(std::uint64_t epoch, std::uint64_t iteration, Stream stream,
                     std::uint64_t slot) const {
    std::uint64_t h = mix(seed_ ^ 0x6a09e667f3bcc909ULL);
    h = mix(h ^ epoch);
    h = mix(h ^ (iteration * 0xd1b54a32d192ed03ULL));
    h = mix(h ^ static_cast<std::uint64_t>(stream));
    return mix(h ^ (slot * 0xa0761d6478bd642fULL));
  }

  /// Uniform integer in [0, n). Lemire's multiply-shift with rejection; a
  /// rejected draw moves to a fresh sub-slot so the result stays keyed.
  std::size_t below(std::size_t n, std::uint64_t epoch, std::uint64_t iteration,
                    Stream stream, std::uint64_t slot) const {
    const auto bound = static_cast<std::uint64_t>(n);
    const std::uint64_t threshold = (0 - bound) % bound;
    for (std::uint64_t attempt = 0;; ++attempt) {
      const std::uint64_t x = bits(epoch, iteration, stream, (slot << 8) ^ attempt);
      const unsigned __int128 product = static_cast<unsigned __int128>(x) * bound;
      if (static_cast<std::uint64_t>(product) >= threshold) {
        return static_cast<std::size_t>(product >> 64);
      }
    }
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform(std::uint64_t epoch, std::uint64_t iteration, Stream stream,
                 std::uint64_t slot) const {
    return static_cast<double>(bits(epoch, iteration, stream, slot) >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t seed_;
};

}  // namespace compopt
