#pragma once

// Philox4x32-10 counter-based generator. A stream is addressed by a 64-bit
// key (the master seed) and three 32-bit stream words, so every
// (replicate, cell, attempt) triple owns an independent sequence that does
// not depend on evaluation order or thread count.

#include <array>
#include <cstdint>
#include <limits>
#include <vector>

namespace codid {

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32_10(PhiloxCounter counter, PhiloxKey key) noexcept;

class CounterRng {
 public:
  using result_type = std::uint32_t;
  using Stream = std::array<std::uint32_t, 3>;

  CounterRng(std::uint64_t seed, Stream stream) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }
  result_type operator()() noexcept;

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() noexcept;

 private:
  PhiloxKey key_;
  PhiloxCounter counter_;
  PhiloxCounter block_{};
  unsigned used_ = 4;
};

/// Multinomial(n, p) via sequential conditional binomials. `probs` need not
/// be normalized.
std::vector<std::int64_t> sample_multinomial(std::int64_t n, const std::vector<double>& probs,
                                             CounterRng& rng);

}  // namespace codid
