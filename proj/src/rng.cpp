#include "codid/rng.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace codid {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

}  // namespace

PhiloxCounter philox4x32_10(PhiloxCounter c, PhiloxKey k) noexcept {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      k[0] += kWeyl0;
      k[1] += kWeyl1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, c[0], hi0, lo0);
    mulhilo(kMul1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
  return c;
}

CounterRng::CounterRng(std::uint64_t seed, Stream stream) noexcept
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      counter_{0, stream[0], stream[1], stream[2]} {}

CounterRng::result_type CounterRng::operator()() noexcept {
  if (used_ == 4) {
    block_ = philox4x32_10(counter_, key_);
    ++counter_[0];
    used_ = 0;
  }
  return block_[used_++];
}

double CounterRng::uniform01() noexcept {
  const std::uint64_t hi = (*this)();
  const std::uint64_t lo = (*this)();
  return static_cast<double>(((hi << 32) | lo) >> 11) * 0x1.0p-53;
}

std::vector<std::int64_t> sample_multinomial(std::int64_t n, const std::vector<double>& probs,
                                             CounterRng& rng) {
  std::vector<std::int64_t> out(probs.size(), 0);
  double remaining_mass = std::accumulate(probs.begin(), probs.end(), 0.0);
  std::int64_t remaining = n;
  for (std::size_t k = 0; k + 1 < probs.size() && remaining > 0; ++k) {
    const double p = remaining_mass > 0.0 ? std::clamp(probs[k] / remaining_mass, 0.0, 1.0) : 0.0;
    std::binomial_distribution<std::int64_t> draw(remaining, p);
    out[k] = draw(rng);
    remaining -= out[k];
    remaining_mass -= probs[k];
  }
  if (!probs.empty()) out.back() += remaining;
  return out;
}

}  // namespace codid
