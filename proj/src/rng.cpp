#include "lawsde/rng.hpp"

#include <cmath>
#include <numbers>

namespace lawsde {
namespace {

constexpr std::uint32_t kW32A = 0x9E3779B9;
constexpr std::uint32_t kW32B = 0xBB67AE85;
constexpr std::uint32_t kM4x32A = 0xD2511F53;
constexpr std::uint32_t kM4x32B = 0xCD9E8D57;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo, std::uint32_t& hi) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  lo = static_cast<std::uint32_t>(p);
  hi = static_cast<std::uint32_t>(p >> 32);
}

// 53-bit uniform strictly inside (0, 1).
inline double to_open_unit(std::uint32_t a, std::uint32_t b) {
  const std::uint64_t bits = (static_cast<std::uint64_t>(a) << 21) ^ (b >> 11);
  const std::uint64_t k = bits & ((std::uint64_t{1} << 53) - 1);
  return (static_cast<double>(k) + 0.5) * 0x1.0p-53;
}

}  // namespace

Philox4x32::Counter Philox4x32::block(Counter ctr, Key key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t lo0, hi0, lo1, hi1;
    mulhilo(kM4x32A, ctr[0], lo0, hi0);
    mulhilo(kM4x32B, ctr[2], lo1, hi1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kW32A;
    key[1] += kW32B;
  }
  return ctr;
}

Philox4x32::Counter GaussianStream::counter(std::uint64_t particle, std::uint64_t step,
                                            std::uint32_t block) const {
  // step is limited to 2^48 slices; the top 16 bits of word 1 carry the block.
  return {static_cast<std::uint32_t>(step),
          static_cast<std::uint32_t>((step >> 32) & 0xFFFF) | (block << 16),
          static_cast<std::uint32_t>(particle), static_cast<std::uint32_t>(particle >> 32)};
}

Philox4x32::Key GaussianStream::key() const {
  const auto s = static_cast<std::uint32_t>(stream_);
  return {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32) ^ (s * kW32B)};
}

void GaussianStream::fill_uniform(std::uint64_t particle, std::uint64_t step,
                                  std::span<double> out) const {
  std::uint32_t block = 0;
  for (std::size_t i = 0; i < out.size(); i += 2, ++block) {
    const auto r = Philox4x32::block(counter(particle, step, block), key());
    out[i] = to_open_unit(r[0], r[1]);
    if (i + 1 < out.size()) out[i + 1] = to_open_unit(r[2], r[3]);
  }
}

void GaussianStream::fill(std::uint64_t particle, std::uint64_t step, std::span<double> out) const {
  std::uint32_t block = 0;
  for (std::size_t i = 0; i < out.size(); i += 2, ++block) {
    const auto r = Philox4x32::block(counter(particle, step, block), key());
    const double u1 = to_open_unit(r[0], r[1]);
    const double u2 = to_open_unit(r[2], r[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    out[i] = radius * std::cos(angle);
    if (i + 1 < out.size()) out[i + 1] = radius * std::sin(angle);
  }
}

}  // namespace lawsde
