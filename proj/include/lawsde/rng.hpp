#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace lawsde {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// Stateless: every output block is a pure function of (counter, key), so any
/// stream position can be computed independently on any thread.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter block(Counter ctr, Key key);
};

/// Well-known noise streams of a simulation.
enum class Stream : std::uint32_t {
  kDynamics = 0,
  kInitial = 1,
  kGirsanov = 2,
};

/// Standard normal variates keyed by (seed, stream, particle, step).
///
/// Draws for one key are a fixed sequence; `fill` writes the first
/// `out.size()` of them. Identical keys give bitwise-identical results.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed, Stream stream = Stream::kDynamics)
      : seed_(seed), stream_(stream) {}

  void fill(std::uint64_t particle, std::uint64_t step, std::span<double> out) const;

  /// Uniform variates in the open interval (0, 1) for the same key space.
  void fill_uniform(std::uint64_t particle, std::uint64_t step, std::span<double> out) const;

  std::uint64_t seed() const { return seed_; }
  Stream stream() const { return stream_; }

 private:
  Philox4x32::Counter counter(std::uint64_t particle, std::uint64_t step,
                              std::uint32_t block) const;
  Philox4x32::Key key() const;

  std::uint64_t seed_;
  Stream stream_;
};

}  // namespace lawsde
