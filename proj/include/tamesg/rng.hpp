#pragma once

// Counter-based random numbers (Philox4x32-10). A stream is addressed by
// (seed, stream id, counter), so draws are reproducible and independent
// streams never interfere with each other.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "tamesg/core.hpp"

namespace tamesg {

namespace philox {

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

inline Counter round(const Counter &c, const Key &k) {
  constexpr std::uint64_t m0 = 0xD2511F53u;
  constexpr std::uint64_t m1 = 0xCD9E8D57u;
  const std::uint64_t p0 = m0 * c[0];
  const std::uint64_t p1 = m1 * c[2];
  return {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0],
          static_cast<std::uint32_t>(p1),
          static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1],
          static_cast<std::uint32_t>(p0)};
}

/// Philox4x32 with 10 rounds.
inline Counter block(Counter c, Key k) {
  constexpr std::uint32_t w0 = 0x9E3779B9u;
  constexpr std::uint32_t w1 = 0xBB67AE85u;
  for (int r = 0; r < 10; ++r) {
    if (r > 0) {
      k[0] += w0;
      k[1] += w1;
    }
    c = round(c, k);
  }
  return c;
}

} // namespace philox

/// Well-known stream ids. Solver noise has its own stream so that changes
/// to solver logic never shift the noise sequence.
enum class Stream : std::uint32_t {
  noise = 1,
  init = 2,
  sampling = 3,
  verification = 4,
};

class CounterRng {
public:
  CounterRng(std::uint64_t seed, Stream stream)
      : CounterRng(seed, static_cast<std::uint32_t>(stream)) {}
  CounterRng(std::uint64_t seed, std::uint32_t stream)
      : key_{static_cast<std::uint32_t>(seed),
             static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream) {}

  std::uint64_t seed() const {
    return (static_cast<std::uint64_t>(key_[1]) << 32) | key_[0];
  }
  std::uint64_t blocks_consumed() const { return counter_; }

  std::uint32_t next_u32() {
    if (lane_ == 4) refill();
    return buffer_[lane_++];
  }

  std::uint64_t next_u64() {
    const std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in (0, 1].
  double uniform_open0() { return 1.0 - uniform(); }

  /// Standard normal via Box-Muller; second variate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform_open0()));
    const double theta = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  Point normal_vector(std::size_t dim) {
    Point v(static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = normal();
    return v;
  }

  Point uniform_box(const Point &lo, const Point &hi) {
    Point v(lo.size());
    for (Eigen::Index i = 0; i < v.size(); ++i)
      v[i] = lo[i] + (hi[i] - lo[i]) * uniform();
    return v;
  }

  /// Uniform in the Euclidean ball of given radius.
  Point uniform_ball(std::size_t dim, double radius) {
    Point dir = normal_vector(dim);
    const double n = dir.norm();
    if (n == 0.0) return Point::Zero(static_cast<Eigen::Index>(dim));
    const double r = radius * std::pow(uniform(), 1.0 / static_cast<double>(dim));
    return dir * (r / n);
  }

  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

private:
  void refill() {
    buffer_ = philox::block({static_cast<std::uint32_t>(counter_),
                             static_cast<std::uint32_t>(counter_ >> 32),
                             stream_, 0u},
                            key_);
    ++counter_;
    lane_ = 0;
  }

  philox::Key key_;
  std::uint32_t stream_;
  std::uint64_t counter_ = 0;
  philox::Counter buffer_{};
  int lane_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

} // namespace tamesg
