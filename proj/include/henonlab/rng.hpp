#pragma once

#include <cstdint>

namespace henon {

/// Counter-based generator: the k-th draw of a stream depends only on
/// (seed, stream, k). Parallel consumers index draws directly instead of
/// sharing state, so results do not depend on scheduling.
class CounterRng {
 public:
  constexpr CounterRng(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {}

  std::uint64_t bits(std::uint64_t counter) const;
  /// Uniform in [0, 1).
  double uniform(std::uint64_t counter) const;
  /// Poisson(1) draw, used by the bootstrap.
  int poisson1(std::uint64_t counter) const;

  CounterRng split(std::uint64_t sub) const;

  /// Sequential adapter for code that just wants the next number.
  class Cursor;
  Cursor cursor() const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
};

class CounterRng::Cursor {
 public:
  explicit Cursor(const CounterRng& g) : g_(g) {}
  double uniform() { return g_.uniform(k_++); }
  std::uint64_t bits() { return g_.bits(k_++); }

 private:
  CounterRng g_;
  std::uint64_t k_ = 0;
};

inline CounterRng::Cursor CounterRng::cursor() const { return Cursor(*this); }

}  // namespace henon
