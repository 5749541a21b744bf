#pragma once

#include <cstdint>
#include <vector>

#include "rootconv/common.hpp"

namespace rootconv {

/// Counter-based random generator: the n-th draw is a pure function of
/// (seed, stream, n), so streams can be replayed or split without keeping
/// engine state, and the sequence is identical across platforms.
class Rng {
 public:
  explicit Rng(u64 seed, u64 stream = 0) : seed_(seed), stream_(stream) {}

  u64 next_u64();
  /// Uniform double in [0, 1).
  double uniform();
  /// Uniform integer in [0, n).
  u64 uniform_below(u64 n);
  /// Standard normal via Box-Muller on two fresh draws.
  double normal();

  bool coin() { return (next_u64() & 1u) != 0; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (u64 i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[uniform_below(i)]);
    }
  }

  u64 seed() const { return seed_; }
  u64 stream() const { return stream_; }
  u64 counter() const { return counter_; }
  void set_counter(u64 c) { counter_ = c; }

  /// Independent child stream, e.g. one per data-loading worker.
  Rng fork(u64 substream) const { return Rng(seed_, stream_ * 0x9e3779b9u + substream + 1); }

 private:
  u64 seed_;
  u64 stream_;
  u64 counter_ = 0;
};

}  // namespace rootconv
