#include "rootconv/rng.hpp"

#include <cmath>

namespace rootconv {
namespace {

// SplitMix64 finalizer; full-period mixing of a 64-bit counter.
u64 mix64(u64 x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

u64 Rng::next_u64() {
  u64 word = mix64(seed_ ^ mix64(stream_ ^ mix64(counter_++)));
  return word;
}

double Rng::uniform() {
  // 53 random bits into [0, 1).
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

u64 Rng::uniform_below(u64 n) {
  if (n == 0) return 0;
  return next_u64() % n;
}

double Rng::normal() {
  double u1 = uniform();
  double u2 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace rootconv
