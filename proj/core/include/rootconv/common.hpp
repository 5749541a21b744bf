#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace rootconv {

using i64 = std::int64_t;
using u32 = std::uint32_t;
using u64 = std::uint64_t;

/// Operand shapes do not line up (bad inner dimension, channel mismatch, ...).
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A structurally invalid configuration (non-divisible groups, bad degree, ...).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed file content (bad magic, truncated payload, ...).
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline i64 conv_out_extent(i64 in, i64 kernel, i64 stride, i64 pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

/// Pooling output extent; `ceil_mode` rounds the window count up, with the
/// extra window clipped so it still starts inside the padded input.
inline i64 pool_out_extent(i64 in, i64 kernel, i64 stride, i64 pad, bool ceil_mode) {
  i64 out;
  if (ceil_mode) {
    out = (in + 2 * pad - kernel + stride - 1) / stride + 1;
  } else {
    out = (in + 2 * pad - kernel) / stride + 1;
  }
  if (ceil_mode && (out - 1) * stride >= in + pad) {
    --out;
  }
  return out;
}

}  // namespace rootconv
