#pragma once

#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "rootconv/common.hpp"
#include "rootconv/tensor.hpp"

namespace rootconv {

/// Strided 2-D window into a tensor's backing array.
template <typename T>
struct MatViewT {
  T* base = nullptr;       // start of the backing array
  i64 length = 0;          // backing array length (for bounds checks)
  i64 offset = 0;
  i64 rows = 0;
  i64 cols = 0;
  i64 row_stride = 0;

  T* row(i64 i) const { return base + offset + i * row_stride; }
  T& at(i64 i, i64 j) const { return *(row(i) + j); }

  operator MatViewT<const T>() const
    requires(!std::is_const_v<T>)
  {
    return MatViewT<const T>{base, length, offset, rows, cols, row_stride};
  }

  void check(const char* what = "matview") const {
    if (rows < 0 || cols < 0 || offset < 0 ||
        (rows > 0 && offset + (rows - 1) * row_stride + cols > length)) {
      throw ShapeError(std::string(what) + ": view exceeds backing data");
    }
  }
};

using MatView = MatViewT<float>;
using ConstMatView = MatViewT<const float>;

template <typename T>
MatViewT<T> full_view(TensorT<T>& t, i64 rows, i64 cols) {
  return MatViewT<T>{t.data(), t.numel(), 0, rows, cols, cols};
}
template <typename T>
MatViewT<const T> full_view(const TensorT<T>& t, i64 rows, i64 cols) {
  return MatViewT<const T>{t.data(), t.numel(), 0, rows, cols, cols};
}

/// out = a * b (in k-ascending summation order), or out += a * b when
/// `accumulate` is set. The fixed order makes batched-vs-looped comparisons
/// exact.
template <typename T>
void gemm(MatViewT<const T> a, MatViewT<const T> b, MatViewT<T> out, bool accumulate = false);

/// out = a * b^T; a is MxK, b is NxK.
template <typename T>
void gemm_nt(MatViewT<const T> a, MatViewT<const T> b, MatViewT<T> out, bool accumulate = false);

/// out = a^T * b; a is KxM, b is KxN.
template <typename T>
void gemm_tn(MatViewT<const T> a, MatViewT<const T> b, MatViewT<T> out, bool accumulate = false);

template <typename T>
struct GemmJobT {
  MatViewT<const T> a;
  MatViewT<const T> b;
  MatViewT<T> out;
  bool accumulate = false;
};
using GemmJob = GemmJobT<float>;

/// Runs every job of the batch; results are bitwise identical to calling
/// gemm() in a loop. Jobs must have pairwise non-overlapping outputs.
template <typename T>
void gemm_batched(std::span<const GemmJobT<T>> jobs);

template <typename T>
void gemm_batched(const std::vector<GemmJobT<T>>& jobs) {
  gemm_batched(std::span<const GemmJobT<T>>(jobs.data(), jobs.size()));
}

/// Multiply-add accounting used by the cost-model equivalence checks. When
/// enabled, every GEMM kernel adds its exact M*N*K count.
void mac_counter_enable(bool on);
bool mac_counter_enabled();
void mac_counter_reset();
u64 mac_counter_value();

}  // namespace rootconv
