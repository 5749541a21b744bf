#include "rootconv/matview.hpp"

#include <atomic>
#include <cstring>
#include <string>

#include "rootconv/threading.hpp"

namespace rootconv {
namespace {

std::atomic<bool> g_count_macs{false};
std::atomic<u64> g_macs{0};

void count_macs(i64 m, i64 n, i64 k) {
  if (g_count_macs.load(std::memory_order_relaxed)) {
    g_macs.fetch_add(static_cast<u64>(m) * n * k, std::memory_order_relaxed);
  }
}

template <typename T>
void check_nn(MatViewT<const T> a, MatViewT<const T> b, MatViewT<T> out, const char* name) {
  a.check(name);
  b.check(name);
  out.check(name);
  if (a.cols != b.rows || out.rows != a.rows || out.cols != b.cols) {
    throw ShapeError(std::string(name) + ": dimension mismatch " + std::to_string(a.rows) + "x" +
                     std::to_string(a.cols) + " * " + std::to_string(b.rows) + "x" +
                     std::to_string(b.cols) + " -> " + std::to_string(out.rows) + "x" +
                     std::to_string(out.cols));
  }
}

// Serial row-range kernel. Per output element the k loop ascends, so the
// summation order is the same as the naive i-j-k triple loop.
template <typename T>
void gemm_rows(MatViewT<const T> a, MatViewT<const T> b, MatViewT<T> out, bool accumulate,
               i64 row_begin, i64 row_end) {
  const i64 n = out.cols;
  const i64 k_extent = a.cols;
  for (i64 i = row_begin; i < row_end; ++i) {
    T* ci = out.row(i);
    if (!accumulate) {
      for (i64 j = 0; j < n; ++j) ci[j] = T(0);
    }
    const T* ai = a.row(i);
    for (i64 k = 0; k < k_extent; ++k) {
      const T aik = ai[k];
      const T* bk = b.row(k);
      for (i64 j = 0; j < n; ++j) ci[j] += aik * bk[j];
    }
  }
}

template <typename T>
void gemm_nt_rows(MatViewT<const T> a, MatViewT<const T> b, MatViewT<T> out, bool accumulate,
                  i64 row_begin, i64 row_end) {
  const i64 n = out.cols;
  const i64 k_extent = a.cols;
  for (i64 i = row_begin; i < row_end; ++i) {
    const T* ai = a.row(i);
    T* ci = out.row(i);
    for (i64 j = 0; j < n; ++j) {
      const T* bj = b.row(j);
      T acc = T(0);
      for (i64 k = 0; k < k_extent; ++k) acc += ai[k] * bj[k];
      ci[j] = accumulate ? ci[j] + acc : acc;
    }
  }
}

template <typename T>
void gemm_tn_rows(MatViewT<const T> a, MatViewT<const T> b, MatViewT<T> out, bool accumulate,
                  i64 row_begin, i64 row_end) {
  const i64 n = out.cols;
  const i64 k_extent = a.rows;
  for (i64 i = row_begin; i < row_end; ++i) {
    T* ci = out.row(i);
    if (!accumulate) {
      for (i64 j = 0; j < n; ++j) ci[j] = T(0);
    }
    for (i64 k = 0; k < k_extent; ++k) {
      const T aki = a.at(k, i);
      const T* bk = b.row(k);
      for (i64 j = 0; j < n; ++j) ci[j] += aki * bk[j];
    }
  }
}

}  // namespace

void mac_counter_enable(bool on) { g_count_macs.store(on); }
bool mac_counter_enabled() { return g_count_macs.load(); }
void mac_counter_reset() { g_macs.store(0); }
u64 mac_counter_value() { return g_macs.load(); }

template <typename T>
void gemm(MatViewT<const T> a, MatViewT<const T> b, MatViewT<T> out, bool accumulate) {
  check_nn(a, b, out, "gemm");
  count_macs(out.rows, out.cols, a.cols);
  const i64 m = out.rows;
  const i64 nthreads = threads();
  if (nthreads > 1 && m * out.cols * a.cols > (i64(1) << 15)) {
#pragma omp parallel for schedule(static) num_threads(nthreads)
    for (i64 i = 0; i < m; ++i) {
      gemm_rows(a, b, out, accumulate, i, i + 1);
    }
  } else {
    gemm_rows(a, b, out, accumulate, 0, m);
  }
}

template <typename T>
void gemm_nt(MatViewT<const T> a, MatViewT<const T> b, MatViewT<T> out, bool accumulate) {
  a.check("gemm_nt");
  b.check("gemm_nt");
  out.check("gemm_nt");
  if (a.cols != b.cols || out.rows != a.rows || out.cols != b.rows) {
    throw ShapeError("gemm_nt: dimension mismatch");
  }
  count_macs(out.rows, out.cols, a.cols);
  const i64 m = out.rows;
  const i64 nthreads = threads();
  if (nthreads > 1 && m * out.cols * a.cols > (i64(1) << 15)) {
#pragma omp parallel for schedule(static) num_threads(nthreads)
    for (i64 i = 0; i < m; ++i) {
      gemm_nt_rows(a, b, out, accumulate, i, i + 1);
    }
  } else {
    gemm_nt_rows(a, b, out, accumulate, 0, m);
  }
}

template <typename T>
void gemm_tn(MatViewT<const T> a, MatViewT<const T> b, MatViewT<T> out, bool accumulate) {
  a.check("gemm_tn");
  b.check("gemm_tn");
  out.check("gemm_tn");
  if (a.rows != b.rows || out.rows != a.cols || out.cols != b.cols) {
    throw ShapeError("gemm_tn: dimension mismatch");
  }
  count_macs(out.rows, out.cols, a.rows);
  const i64 m = out.rows;
  const i64 nthreads = threads();
  if (nthreads > 1 && m * out.cols * a.rows > (i64(1) << 15)) {
#pragma omp parallel for schedule(static) num_threads(nthreads)
    for (i64 i = 0; i < m; ++i) {
      gemm_tn_rows(a, b, out, accumulate, i, i + 1);
    }
  } else {
    gemm_tn_rows(a, b, out, accumulate, 0, m);
  }
}

template <typename T>
void gemm_batched(std::span<const GemmJobT<T>> jobs) {
  for (size_t idx = 0; idx < jobs.size(); ++idx) {
    const auto& j = jobs[idx];
    try {
      check_nn<T>(j.a, j.b, j.out, "gemm_batched");
    } catch (const ShapeError& e) {
      throw ShapeError("batch entry " + std::to_string(idx) + ": " + e.what());
    }
  }
  if (jobs.size() == 1) {
    gemm(jobs[0].a, jobs[0].b, jobs[0].out, jobs[0].accumulate);
    return;
  }
  for (const auto& j : jobs) count_macs(j.out.rows, j.out.cols, j.a.cols);
  const i64 count = static_cast<i64>(jobs.size());
  const i64 nthreads = threads();
#pragma omp parallel for schedule(static) num_threads(nthreads) if (nthreads > 1)
  for (i64 idx = 0; idx < count; ++idx) {
    const auto& j = jobs[idx];
    gemm_rows(j.a, j.b, j.out, j.accumulate, 0, j.out.rows);
  }
}

template void gemm<float>(MatViewT<const float>, MatViewT<const float>, MatViewT<float>, bool);
template void gemm<double>(MatViewT<const double>, MatViewT<const double>, MatViewT<double>, bool);
template void gemm_nt<float>(MatViewT<const float>, MatViewT<const float>, MatViewT<float>, bool);
template void gemm_nt<double>(MatViewT<const double>, MatViewT<const double>, MatViewT<double>,
                              bool);
template void gemm_tn<float>(MatViewT<const float>, MatViewT<const float>, MatViewT<float>, bool);
template void gemm_tn<double>(MatViewT<const double>, MatViewT<const double>, MatViewT<double>,
                              bool);
template void gemm_batched<float>(std::span<const GemmJobT<float>>);
template void gemm_batched<double>(std::span<const GemmJobT<double>>);

}  // namespace rootconv
