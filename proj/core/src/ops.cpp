#include "rootconv/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "rootconv/threading.hpp"

namespace rootconv {

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

namespace {

template <typename T>
void require_same_shape(const TensorT<T>& a, const TensorT<T>& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + a.shape().str() + " vs " +
                     b.shape().str());
  }
}

}  // namespace

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  require_same_shape(a, b, "add");
  TensorT<T> out(a.shape());
  for (i64 i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
  return out;
}

template <typename T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
  require_same_shape(a, b, "sub");
  TensorT<T> out(a.shape());
  for (i64 i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] - b.data()[i];
  return out;
}

template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
  require_same_shape(a, b, "mul");
  TensorT<T> out(a.shape());
  for (i64 i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
  return out;
}

template <typename T>
TensorT<T> scale(const TensorT<T>& a, T s) {
  TensorT<T> out(a.shape());
  for (i64 i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] * s;
  return out;
}

template <typename T>
TensorT<T> relu(const TensorT<T>& x) {
  TensorT<T> out(x.shape());
  for (i64 i = 0; i < x.numel(); ++i) out.data()[i] = x.data()[i] > T(0) ? x.data()[i] : T(0);
  return out;
}

template <typename T>
TensorT<T> relu_grad(const TensorT<T>& x, const TensorT<T>& gy) {
  require_same_shape(x, gy, "relu_grad");
  TensorT<T> out(x.shape());
  for (i64 i = 0; i < x.numel(); ++i) out.data()[i] = x.data()[i] > T(0) ? gy.data()[i] : T(0);
  return out;
}

// ---------------------------------------------------------------------------
// im2col / col2im
// ---------------------------------------------------------------------------

namespace {

struct ConvDims {
  i64 n, c1, h, w;
  i64 ho, wo;
  i64 patch;  // Ho*Wo
};

ConvDims conv_dims(const Shape& x, i64 kh, i64 kw, i64 stride, i64 pad) {
  ConvDims d;
  d.n = x.n();
  d.c1 = x.c();
  d.h = x.h();
  d.w = x.w();
  d.ho = conv_out_extent(x.h(), kh, stride, pad);
  d.wo = conv_out_extent(x.w(), kw, stride, pad);
  if (d.ho < 1 || d.wo < 1) {
    throw ShapeError("conv/im2col: empty output extent for input " + x.str() + " kernel " +
                     std::to_string(kh) + "x" + std::to_string(kw));
  }
  d.patch = d.ho * d.wo;
  return d;
}

// Unrolls channels [c_begin, c_end) of sample n into `col`, laid out as
// (c_slice*kh*kw) rows of Ho*Wo pixels, channel-major rows.
template <typename T>
void im2col_fill(const TensorT<T>& x, i64 n, i64 c_begin, i64 c_end, i64 kh, i64 kw, i64 stride,
                 i64 pad, const ConvDims& d, T* col) {
  const i64 hw = d.h * d.w;
  for (i64 c = c_begin; c < c_end; ++c) {
    const T* plane = x.data() + (n * d.c1 + c) * hw;
    for (i64 ki = 0; ki < kh; ++ki) {
      for (i64 kj = 0; kj < kw; ++kj) {
        T* row = col + (((c - c_begin) * kh + ki) * kw + kj) * d.patch;
        for (i64 oh = 0; oh < d.ho; ++oh) {
          const i64 ih = oh * stride - pad + ki;
          T* dst = row + oh * d.wo;
          if (ih < 0 || ih >= d.h) {
            for (i64 ow = 0; ow < d.wo; ++ow) dst[ow] = T(0);
            continue;
          }
          const T* src = plane + ih * d.w;
          for (i64 ow = 0; ow < d.wo; ++ow) {
            const i64 iw = ow * stride - pad + kj;
            dst[ow] = (iw >= 0 && iw < d.w) ? src[iw] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(T* gx_plane_base, i64 c_count, i64 kh, i64 kw, i64 stride, i64 pad,
                const ConvDims& d, const T* col) {
  const i64 hw = d.h * d.w;
  for (i64 c = 0; c < c_count; ++c) {
    T* plane = gx_plane_base + c * hw;
    for (i64 ki = 0; ki < kh; ++ki) {
      for (i64 kj = 0; kj < kw; ++kj) {
        const T* row = col + ((c * kh + ki) * kw + kj) * d.patch;
        for (i64 oh = 0; oh < d.ho; ++oh) {
          const i64 ih = oh * stride - pad + ki;
          if (ih < 0 || ih >= d.h) continue;
          T* dst = plane + ih * d.w;
          const T* src = row + oh * d.wo;
          for (i64 ow = 0; ow < d.wo; ++ow) {
            const i64 iw = ow * stride - pad + kj;
            if (iw >= 0 && iw < d.w) dst[iw] += src[ow];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
TensorT<T> im2col(const TensorT<T>& x, i64 n, i64 c_begin, i64 c_end, i64 kh, i64 kw, i64 stride,
                  i64 pad) {
  if (n < 0 || n >= x.shape().n() || c_begin < 0 || c_end > x.shape().c() || c_begin >= c_end) {
    throw ShapeError("im2col: sample/channel slice out of range");
  }
  ConvDims d = conv_dims(x.shape(), kh, kw, stride, pad);
  const i64 rows = (c_end - c_begin) * kh * kw;
  TensorT<T> col(Shape(1, 1, rows, d.patch));
  im2col_fill(x, n, c_begin, c_end, kh, kw, stride, pad, d, col.data());
  return col;
}

// ---------------------------------------------------------------------------
// Grouped convolution
// ---------------------------------------------------------------------------

namespace {

template <typename T>
void validate_conv(const TensorT<T>& x, const ConvWeightsT<T>& w) {
  const i64 g = w.groups;
  if (g < 1) throw ConfigError("conv: groups must be >= 1");
  const i64 c1 = x.shape().c();
  const i64 c2 = w.out_channels();
  if (c1 % g != 0 || c2 % g != 0) {
    throw ConfigError("conv: channels not divisible by groups (c1=" + std::to_string(c1) +
                      ", c2=" + std::to_string(c2) + ", g=" + std::to_string(g) + ")");
  }
  if (w.filters.shape().c() != c1 / g) {
    throw ShapeError("conv: filter channel extent " + std::to_string(w.filters.shape().c()) +
                     " != c1/g = " + std::to_string(c1 / g));
  }
  if (!w.bias.empty() && static_cast<i64>(w.bias.size()) != c2) {
    throw ShapeError("conv: bias length != out channels");
  }
}

// Samples per im2col chunk, bounded so the unrolled buffer stays modest.
i64 conv_chunk(i64 n, i64 per_sample_elems) {
  const i64 budget = (i64(1) << 24);  // 16M elements
  i64 chunk = std::max<i64>(1, budget / std::max<i64>(1, per_sample_elems));
  return std::min(n, chunk);
}

}  // namespace

template <typename T>
TensorT<T> conv_forward(const TensorT<T>& x, const ConvWeightsT<T>& w, i64 stride, i64 pad) {
  validate_conv(x, w);
  const i64 g = w.groups;
  const i64 c1 = x.shape().c();
  const i64 c2 = w.out_channels();
  const i64 c1g = c1 / g;
  const i64 c2g = c2 / g;
  const i64 kh = w.kh();
  const i64 kw = w.kw();
  ConvDims d = conv_dims(x.shape(), kh, kw, stride, pad);
  const i64 kdim = c1g * kh * kw;

  TensorT<T> y(Shape(d.n, c2, d.ho, d.wo));
  // 1x1/stride-1/pad-0 layers skip the unrolling: the input planes already
  // are the column matrices.
  const bool pointwise = (kh == 1 && kw == 1 && stride == 1 && pad == 0);

  if (pointwise) {
    std::vector<GemmJobT<T>> jobs;
    jobs.reserve(d.n * g);
    for (i64 n = 0; n < d.n; ++n) {
      for (i64 grp = 0; grp < g; ++grp) {
        MatViewT<const T> a{w.filters.data(), w.filters.numel(), grp * c2g * kdim, c2g, kdim, kdim};
        MatViewT<const T> b{x.data(), x.numel(), (n * c1 + grp * c1g) * d.patch, c1g, d.patch,
                            d.patch};
        MatViewT<T> out{y.data(), y.numel(), (n * c2 + grp * c2g) * d.patch, c2g, d.patch, d.patch};
        jobs.push_back({a, b, out, false});
      }
    }
    gemm_batched<T>(jobs);
  } else {
    const i64 per_sample = c1 * kh * kw * d.patch;
    const i64 chunk = conv_chunk(d.n, per_sample);
    TensorT<T> col(Shape(chunk, 1, c1 * kh * kw, d.patch));
    for (i64 n0 = 0; n0 < d.n; n0 += chunk) {
      const i64 nc = std::min(chunk, d.n - n0);
      const int nthreads = threads();
#pragma omp parallel for schedule(static) num_threads(nthreads) if (nthreads > 1 && nc > 1)
      for (i64 i = 0; i < nc; ++i) {
        im2col_fill(x, n0 + i, 0, c1, kh, kw, stride, pad, d, col.data() + i * per_sample);
      }
      std::vector<GemmJobT<T>> jobs;
      jobs.reserve(nc * g);
      for (i64 i = 0; i < nc; ++i) {
        for (i64 grp = 0; grp < g; ++grp) {
          MatViewT<const T> a{w.filters.data(), w.filters.numel(), grp * c2g * kdim, c2g, kdim,
                              kdim};
          MatViewT<const T> b{col.data(), col.numel(), i * per_sample + grp * kdim * d.patch, kdim,
                              d.patch, d.patch};
          MatViewT<T> out{y.data(), y.numel(), ((n0 + i) * c2 + grp * c2g) * d.patch, c2g, d.patch,
                          d.patch};
          jobs.push_back({a, b, out, false});
        }
      }
      gemm_batched<T>(jobs);
    }
  }

  if (!w.bias.empty()) {
    for (i64 n = 0; n < d.n; ++n) {
      for (i64 c = 0; c < c2; ++c) {
        T* plane = y.data() + (n * c2 + c) * d.patch;
        const T b = w.bias[c];
        for (i64 p = 0; p < d.patch; ++p) plane[p] += b;
      }
    }
  }
  return y;
}

template <typename T>
ConvGradsT<T> conv_backward(const TensorT<T>& x, const ConvWeightsT<T>& w, i64 stride, i64 pad,
                            const TensorT<T>& gy, bool need_gx) {
  validate_conv(x, w);
  const i64 g = w.groups;
  const i64 c1 = x.shape().c();
  const i64 c2 = w.out_channels();
  const i64 c1g = c1 / g;
  const i64 c2g = c2 / g;
  const i64 kh = w.kh();
  const i64 kw = w.kw();
  ConvDims d = conv_dims(x.shape(), kh, kw, stride, pad);
  const i64 kdim = c1g * kh * kw;
  if (gy.shape() != Shape(d.n, c2, d.ho, d.wo)) {
    throw ShapeError("conv_backward: grad shape " + gy.shape().str() + " != " +
                     Shape(d.n, c2, d.ho, d.wo).str());
  }

  ConvGradsT<T> grads;
  grads.gw = TensorT<T>(w.filters.shape());
  if (!w.bias.empty()) grads.gbias.assign(c2, T(0));
  const bool pointwise = (kh == 1 && kw == 1 && stride == 1 && pad == 0);
  const int nthreads = threads();

  // grad_w: per group, accumulate over samples in fixed order.
  if (pointwise) {
#pragma omp parallel for schedule(static) num_threads(nthreads) if (nthreads > 1 && g > 1)
    for (i64 grp = 0; grp < g; ++grp) {
      MatViewT<T> gw{grads.gw.data(), grads.gw.numel(), grp * c2g * kdim, c2g, kdim, kdim};
      for (i64 n = 0; n < d.n; ++n) {
        MatViewT<const T> gyv{gy.data(), gy.numel(), (n * c2 + grp * c2g) * d.patch, c2g, d.patch,
                              d.patch};
        MatViewT<const T> xv{x.data(), x.numel(), (n * c1 + grp * c1g) * d.patch, c1g, d.patch,
                             d.patch};
        gemm_nt<T>(gyv, xv, gw, n > 0);
      }
    }
  } else {
    const i64 per_sample = c1 * kh * kw * d.patch;
    const i64 chunk = conv_chunk(d.n, per_sample);
    TensorT<T> col(Shape(chunk, 1, c1 * kh * kw, d.patch));
    bool first = true;
    for (i64 n0 = 0; n0 < d.n; n0 += chunk) {
      const i64 nc = std::min(chunk, d.n - n0);
#pragma omp parallel for schedule(static) num_threads(nthreads) if (nthreads > 1 && nc > 1)
      for (i64 i = 0; i < nc; ++i) {
        im2col_fill(x, n0 + i, 0, c1, kh, kw, stride, pad, d, col.data() + i * per_sample);
      }
#pragma omp parallel for schedule(static) num_threads(nthreads) if (nthreads > 1 && g > 1)
      for (i64 grp = 0; grp < g; ++grp) {
        MatViewT<T> gw{grads.gw.data(), grads.gw.numel(), grp * c2g * kdim, c2g, kdim, kdim};
        for (i64 i = 0; i < nc; ++i) {
          MatViewT<const T> gyv{gy.data(), gy.numel(), ((n0 + i) * c2 + grp * c2g) * d.patch, c2g,
                                d.patch, d.patch};
          MatViewT<const T> colv{col.data(), col.numel(), i * per_sample + grp * kdim * d.patch,
                                 kdim, d.patch, d.patch};
          gemm_nt<T>(gyv, colv, gw, !first || i > 0);
        }
      }
      first = false;
    }
  }

  if (!w.bias.empty()) {
    for (i64 n = 0; n < d.n; ++n) {
      for (i64 c = 0; c < c2; ++c) {
        const T* plane = gy.data() + (n * c2 + c) * d.patch;
        T acc = T(0);
        for (i64 p = 0; p < d.patch; ++p) acc += plane[p];
        grads.gbias[c] += acc;
      }
    }
  }

  if (!need_gx) {
    grads.gx = TensorT<T>(Shape(1, 1, 1, 1));
    return grads;
  }

  grads.gx = TensorT<T>(x.shape());
  if (pointwise) {
    for (i64 n = 0; n < d.n; ++n) {
      for (i64 grp = 0; grp < g; ++grp) {
        MatViewT<const T> wv{w.filters.data(), w.filters.numel(), grp * c2g * kdim, c2g, kdim,
                             kdim};
        MatViewT<const T> gyv{gy.data(), gy.numel(), (n * c2 + grp * c2g) * d.patch, c2g, d.patch,
                              d.patch};
        MatViewT<T> gxv{grads.gx.data(), grads.gx.numel(), (n * c1 + grp * c1g) * d.patch, c1g,
                        d.patch, d.patch};
        // gx_slice = W^T * gy_slice
        gemm_tn<T>(wv, gyv, gxv, false);
      }
    }
  } else {
    const i64 total = d.n * g;
#pragma omp parallel num_threads(nthreads) if (nthreads > 1 && total > 1)
    {
      std::vector<T> colgrad(static_cast<size_t>(kdim) * d.patch);
#pragma omp for schedule(static)
      for (i64 job = 0; job < total; ++job) {
        const i64 n = job / g;
        const i64 grp = job % g;
        MatViewT<const T> wv{w.filters.data(), w.filters.numel(), grp * c2g * kdim, c2g, kdim,
                             kdim};
        MatViewT<const T> gyv{gy.data(), gy.numel(), (n * c2 + grp * c2g) * d.patch, c2g, d.patch,
                              d.patch};
        MatViewT<T> cg{colgrad.data(), static_cast<i64>(colgrad.size()), 0, kdim, d.patch, d.patch};
        gemm_tn<T>(wv, gyv, cg, false);
        col2im_add(grads.gx.data() + (n * c1 + grp * c1g) * d.h * d.w, c1g, kh, kw, stride, pad, d,
                   colgrad.data());
      }
    }
  }
  return grads;
}

template <typename T>
ConvWeightsT<T> embed_block_diag(const ConvWeightsT<T>& w) {
  const i64 g = w.groups;
  const i64 c2 = w.out_channels();
  const i64 c1 = w.in_channels();
  const i64 c1g = c1 / g;
  const i64 c2g = c2 / g;
  ConvWeightsT<T> full;
  full.groups = 1;
  full.bias = w.bias;
  full.filters = TensorT<T>(Shape(c2, c1, w.kh(), w.kw()));
  for (i64 o = 0; o < c2; ++o) {
    const i64 grp = o / c2g;
    for (i64 c = 0; c < c1g; ++c) {
      for (i64 i = 0; i < w.kh(); ++i) {
        for (i64 j = 0; j < w.kw(); ++j) {
          full.filters.at(o, grp * c1g + c, i, j) = w.filters.at(o, c, i, j);
        }
      }
    }
  }
  return full;
}

// ---------------------------------------------------------------------------
// Pooling
// ---------------------------------------------------------------------------

namespace {

struct PoolDims {
  i64 kh, kw, stride, pad;
  i64 ho, wo;
};

PoolDims pool_dims(const Shape& x, const PoolGeom& g) {
  PoolDims d;
  if (g.global) {
    d.kh = x.h();
    d.kw = x.w();
    d.stride = 1;
    d.pad = 0;
  } else {
    d.kh = g.kh;
    d.kw = g.kw;
    d.stride = g.stride;
    d.pad = g.pad;
  }
  d.ho = pool_out_extent(x.h(), d.kh, d.stride, d.pad, g.ceil_mode);
  d.wo = pool_out_extent(x.w(), d.kw, d.stride, d.pad, g.ceil_mode);
  if (d.ho < 1 || d.wo < 1) {
    throw ShapeError("pool: empty output extent for input " + x.str());
  }
  return d;
}

}  // namespace

template <typename T>
TensorT<T> pool_forward(const TensorT<T>& x, const PoolGeom& g) {
  PoolDims d = pool_dims(x.shape(), g);
  const i64 n = x.shape().n(), c = x.shape().c(), h = x.shape().h(), w = x.shape().w();
  TensorT<T> y(Shape(n, c, d.ho, d.wo));
  const i64 planes = n * c;
  const int nthreads = threads();
#pragma omp parallel for schedule(static) num_threads(nthreads) if (nthreads > 1 && planes > 1)
  for (i64 pl = 0; pl < planes; ++pl) {
    const T* in = x.data() + pl * h * w;
    T* out = y.data() + pl * d.ho * d.wo;
    for (i64 oh = 0; oh < d.ho; ++oh) {
      for (i64 ow = 0; ow < d.wo; ++ow) {
        const i64 hs = oh * d.stride - d.pad;
        const i64 ws = ow * d.stride - d.pad;
        const i64 he = std::min(hs + d.kh, h + d.pad);
        const i64 we = std::min(ws + d.kw, w + d.pad);
        const i64 h0 = std::max<i64>(hs, 0), h1 = std::min(he, h);
        const i64 w0 = std::max<i64>(ws, 0), w1 = std::min(we, w);
        if (g.op == PoolOp::kMax) {
          T best = -std::numeric_limits<T>::infinity();
          for (i64 ih = h0; ih < h1; ++ih) {
            for (i64 iw = w0; iw < w1; ++iw) best = std::max(best, in[ih * w + iw]);
          }
          out[oh * d.wo + ow] = (h1 > h0 && w1 > w0) ? best : T(0);
        } else {
          T acc = T(0);
          for (i64 ih = h0; ih < h1; ++ih) {
            for (i64 iw = w0; iw < w1; ++iw) acc += in[ih * w + iw];
          }
          const i64 divisor = g.count_exclude_pad ? std::max<i64>((h1 - h0) * (w1 - w0), 1)
                                                  : std::max<i64>((he - hs) * (we - ws), 1);
          out[oh * d.wo + ow] = acc / static_cast<T>(divisor);
        }
      }
    }
  }
  return y;
}

template <typename T>
TensorT<T> pool_backward(const TensorT<T>& x, const PoolGeom& g, const TensorT<T>& gy) {
  PoolDims d = pool_dims(x.shape(), g);
  const i64 n = x.shape().n(), c = x.shape().c(), h = x.shape().h(), w = x.shape().w();
  if (gy.shape() != Shape(n, c, d.ho, d.wo)) {
    throw ShapeError("pool_backward: grad shape mismatch");
  }
  TensorT<T> gx(x.shape());
  const i64 planes = n * c;
  const int nthreads = threads();
#pragma omp parallel for schedule(static) num_threads(nthreads) if (nthreads > 1 && planes > 1)
  for (i64 pl = 0; pl < planes; ++pl) {
    const T* in = x.data() + pl * h * w;
    const T* gout = gy.data() + pl * d.ho * d.wo;
    T* gin = gx.data() + pl * h * w;
    for (i64 oh = 0; oh < d.ho; ++oh) {
      for (i64 ow = 0; ow < d.wo; ++ow) {
        const i64 hs = oh * d.stride - d.pad;
        const i64 ws = ow * d.stride - d.pad;
        const i64 he = std::min(hs + d.kh, h + d.pad);
        const i64 we = std::min(ws + d.kw, w + d.pad);
        const i64 h0 = std::max<i64>(hs, 0), h1 = std::min(he, h);
        const i64 w0 = std::max<i64>(ws, 0), w1 = std::min(we, w);
        const T go = gout[oh * d.wo + ow];
        if (g.op == PoolOp::kMax) {
          // Gradient goes to the first maximal cell in scan order.
          i64 bi = -1, bj = -1;
          T best = -std::numeric_limits<T>::infinity();
          for (i64 ih = h0; ih < h1; ++ih) {
            for (i64 iw = w0; iw < w1; ++iw) {
              if (in[ih * w + iw] > best) {
                best = in[ih * w + iw];
                bi = ih;
                bj = iw;
              }
            }
          }
          if (bi >= 0) gin[bi * w + bj] += go;
        } else {
          const i64 divisor = g.count_exclude_pad ? std::max<i64>((h1 - h0) * (w1 - w0), 1)
                                                  : std::max<i64>((he - hs) * (we - ws), 1);
          const T share = go / static_cast<T>(divisor);
          for (i64 ih = h0; ih < h1; ++ih) {
            for (i64 iw = w0; iw < w1; ++iw) gin[ih * w + iw] += share;
          }
        }
      }
    }
  }
  return gx;
}

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> batchnorm_forward(const TensorT<T>& x, BatchNormStateT<T>& st, bool training,
                             BatchNormCacheT<T>* cache) {
  const i64 n = x.shape().n(), c = x.shape().c(), hw = x.shape().h() * x.shape().w();
  if (c != st.channels()) {
    throw ShapeError("batchnorm: channel extent " + std::to_string(c) + " != state channels " +
                     std::to_string(st.channels()));
  }
  TensorT<T> y(x.shape());
  const i64 m = n * hw;
  std::vector<T> mean(c), inv_std(c);
  if (training) {
    for (i64 ch = 0; ch < c; ++ch) {
      T acc = T(0);
      for (i64 b = 0; b < n; ++b) {
        const T* plane = x.data() + (b * c + ch) * hw;
        for (i64 p = 0; p < hw; ++p) acc += plane[p];
      }
      const T mu = acc / static_cast<T>(m);
      T var = T(0);
      for (i64 b = 0; b < n; ++b) {
        const T* plane = x.data() + (b * c + ch) * hw;
        for (i64 p = 0; p < hw; ++p) {
          const T dlt = plane[p] - mu;
          var += dlt * dlt;
        }
      }
      var /= static_cast<T>(m);
      mean[ch] = mu;
      inv_std[ch] = T(1) / std::sqrt(var + st.eps);
      st.running_mean[ch] = st.momentum * st.running_mean[ch] + (T(1) - st.momentum) * mu;
      st.running_var[ch] = st.momentum * st.running_var[ch] + (T(1) - st.momentum) * var;
    }
  } else {
    for (i64 ch = 0; ch < c; ++ch) {
      mean[ch] = st.running_mean[ch];
      inv_std[ch] = T(1) / std::sqrt(st.running_var[ch] + st.eps);
    }
  }
  for (i64 b = 0; b < n; ++b) {
    for (i64 ch = 0; ch < c; ++ch) {
      const T* in = x.data() + (b * c + ch) * hw;
      T* out = y.data() + (b * c + ch) * hw;
      const T gm = st.affine ? st.gamma[ch] : T(1);
      const T bt = st.affine ? st.beta[ch] : T(0);
      const T a = gm * inv_std[ch];
      const T o = bt - a * mean[ch];
      for (i64 p = 0; p < hw; ++p) out[p] = a * in[p] + o;
    }
  }
  if (cache) {
    cache->mean = std::move(mean);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

template <typename T>
BatchNormGradsT<T> batchnorm_backward(const TensorT<T>& x, const BatchNormStateT<T>& st,
                                      const BatchNormCacheT<T>& cache, const TensorT<T>& gy) {
  require_same_shape(x, gy, "batchnorm_backward");
  const i64 n = x.shape().n(), c = x.shape().c(), hw = x.shape().h() * x.shape().w();
  const i64 m = n * hw;
  BatchNormGradsT<T> g;
  g.gx = TensorT<T>(x.shape());
  g.ggamma.assign(c, T(0));
  g.gbeta.assign(c, T(0));
  for (i64 ch = 0; ch < c; ++ch) {
    const T mu = cache.mean[ch];
    const T is = cache.inv_std[ch];
    T sum_gy = T(0), sum_gy_xhat = T(0);
    for (i64 b = 0; b < n; ++b) {
      const T* in = x.data() + (b * c + ch) * hw;
      const T* go = gy.data() + (b * c + ch) * hw;
      for (i64 p = 0; p < hw; ++p) {
        sum_gy += go[p];
        sum_gy_xhat += go[p] * (in[p] - mu) * is;
      }
    }
    g.gbeta[ch] = sum_gy;
    g.ggamma[ch] = sum_gy_xhat;
    const T gm = st.affine ? st.gamma[ch] : T(1);
    const T k1 = sum_gy / static_cast<T>(m);
    const T k2 = sum_gy_xhat / static_cast<T>(m);
    for (i64 b = 0; b < n; ++b) {
      const T* in = x.data() + (b * c + ch) * hw;
      const T* go = gy.data() + (b * c + ch) * hw;
      T* gi = g.gx.data() + (b * c + ch) * hw;
      for (i64 p = 0; p < hw; ++p) {
        const T xhat = (in[p] - mu) * is;
        gi[p] = gm * is * (go[p] - k1 - xhat * k2);
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Linear + loss
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> linear_forward(const TensorT<T>& x, const TensorT<T>& w, const std::vector<T>& bias) {
  const i64 n = x.shape().n();
  const i64 in = x.shape().c() * x.shape().h() * x.shape().w();
  const i64 out = w.shape().n();
  if (w.shape().c() * w.shape().h() * w.shape().w() != in) {
    throw ShapeError("linear: weight in-dim " + std::to_string(w.shape().c()) +
                     " != flattened input " + std::to_string(in));
  }
  if (!bias.empty() && static_cast<i64>(bias.size()) != out) {
    throw ShapeError("linear: bias length != out features");
  }
  TensorT<T> y(Shape(n, out, 1, 1));
  MatViewT<const T> xv = full_view(x, n, in);
  MatViewT<const T> wv = full_view(w, out, in);
  MatViewT<T> yv = full_view(y, n, out);
  gemm_nt<T>(xv, wv, yv, false);
  if (!bias.empty()) {
    for (i64 b = 0; b < n; ++b) {
      for (i64 o = 0; o < out; ++o) y.data()[b * out + o] += bias[o];
    }
  }
  return y;
}

template <typename T>
LinearGradsT<T> linear_backward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& gy) {
  const i64 n = x.shape().n();
  const i64 in = x.shape().c() * x.shape().h() * x.shape().w();
  const i64 out = w.shape().n();
  if (gy.shape().n() != n || gy.shape().c() != out) {
    throw ShapeError("linear_backward: grad shape mismatch");
  }
  LinearGradsT<T> g;
  g.gx = TensorT<T>(x.shape());
  g.gw = TensorT<T>(w.shape());
  g.gbias.assign(out, T(0));
  MatViewT<const T> xv = full_view(x, n, in);
  MatViewT<const T> wv = full_view(w, out, in);
  MatViewT<const T> gyv = full_view(gy, n, out);
  MatViewT<T> gxv = full_view(g.gx, n, in);
  MatViewT<T> gwv = full_view(g.gw, out, in);
  gemm<T>(gyv, wv, gxv, false);      // gx = gy * W
  gemm_tn<T>(gyv, xv, gwv, false);   // gW = gy^T * x
  for (i64 b = 0; b < n; ++b) {
    for (i64 o = 0; o < out; ++o) g.gbias[o] += gy.data()[b * out + o];
  }
  return g;
}

template <typename T>
TensorT<T> softmax(const TensorT<T>& logits) {
  const i64 n = logits.shape().n(), c = logits.shape().c();
  const i64 hw = logits.shape().h() * logits.shape().w();
  TensorT<T> out(logits.shape());
  for (i64 b = 0; b < n; ++b) {
    for (i64 p = 0; p < hw; ++p) {
      T mx = -std::numeric_limits<T>::infinity();
      for (i64 ch = 0; ch < c; ++ch) mx = std::max(mx, logits.data()[(b * c + ch) * hw + p]);
      T z = T(0);
      for (i64 ch = 0; ch < c; ++ch) {
        const T e = std::exp(logits.data()[(b * c + ch) * hw + p] - mx);
        out.data()[(b * c + ch) * hw + p] = e;
        z += e;
      }
      for (i64 ch = 0; ch < c; ++ch) out.data()[(b * c + ch) * hw + p] /= z;
    }
  }
  return out;
}

template <typename T>
LossResultT<T> softmax_cross_entropy(const TensorT<T>& logits, const std::vector<int>& labels) {
  const i64 n = logits.shape().n(), k = logits.shape().c();
  if (logits.shape().h() != 1 || logits.shape().w() != 1) {
    throw ShapeError("softmax_cross_entropy: logits must be (n,k,1,1), got " +
                     logits.shape().str());
  }
  if (static_cast<i64>(labels.size()) != n) {
    throw ShapeError("softmax_cross_entropy: label count != batch size");
  }
  LossResultT<T> r;
  r.grad = TensorT<T>(logits.shape());
  T total = T(0);
  for (i64 b = 0; b < n; ++b) {
    const int label = labels[b];
    if (label < 0 || label >= k) {
      throw ConfigError("softmax_cross_entropy: label " + std::to_string(label) +
                        " out of range [0," + std::to_string(k) + ")");
    }
    const T* row = logits.data() + b * k;
    T mx = row[0];
    for (i64 j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    T z = T(0);
    for (i64 j = 0; j < k; ++j) z += std::exp(row[j] - mx);
    const T lse = mx + std::log(z);
    total += lse - row[label];
    T* grow = r.grad.data() + b * k;
    for (i64 j = 0; j < k; ++j) {
      grow[j] = std::exp(row[j] - lse) / static_cast<T>(n);
    }
    grow[label] -= T(1) / static_cast<T>(n);
  }
  r.loss = total / static_cast<T>(n);
  return r;
}

// ---------------------------------------------------------------------------
// Resampling
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> upsample_nn(const TensorT<T>& x, i64 out_h, i64 out_w) {
  const i64 h = x.shape().h(), w = x.shape().w();
  if (out_h < h || out_w < w || out_h % h != 0 || out_w % w != 0) {
    throw ConfigError("upsample_nn: target " + std::to_string(out_h) + "x" +
                      std::to_string(out_w) + " is not an integer upscale of " +
                      std::to_string(h) + "x" + std::to_string(w));
  }
  const i64 sh = out_h / h, sw = out_w / w;
  TensorT<T> y(Shape(x.shape().n(), x.shape().c(), out_h, out_w));
  const i64 planes = x.shape().n() * x.shape().c();
  for (i64 pl = 0; pl < planes; ++pl) {
    const T* in = x.data() + pl * h * w;
    T* out = y.data() + pl * out_h * out_w;
    for (i64 oh = 0; oh < out_h; ++oh) {
      const T* src = in + (oh / sh) * w;
      T* dst = out + oh * out_w;
      for (i64 ow = 0; ow < out_w; ++ow) dst[ow] = src[ow / sw];
    }
  }
  return y;
}

// ---------------------------------------------------------------------------
// Explicit instantiations (float production, double verification)
// ---------------------------------------------------------------------------

#define ROOTCONV_INSTANTIATE_OPS(T)                                                             \
  template TensorT<T> add<T>(const TensorT<T>&, const TensorT<T>&);                             \
  template TensorT<T> sub<T>(const TensorT<T>&, const TensorT<T>&);                             \
  template TensorT<T> mul<T>(const TensorT<T>&, const TensorT<T>&);                             \
  template TensorT<T> scale<T>(const TensorT<T>&, T);                                           \
  template TensorT<T> relu<T>(const TensorT<T>&);                                               \
  template TensorT<T> relu_grad<T>(const TensorT<T>&, const TensorT<T>&);                       \
  template TensorT<T> im2col<T>(const TensorT<T>&, i64, i64, i64, i64, i64, i64, i64);          \
  template TensorT<T> conv_forward<T>(const TensorT<T>&, const ConvWeightsT<T>&, i64, i64);     \
  template ConvGradsT<T> conv_backward<T>(const TensorT<T>&, const ConvWeightsT<T>&, i64, i64,  \
                                          const TensorT<T>&, bool);                             \
  template ConvWeightsT<T> embed_block_diag<T>(const ConvWeightsT<T>&);                         \
  template TensorT<T> pool_forward<T>(const TensorT<T>&, const PoolGeom&);                      \
  template TensorT<T> pool_backward<T>(const TensorT<T>&, const PoolGeom&, const TensorT<T>&);  \
  template TensorT<T> batchnorm_forward<T>(const TensorT<T>&, BatchNormStateT<T>&, bool,        \
                                           BatchNormCacheT<T>*);                                \
  template BatchNormGradsT<T> batchnorm_backward<T>(const TensorT<T>&, const BatchNormStateT<T>&, \
                                                    const BatchNormCacheT<T>&, const TensorT<T>&); \
  template TensorT<T> linear_forward<T>(const TensorT<T>&, const TensorT<T>&,                   \
                                        const std::vector<T>&);                                 \
  template LinearGradsT<T> linear_backward<T>(const TensorT<T>&, const TensorT<T>&,             \
                                              const TensorT<T>&);                               \
  template TensorT<T> softmax<T>(const TensorT<T>&);                                            \
  template LossResultT<T> softmax_cross_entropy<T>(const TensorT<T>&, const std::vector<int>&); \
  template TensorT<T> upsample_nn<T>(const TensorT<T>&, i64, i64);

ROOTCONV_INSTANTIATE_OPS(float)
ROOTCONV_INSTANTIATE_OPS(double)

#undef ROOTCONV_INSTANTIATE_OPS

}  // namespace rootconv
