#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "rootconv/dataio.hpp"
#include "rootconv/ops.hpp"
#include "rootconv/rng.hpp"
#include "rootconv/tensor.hpp"

namespace rootconv::testing {

inline Tensor random_tensor(Shape s, Rng& rng, double scale = 1.0) {
  Tensor t(s);
  for (i64 i = 0; i < t.numel(); ++i) t.data()[i] = static_cast<float>(scale * rng.normal());
  return t;
}

inline Tensor64 random_tensor64(Shape s, Rng& rng, double scale = 1.0) {
  Tensor64 t(s);
  for (i64 i = 0; i < t.numel(); ++i) t.data()[i] = scale * rng.normal();
  return t;
}

// Reference convolution for checking results: direct loop over batch,
// output channels, output pixels, and filter taps. Independent of the
// im2col/GEMM path.
template <typename T>
TensorT<double> conv_ref(const TensorT<T>& x, const ConvWeightsT<T>& w, i64 stride, i64 pad) {
  const i64 n = x.shape().n(), c1 = x.shape().c(), h = x.shape().h(), wd = x.shape().w();
  const i64 c2 = w.out_channels(), g = w.groups;
  const i64 c1g = c1 / g, c2g = c2 / g;
  const i64 kh = w.kh(), kw = w.kw();
  const i64 ho = conv_out_extent(h, kh, stride, pad);
  const i64 wo = conv_out_extent(wd, kw, stride, pad);
  TensorT<double> y(Shape(n, c2, ho, wo));
  for (i64 b = 0; b < n; ++b) {
    for (i64 co = 0; co < c2; ++co) {
      const i64 grp = co / c2g;
      for (i64 oh = 0; oh < ho; ++oh) {
        for (i64 ow = 0; ow < wo; ++ow) {
          double acc = w.bias.empty() ? 0.0 : static_cast<double>(w.bias[co]);
          for (i64 ci = 0; ci < c1g; ++ci) {
            for (i64 ki = 0; ki < kh; ++ki) {
              const i64 ih = oh * stride - pad + ki;
              if (ih < 0 || ih >= h) continue;
              for (i64 kj = 0; kj < kw; ++kj) {
                const i64 iw = ow * stride - pad + kj;
                if (iw < 0 || iw >= wd) continue;
                acc += static_cast<double>(x.at(b, grp * c1g + ci, ih, iw)) *
                       static_cast<double>(w.filters.at(co, ci, ki, kj));
              }
            }
          }
          y.at(b, co, oh, ow) = acc;
        }
      }
    }
  }
  return y;
}

template <typename TA, typename TB>
double max_abs_diff(const TensorT<TA>& a, const TensorT<TB>& b) {
  double m = 0;
  for (i64 i = 0; i < a.numel(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i])));
  }
  return m;
}

// Central finite differences of `loss` wrt the doubles in `x`, compared
// against `analytic` at relative tolerance (floor keeps near-zero entries
// from blowing up the ratio).
inline double fd_max_rel_err(const std::function<double()>& loss, double* x, i64 count,
                             const double* analytic, double step = 1e-4) {
  double worst = 0;
  for (i64 i = 0; i < count; ++i) {
    const double keep = x[i];
    x[i] = keep + step;
    const double up = loss();
    x[i] = keep - step;
    const double down = loss();
    x[i] = keep;
    const double fd = (up - down) / (2 * step);
    const double denom = std::max({std::abs(fd), std::abs(analytic[i]), 1e-3});
    worst = std::max(worst, std::abs(fd - analytic[i]) / denom);
  }
  return worst;
}

// Deterministic 10-class image set in CIFAR dimensions: each class is an
// oriented sinusoid with a class color bias plus noise. Learnable at desk
// scale and stable under crop/mirror augmentation.
inline Dataset make_patterned_images(i64 n, u64 seed, double noise_sd = 0.25) {
  Rng rng(seed, 5);
  Dataset ds;
  ds.images = Tensor(Shape(n, 3, 32, 32));
  ds.labels.resize(n);
  ds.classes = 10;
  for (i64 s = 0; s < n; ++s) {
    const int label = static_cast<int>(s % 10);
    ds.labels[s] = label;
    const double angle = (label % 5) * (M_PI / 5.0);
    const double freq = (label < 5) ? 0.35 : 0.7;
    const double cx = std::cos(angle), sx = std::sin(angle);
    for (i64 ch = 0; ch < 3; ++ch) {
      const double bias = 0.5 + 0.18 * ((label + ch) % 3 - 1);
      float* plane = ds.images.data() + (s * 3 + ch) * 32 * 32;
      for (i64 y = 0; y < 32; ++y) {
        for (i64 x = 0; x < 32; ++x) {
          const double phase = freq * (cx * x + sx * y);
          double v = bias + 0.25 * std::sin(phase) + noise_sd * rng.normal();
          plane[y * 32 + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
      }
    }
  }
  return ds;
}

}  // namespace rootconv::testing
