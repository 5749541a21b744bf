#pragma once

#include <optional>
#include <vector>

#include "rootconv/matview.hpp"
#include "rootconv/tensor.hpp"

namespace rootconv {

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b);
template <typename T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b);
template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b);
template <typename T>
TensorT<T> scale(const TensorT<T>& a, T s);
template <typename T>
TensorT<T> relu(const TensorT<T>& x);
/// dL/dx for y = relu(x): passes gy where x > 0.
template <typename T>
TensorT<T> relu_grad(const TensorT<T>& x, const TensorT<T>& gy);

// ---------------------------------------------------------------------------
// Grouped convolution
// ---------------------------------------------------------------------------

/// Filters of a (possibly grouped) convolution: (c2, c1/g, kh, kw).
/// Filter group i maps input channels [i*c1/g, (i+1)*c1/g) to output
/// channels [i*c2/g, (i+1)*c2/g).
template <typename T>
struct ConvWeightsT {
  TensorT<T> filters;
  std::vector<T> bias;  // empty, or length c2
  i64 groups = 1;

  i64 out_channels() const { return filters.shape().n(); }
  i64 in_channels() const { return filters.shape().c() * groups; }
  i64 kh() const { return filters.shape().h(); }
  i64 kw() const { return filters.shape().w(); }
};
using ConvWeights = ConvWeightsT<float>;
using ConvWeights64 = ConvWeightsT<double>;

/// Patch-unrolling of sample `n`, channels [c_begin, c_end), into a
/// (c_slice*kh*kw) x (Ho*Wo) matrix; rows are channel-major, columns are
/// output pixels, out-of-bounds taps are zero.
template <typename T>
TensorT<T> im2col(const TensorT<T>& x, i64 n, i64 c_begin, i64 c_end, i64 kh, i64 kw, i64 stride,
                  i64 pad);

template <typename T>
TensorT<T> conv_forward(const TensorT<T>& x, const ConvWeightsT<T>& w, i64 stride, i64 pad);

template <typename T>
struct ConvGradsT {
  TensorT<T> gx;
  TensorT<T> gw;
  std::vector<T> gbias;
};

template <typename T>
ConvGradsT<T> conv_backward(const TensorT<T>& x, const ConvWeightsT<T>& w, i64 stride, i64 pad,
                            const TensorT<T>& gy, bool need_gx = true);

/// Lifts grouped filters to an equivalent g=1 weight tensor that is zero
/// outside the diagonal channel blocks.
template <typename T>
ConvWeightsT<T> embed_block_diag(const ConvWeightsT<T>& w);

// ---------------------------------------------------------------------------
// Pooling
// ---------------------------------------------------------------------------

enum class PoolOp { kMax, kAvg };

struct PoolGeom {
  PoolOp op = PoolOp::kMax;
  i64 kh = 2, kw = 2;
  i64 stride = 2;
  i64 pad = 0;
  bool ceil_mode = false;
  // Average divisor: full window area clipped to the padded frame, or only
  // the in-image cells when count_exclude_pad is set.
  bool count_exclude_pad = false;
  bool global = false;  // window = whole map, stride 1, pad 0
};

template <typename T>
TensorT<T> pool_forward(const TensorT<T>& x, const PoolGeom& g);
template <typename T>
TensorT<T> pool_backward(const TensorT<T>& x, const PoolGeom& g, const TensorT<T>& gy);

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

template <typename T>
struct BatchNormStateT {
  std::vector<T> running_mean;
  std::vector<T> running_var;
  std::vector<T> gamma;  // used when affine
  std::vector<T> beta;
  bool affine = true;
  T eps = static_cast<T>(1e-5);
  T momentum = static_cast<T>(0.9);

  static BatchNormStateT make(i64 channels, bool affine_on) {
    BatchNormStateT st;
    st.running_mean.assign(channels, T(0));
    st.running_var.assign(channels, T(1));
    st.affine = affine_on;
    if (affine_on) {
      st.gamma.assign(channels, T(1));
      st.beta.assign(channels, T(0));
    }
    return st;
  }
  i64 channels() const { return static_cast<i64>(running_mean.size()); }
};
using BatchNormState = BatchNormStateT<float>;

template <typename T>
struct BatchNormCacheT {
  std::vector<T> mean;     // batch mean per channel
  std::vector<T> inv_std;  // 1/sqrt(var + eps)
};

/// Training mode normalizes by batch statistics and updates the running
/// stats with `momentum`; eval mode uses the running stats.
template <typename T>
TensorT<T> batchnorm_forward(const TensorT<T>& x, BatchNormStateT<T>& st, bool training,
                             BatchNormCacheT<T>* cache = nullptr);

template <typename T>
struct BatchNormGradsT {
  TensorT<T> gx;
  std::vector<T> ggamma;
  std::vector<T> gbeta;
};

template <typename T>
BatchNormGradsT<T> batchnorm_backward(const TensorT<T>& x, const BatchNormStateT<T>& st,
                                      const BatchNormCacheT<T>& cache, const TensorT<T>& gy);

// ---------------------------------------------------------------------------
// Linear + loss
// ---------------------------------------------------------------------------

/// Affine map on flattened (c*h*w) features; weight is (out, in, 1, 1).
template <typename T>
TensorT<T> linear_forward(const TensorT<T>& x, const TensorT<T>& w, const std::vector<T>& bias);

template <typename T>
struct LinearGradsT {
  TensorT<T> gx;
  TensorT<T> gw;
  std::vector<T> gbias;
};

template <typename T>
LinearGradsT<T> linear_backward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& gy);

template <typename T>
TensorT<T> softmax(const TensorT<T>& logits);

template <typename T>
struct LossResultT {
  T loss;                 // mean over the batch
  TensorT<T> grad;        // d loss / d logits
};

/// loss = -log softmax(logits)[label], averaged over the batch;
/// grad = (softmax - onehot) / n.
template <typename T>
LossResultT<T> softmax_cross_entropy(const TensorT<T>& logits, const std::vector<int>& labels);

// ---------------------------------------------------------------------------
// Resampling
// ---------------------------------------------------------------------------

/// Nearest-neighbor upsampling by integer factors.
template <typename T>
TensorT<T> upsample_nn(const TensorT<T>& x, i64 out_h, i64 out_w);

}  // namespace rootconv
