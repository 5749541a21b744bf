#pragma once

#include <string>
#include <vector>

#include "rootconv/model.hpp"
#include "rootconv/tensor.hpp"

namespace rootconv {

/// Small dense double matrix for the covariance/whitening pipeline, which
/// runs in 64-bit end to end.
struct DMat {
  i64 rows = 0, cols = 0;
  std::vector<double> a;

  DMat() = default;
  DMat(i64 r, i64 c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}
  double& at(i64 i, i64 j) { return a[i * cols + j]; }
  double at(i64 i, i64 j) const { return a[i * cols + j]; }
};

DMat matmul(const DMat& a, const DMat& b);
DMat transpose(const DMat& a);

/// channels x N matrix of featuremap responses; each spatial position of
/// each batch item is one sample column.
struct SampleMatrix {
  DMat x;
  std::string layer;
  bool centered = false;

  i64 channels() const { return x.rows; }
  i64 samples() const { return x.cols; }
};

struct CovarianceMap {
  DMat m;  // row-layer channels x col-layer channels
  std::string row_layer;
  std::string col_layer;
  bool whitened = false;
  bool absolute = false;
};

/// Columns are the featuremap pixels in (n, h, w) order. When target
/// extents are given, the map is nearest-neighbor upsampled first so paired
/// layers get equal sample counts.
SampleMatrix collect_samples(const Tensor& featuremap, const std::string& layer_name,
                             i64 target_h = 0, i64 target_w = 0);

/// Forward `inputs` through the model and sample the named layer's output.
SampleMatrix collect_layer_samples(Model& model, const std::string& layer, const Tensor& inputs,
                                   i64 target_h = 0, i64 target_w = 0);

void center_rows(SampleMatrix& s);
/// Scales each row to unit variance (the correlation variant).
void normalize_rows(SampleMatrix& s);

/// cov(X1, X2) = X1 X2^T / (N-1). Both operands must be centered.
CovarianceMap cross_cov(const SampleMatrix& x1, const SampleMatrix& x2);

/// Symmetric eigendecomposition a = P diag(d) P^T by cyclic Jacobi.
void jacobi_eigen_sym(const DMat& a, DMat& p, std::vector<double>& d);

struct ZcaResult {
  DMat w;  // symmetric whitening transform
  SampleMatrix xw;
};

/// W = P (D + eps)^(-1/2) P^T from the eigendecomposition of
/// cov(X, X) = X X^T / (N-1); cov(WX, WX) is then (close to) identity.
ZcaResult zca_whiten(const SampleMatrix& x, double eps = 1e-5);

/// ZCA-whiten both sides, then their cross covariance.
CovarianceMap whitened_cross_cov(const SampleMatrix& x1, const SampleMatrix& x2,
                                 double eps = 1e-5);

/// |entry| max-normalized into [0,255]; the exact bytes render_heatmap writes.
std::vector<unsigned char> quantize_heatmap(const DMat& m);

/// 8-bit binary PGM (P5).
void render_heatmap(const CovarianceMap& map, const std::string& path);

struct PgmImage {
  i64 rows = 0, cols = 0;
  std::vector<unsigned char> bytes;
};
PgmImage parse_pgm(const std::string& path);

}  // namespace rootconv
