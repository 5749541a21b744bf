#include "rootconv/analysis.hpp"

#include <cmath>
#include <fstream>

#include "rootconv/ops.hpp"

namespace rootconv {

DMat matmul(const DMat& a, const DMat& b) {
  if (a.cols != b.rows) throw ShapeError("matmul: inner dimensions disagree");
  DMat c(a.rows, b.cols);
  for (i64 i = 0; i < a.rows; ++i) {
    for (i64 k = 0; k < a.cols; ++k) {
      const double aik = a.at(i, k);
      for (i64 j = 0; j < b.cols; ++j) c.at(i, j) += aik * b.at(k, j);
    }
  }
  return c;
}

DMat transpose(const DMat& a) {
  DMat t(a.cols, a.rows);
  for (i64 i = 0; i < a.rows; ++i) {
    for (i64 j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
  }
  return t;
}

SampleMatrix collect_samples(const Tensor& fm, const std::string& layer_name, i64 target_h,
                             i64 target_w) {
  Tensor map = fm;
  if (target_h > 0 && target_w > 0 &&
      (target_h != fm.shape().h() || target_w != fm.shape().w())) {
    map = upsample_nn(fm, target_h, target_w);
  }
  const i64 n = map.shape().n(), c = map.shape().c();
  const i64 hw = map.shape().h() * map.shape().w();
  SampleMatrix s;
  s.layer = layer_name;
  s.x = DMat(c, n * hw);
  for (i64 b = 0; b < n; ++b) {
    for (i64 ch = 0; ch < c; ++ch) {
      const float* plane = map.data() + (b * c + ch) * hw;
      for (i64 p = 0; p < hw; ++p) {
        s.x.at(ch, b * hw + p) = static_cast<double>(plane[p]);
      }
    }
  }
  return s;
}

SampleMatrix collect_layer_samples(Model& model, const std::string& layer, const Tensor& inputs,
                                   i64 target_h, i64 target_w) {
  if (!model.net().has_layer(layer)) {
    throw ConfigError("collect_samples: unknown layer '" + layer + "'");
  }
  std::map<std::string, Tensor> acts;
  model.forward(inputs, /*training=*/false, &acts);
  return collect_samples(acts.at(layer), layer, target_h, target_w);
}

void center_rows(SampleMatrix& s) {
  for (i64 i = 0; i < s.x.rows; ++i) {
    double mean = 0;
    for (i64 j = 0; j < s.x.cols; ++j) mean += s.x.at(i, j);
    mean /= static_cast<double>(s.x.cols);
    for (i64 j = 0; j < s.x.cols; ++j) s.x.at(i, j) -= mean;
  }
  s.centered = true;
}

void normalize_rows(SampleMatrix& s) {
  for (i64 i = 0; i < s.x.rows; ++i) {
    double ss = 0;
    for (i64 j = 0; j < s.x.cols; ++j) ss += s.x.at(i, j) * s.x.at(i, j);
    const double sd = std::sqrt(ss / std::max<i64>(s.x.cols - 1, 1));
    if (sd > 0) {
      for (i64 j = 0; j < s.x.cols; ++j) s.x.at(i, j) /= sd;
    }
  }
}

CovarianceMap cross_cov(const SampleMatrix& x1, const SampleMatrix& x2) {
  if (x1.samples() != x2.samples()) {
    throw ShapeError("cross_cov: sample counts disagree (" + std::to_string(x1.samples()) +
                     " vs " + std::to_string(x2.samples()) + ")");
  }
  if (!x1.centered || !x2.centered) {
    throw ConfigError("cross_cov: operands must be centered");
  }
  CovarianceMap map;
  map.row_layer = x1.layer;
  map.col_layer = x2.layer;
  const i64 n = x1.samples();
  map.m = matmul(x1.x, transpose(x2.x));
  const double scale = 1.0 / static_cast<double>(std::max<i64>(n - 1, 1));
  for (auto& v : map.m.a) v *= scale;
  return map;
}

void jacobi_eigen_sym(const DMat& a, DMat& p, std::vector<double>& d) {
  if (a.rows != a.cols) throw ShapeError("jacobi: matrix not square");
  const i64 n = a.rows;
  DMat m = a;
  p = DMat(n, n);
  for (i64 i = 0; i < n; ++i) p.at(i, i) = 1.0;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (i64 i = 0; i < n; ++i) {
      for (i64 j = i + 1; j < n; ++j) off += m.at(i, j) * m.at(i, j);
    }
    if (off < 1e-24) break;
    for (i64 q = 1; q < n; ++q) {
      for (i64 pp = 0; pp < q; ++pp) {
        const double apq = m.at(pp, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (m.at(q, q) - m.at(pp, pp)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (i64 k = 0; k < n; ++k) {
          const double mkp = m.at(k, pp), mkq = m.at(k, q);
          m.at(k, pp) = c * mkp - s * mkq;
          m.at(k, q) = s * mkp + c * mkq;
        }
        for (i64 k = 0; k < n; ++k) {
          const double mpk = m.at(pp, k), mqk = m.at(q, k);
          m.at(pp, k) = c * mpk - s * mqk;
          m.at(q, k) = s * mpk + c * mqk;
        }
        for (i64 k = 0; k < n; ++k) {
          const double pkp = p.at(k, pp), pkq = p.at(k, q);
          p.at(k, pp) = c * pkp - s * pkq;
          p.at(k, q) = s * pkp + c * pkq;
        }
      }
    }
  }
  d.resize(n);
  for (i64 i = 0; i < n; ++i) d[i] = m.at(i, i);
}

ZcaResult zca_whiten(const SampleMatrix& x, double eps) {
  if (!x.centered) throw ConfigError("zca_whiten: samples must be centered");
  if (x.samples() <= x.channels()) {
    throw ConfigError("zca_whiten: need more samples than channels (" +
                      std::to_string(x.samples()) + " <= " + std::to_string(x.channels()) + ")");
  }
  for (double v : x.x.a) {
    if (!std::isfinite(v)) throw ConfigError("zca_whiten: non-finite input");
  }
  const i64 c = x.channels();
  const double scale = 1.0 / static_cast<double>(x.samples() - 1);
  DMat cov = matmul(x.x, transpose(x.x));
  for (auto& v : cov.a) v *= scale;

  DMat p;
  std::vector<double> d;
  jacobi_eigen_sym(cov, p, d);

  // W = P (D + eps)^(-1/2) P^T
  DMat scaled(c, c);
  for (i64 i = 0; i < c; ++i) {
    const double lam = d[i] + eps;
    if (lam <= 0) throw ConfigError("zca_whiten: covariance not positive definite under eps");
    const double f = 1.0 / std::sqrt(lam);
    for (i64 k = 0; k < c; ++k) scaled.at(k, i) = p.at(k, i) * f;
  }
  ZcaResult r;
  r.w = matmul(scaled, transpose(p));
  r.xw.layer = x.layer;
  r.xw.centered = true;
  r.xw.x = matmul(r.w, x.x);
  return r;
}

CovarianceMap whitened_cross_cov(const SampleMatrix& x1, const SampleMatrix& x2, double eps) {
  auto z1 = zca_whiten(x1, eps);
  auto z2 = zca_whiten(x2, eps);
  CovarianceMap map = cross_cov(z1.xw, z2.xw);
  map.row_layer = x1.layer;
  map.col_layer = x2.layer;
  map.whitened = true;
  return map;
}

std::vector<unsigned char> quantize_heatmap(const DMat& m) {
  double maxabs = 0;
  for (double v : m.a) maxabs = std::max(maxabs, std::abs(v));
  std::vector<unsigned char> bytes(m.a.size(), 0);
  if (maxabs > 0) {
    for (size_t i = 0; i < m.a.size(); ++i) {
      bytes[i] = static_cast<unsigned char>(std::lround(255.0 * std::abs(m.a[i]) / maxabs));
    }
  }
  return bytes;
}

void render_heatmap(const CovarianceMap& map, const std::string& path) {
  auto bytes = quantize_heatmap(map.m);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open for write: " + path);
  os << "P5\n" << map.m.cols << " " << map.m.rows << "\n255\n";
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

PgmImage parse_pgm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open: " + path);
  std::string magic;
  is >> magic;
  if (magic != "P5") throw FormatError(path + ": not a binary PGM");
  i64 cols = 0, rows = 0, maxval = 0;
  is >> cols >> rows >> maxval;
  if (!is || maxval != 255) throw FormatError(path + ": unsupported PGM header");
  is.get();  // single whitespace after maxval
  PgmImage img;
  img.rows = rows;
  img.cols = cols;
  img.bytes.resize(static_cast<size_t>(rows) * cols);
  is.read(reinterpret_cast<char*>(img.bytes.data()), static_cast<std::streamsize>(img.bytes.size()));
  if (!is) throw FormatError(path + ": truncated PGM payload");
  return img;
}

}  // namespace rootconv
