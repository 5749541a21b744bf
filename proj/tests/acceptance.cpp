// Acceptance harness: runs the project's quantitative reproduction targets
// and property checks, one [PASS]/[FAIL] line each. Select a group by name
// (cost-nin, cost-resnet50, cost-resnet200, cost-googlenet, kernels,
// counter, gemm-batched, zca, blockdiag, training, schedules) or "all".

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "rootconv/analysis.hpp"
#include "rootconv/bench.hpp"
#include "rootconv/cost.hpp"
#include "rootconv/dataio.hpp"
#include "rootconv/model.hpp"
#include "rootconv/schedule.hpp"
#include "rootconv/trainer.hpp"
#include "rootconv/zoo.hpp"

using namespace rootconv;
using namespace rootconv::testing;
namespace fs = std::filesystem;

namespace {

struct Harness {
  int passed = 0;
  int failed = 0;

  void check(bool ok, const std::string& what, const std::string& detail = "") {
    std::printf("[%s] %s%s%s\n", ok ? "PASS" : "FAIL", what.c_str(), detail.empty() ? "" : ": ",
                detail.c_str());
    (ok ? passed : failed) += 1;
  }

  void note(const std::string& line) { std::printf("       %s\n", line.c_str()); }
};

std::string pct(double ratio) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%+.1f%%", (ratio - 1.0) * 100.0);
  return buf;
}

bool within(double ratio, double target, double tol = 0.03) {
  return ratio >= target - tol && ratio <= target + tol;
}

// ---------------------------------------------------------------------------
// Criterion 1: cost-model reproduction
// ---------------------------------------------------------------------------

double flops_ratio(const NetSpec& base, const NetSpec& variant, bool conv_only = false) {
  CostOptions o;
  o.params_conv_only = conv_only;
  return compare(net_cost(base, base.input, o), net_cost(variant, variant.input, o))
      .total_flops_ratio;
}

double params_ratio(const NetSpec& base, const NetSpec& variant, bool conv_only = false) {
  CostOptions o;
  o.params_conv_only = conv_only;
  return compare(net_cost(base, base.input, o), net_cost(variant, variant.input, o))
      .total_params_ratio;
}

void cost_nin(Harness& h) {
  NetSpec base = make_nin(ArchVariant::parse("baseline"));
  NetSpec root8 = make_nin(ArchVariant::parse("root-8"));
  const double fr = flops_ratio(base, root8);
  const double pr = params_ratio(base, root8);
  h.check(within(fr, 0.46), "nin root-8 flops ratio 0.46 +/- 0.03",
          "got " + std::to_string(fr));
  h.check(within(pr, 0.33), "nin root-8 params ratio 0.33 +/- 0.03",
          "got " + std::to_string(pr));
}

void cost_resnet50(Harness& h) {
  NetSpec base = make_resnet50(ArchVariant::parse("baseline"));
  NetSpec r16 = make_resnet50(ArchVariant::parse("root-16"));
  NetSpec r64 = make_resnet50(ArchVariant::parse("root-64"));
  const double f16 = flops_ratio(base, r16), p16 = params_ratio(base, r16);
  const double f64r = flops_ratio(base, r64), p64 = params_ratio(base, r64);
  h.check(within(p16, 0.73), "resnet50 root-16 model size -27% +/- 3pp", pct(p16));
  h.check(within(f16, 0.63), "resnet50 root-16 flops -37% +/- 3pp", pct(f16));
  h.check(within(p64, 0.60), "resnet50 root-64 params -40% +/- 3pp", pct(p64));
  h.check(within(f64r, 0.55), "resnet50 root-64 flops -45% +/- 3pp", pct(f64r));
}

void cost_resnet200(Harness& h) {
  NetSpec base = make_resnet200(ArchVariant::parse("baseline"));
  NetSpec r32 = make_resnet200(ArchVariant::parse("root-32"));
  const double fr = flops_ratio(base, r32), pr = params_ratio(base, r32);
  h.check(within(pr, 0.56), "resnet200 root-32 params -44% +/- 3pp", pct(pr));
  // The -25% figure is not reproducible from this architecture family: any
  // grouping strong enough for -44% params removes >= ~30% of the
  // multiply-adds (the 3x3 layers carry half of both budgets). Asserted as
  // stated and expected to fail; the full analysis is recorded outside the
  // test tree.
  h.check(within(fr, 0.75), "resnet200 root-32 flops -25% +/- 3pp", pct(fr));
  for (const char* v : {"root-8", "root-16", "root-32", "root-64"}) {
    NetSpec net = make_resnet200(ArchVariant::parse(v));
    h.note(std::string("info ") + v + ": flops " + pct(flops_ratio(base, net)) + ", params " +
           pct(params_ratio(base, net)));
  }
}

void cost_googlenet(Harness& h) {
  // The quoted trade-off (44% fewer multiply-adds, 7% fewer parameters)
  // corresponds to the root-8 grouping row: flops over the deploy tower,
  // model size including the auxiliary-classifier parameters that ship in
  // the trained model.
  NetSpec base = make_googlenet(ArchVariant::parse("baseline"));
  NetSpec r8 = make_googlenet(ArchVariant::parse("root-8"));
  const double fr = flops_ratio(base, r8);
  NetSpec base_aux = make_googlenet(ArchVariant::parse("baseline"), /*with_aux=*/true);
  NetSpec r8_aux = make_googlenet(ArchVariant::parse("root-8"), /*with_aux=*/true);
  const double pr = params_ratio(base_aux, r8_aux);
  h.check(within(fr, 0.56), "googlenet root-8 flops -44% +/- 3pp", pct(fr));
  h.check(within(pr, 0.93), "googlenet root-8 params (incl. aux towers) -7% +/- 3pp", pct(pr));
  for (const char* v : {"root-2", "root-4", "root-8", "root-16"}) {
    NetSpec net = make_googlenet(ArchVariant::parse(v));
    NetSpec net_aux = make_googlenet(ArchVariant::parse(v), true);
    h.note(std::string("info ") + v + ": flops " + pct(flops_ratio(base, net)) +
           ", params(main) " + pct(params_ratio(base, net)) + ", params(aux-incl) " +
           pct(params_ratio(base_aux, net_aux)));
  }
}

// ---------------------------------------------------------------------------
// Criterion 2: kernel correctness
// ---------------------------------------------------------------------------

void kernels(Harness& h) {
  Rng rng(1234);
  int conv_checked = 0;
  double worst = 0;
  for (int run = 0; run < 220; ++run) {
    const i64 g_choices[] = {1, 1, 2, 3, 4, 8};
    const i64 g = g_choices[rng.uniform_below(6)];
    const i64 c1 = g * (1 + static_cast<i64>(rng.uniform_below(4)));
    const i64 c2 = g * (1 + static_cast<i64>(rng.uniform_below(4)));
    const i64 k = 1 + static_cast<i64>(rng.uniform_below(3));
    const i64 stride = 1 + static_cast<i64>(rng.uniform_below(3));
    const i64 pad = static_cast<i64>(rng.uniform_below(3));
    const i64 hw = k + 1 + static_cast<i64>(rng.uniform_below(5));
    if (conv_out_extent(hw, k, stride, pad) < 1) continue;
    const i64 n = 1 + static_cast<i64>(rng.uniform_below(3));
    Tensor x = random_tensor(Shape(n, c1, hw, hw), rng);
    ConvWeights w;
    w.groups = g;
    w.filters = random_tensor(Shape(c2, c1 / g, k, k), rng, 0.5);
    if (run % 3 == 0) {
      w.bias.resize(c2);
      for (auto& v : w.bias) v = static_cast<float>(0.1 * rng.normal());
    }
    Tensor y = conv_forward(x, w, stride, pad);
    double err;
    if (g == 1) {
      err = max_abs_diff(y, conv_ref(x, w, stride, pad));
    } else {
      Tensor y_full = conv_forward(x, embed_block_diag(w), stride, pad);
      err = max_abs_diff(y, y_full.cast<double>());
    }
    worst = std::max(worst, err);
    ++conv_checked;
  }
  h.check(conv_checked >= 200 && worst <= 1e-5,
          "grouped conv vs direct/block-diagonal oracle on " + std::to_string(conv_checked) +
              " random configs",
          "max abs err " + std::to_string(worst));

  // Backward ops vs f64 central finite differences, >= 20 configs each.
  auto probe_loss = [](const TensorT<double>& y, const TensorT<double>& probe) {
    double acc = 0;
    for (i64 i = 0; i < y.numel(); ++i) acc += y.data()[i] * probe.data()[i];
    return acc;
  };

  double conv_worst = 0;
  for (int run = 0; run < 20; ++run) {
    const i64 g = run % 2 ? 2 : 1;
    const i64 c1 = g * (1 + static_cast<i64>(rng.uniform_below(2)));
    const i64 c2 = g * (1 + static_cast<i64>(rng.uniform_below(2)));
    const i64 k = 1 + static_cast<i64>(rng.uniform_below(3));
    TensorT<double> x = random_tensor64(Shape(1, c1, k + 2, k + 2), rng);
    ConvWeights64 w;
    w.groups = g;
    w.filters = random_tensor64(Shape(c2, c1 / g, k, k), rng, 0.5);
    w.bias.resize(c2, 0.0);
    TensorT<double> y = conv_forward(x, w, 1, k / 2);
    TensorT<double> probe = random_tensor64(y.shape(), rng);
    auto grads = conv_backward(x, w, 1, k / 2, probe);
    auto loss = [&] { return probe_loss(conv_forward(x, w, 1, k / 2), probe); };
    conv_worst = std::max(conv_worst, fd_max_rel_err(loss, x.data(), x.numel(), grads.gx.data()));
    conv_worst = std::max(
        conv_worst, fd_max_rel_err(loss, w.filters.data(), w.filters.numel(), grads.gw.data()));
  }
  h.check(conv_worst <= 1e-3, "conv backward finite-difference check (20 configs)",
          "max rel err " + std::to_string(conv_worst));

  double pool_worst = 0;
  for (int run = 0; run < 20; ++run) {
    PoolGeom g;
    g.op = run % 2 ? PoolOp::kAvg : PoolOp::kMax;
    g.kh = g.kw = 2 + static_cast<i64>(rng.uniform_below(2));
    g.stride = 1 + static_cast<i64>(rng.uniform_below(2));
    g.pad = static_cast<i64>(rng.uniform_below(2));
    g.ceil_mode = run % 3 == 0;
    g.count_exclude_pad = run % 5 == 0;
    TensorT<double> x = random_tensor64(Shape(1, 2, 6, 6), rng);
    TensorT<double> y = pool_forward(x, g);
    TensorT<double> probe = random_tensor64(y.shape(), rng);
    TensorT<double> gx = pool_backward(x, g, probe);
    auto loss = [&] { return probe_loss(pool_forward(x, g), probe); };
    pool_worst = std::max(pool_worst, fd_max_rel_err(loss, x.data(), x.numel(), gx.data(), 1e-5));
  }
  h.check(pool_worst <= 1e-3, "pool backward finite-difference check (20 configs)",
          "max rel err " + std::to_string(pool_worst));

  double bn_worst = 0;
  for (int run = 0; run < 20; ++run) {
    TensorT<double> x = random_tensor64(Shape(2, 3, 4, 4), rng);
    auto st = BatchNormStateT<double>::make(3, run % 2 == 0);
    if (st.affine) {
      for (auto& v : st.gamma) v = 1.0 + 0.2 * rng.normal();
      for (auto& v : st.beta) v = 0.2 * rng.normal();
    }
    BatchNormCacheT<double> cache;
    auto st2 = st;
    TensorT<double> y = batchnorm_forward(x, st2, true, &cache);
    TensorT<double> probe = random_tensor64(y.shape(), rng);
    auto grads = batchnorm_backward(x, st, cache, probe);
    auto loss = [&] {
      auto st3 = st;
      return probe_loss(batchnorm_forward(x, st3, true), probe);
    };
    bn_worst = std::max(bn_worst, fd_max_rel_err(loss, x.data(), x.numel(), grads.gx.data()));
    if (st.affine) {
      bn_worst =
          std::max(bn_worst, fd_max_rel_err(loss, st.gamma.data(), 3, grads.ggamma.data()));
    }
  }
  h.check(bn_worst <= 1e-3, "batchnorm backward finite-difference check (20 configs)",
          "max rel err " + std::to_string(bn_worst));

  double lin_worst = 0;
  for (int run = 0; run < 20; ++run) {
    const i64 n = 2 + static_cast<i64>(rng.uniform_below(3));
    const i64 in = 3 + static_cast<i64>(rng.uniform_below(4));
    const i64 out = 2 + static_cast<i64>(rng.uniform_below(4));
    TensorT<double> x = random_tensor64(Shape(n, in, 1, 1), rng);
    TensorT<double> w = random_tensor64(Shape(out, in, 1, 1), rng, 0.5);
    std::vector<double> bias(out, 0.1);
    std::vector<int> labels;
    for (i64 i = 0; i < n; ++i) labels.push_back(static_cast<int>(rng.uniform_below(out)));
    auto loss_fn = [&] {
      return static_cast<double>(
          softmax_cross_entropy(linear_forward(x, w, bias), labels).loss);
    };
    auto lres = softmax_cross_entropy(linear_forward(x, w, bias), labels);
    auto lin = linear_backward(x, w, lres.grad);
    lin_worst = std::max(lin_worst, fd_max_rel_err(loss_fn, x.data(), x.numel(), lin.gx.data()));
    lin_worst = std::max(lin_worst, fd_max_rel_err(loss_fn, w.data(), w.numel(), lin.gw.data()));
    lin_worst = std::max(lin_worst, fd_max_rel_err(loss_fn, bias.data(), out, lin.gbias.data()));
  }
  h.check(lin_worst <= 1e-3,
          "linear + softmax-cross-entropy finite-difference check (20 configs)",
          "max rel err " + std::to_string(lin_worst));
}

// ---------------------------------------------------------------------------
// Criterion 3: counter equivalence
// ---------------------------------------------------------------------------

void counter(Harness& h) {
  struct ArchCase {
    std::string label;
    NetSpec net;
    Shape input;
  };
  std::vector<ArchCase> cases;
  for (const char* v : {"baseline", "root-2", "root-4", "root-8", "root-16"}) {
    cases.push_back({"nin-" + std::string(v), make_nin(ArchVariant::parse(v)),
                     Shape(1, 3, 32, 32)});
  }
  cases.push_back({"nin-column-4", make_nin({Topology::kColumn, 4}), Shape(1, 3, 32, 32)});
  cases.push_back({"nin-tree-4", make_nin({Topology::kTree, 4}), Shape(1, 3, 32, 32)});
  for (const char* v :
       {"baseline", "root-2", "root-4", "root-8", "root-16", "root-32", "root-64"}) {
    cases.push_back({"resnet50-" + std::string(v), make_resnet50(ArchVariant::parse(v)),
                     Shape(1, 3, 64, 64)});
    cases.push_back({"resnet200-" + std::string(v), make_resnet200(ArchVariant::parse(v)),
                     Shape(1, 3, 64, 64)});
  }
  for (const char* v : {"baseline", "root-2", "root-4", "root-8", "root-16"}) {
    cases.push_back({"googlenet-" + std::string(v), make_googlenet(ArchVariant::parse(v)),
                     Shape(1, 3, 64, 64)});
  }

  u64 layers_checked = 0, mismatches = 0;
  Rng rng(55);
  for (auto& c : cases) {
    NetSpec net = c.net;
    net.input = c.input;
    auto shapes = validate_net(net);
    CostReport rep = net_cost(net, c.input);
    for (size_t li = 0; li < net.layers.size(); ++li) {
      const LayerSpec& l = net.layers[li];
      if (l.kind == LayerKind::kConv) {
        const Shape in = shapes.at(l.inputs.front());
        Tensor x = random_tensor(Shape(1, in.c(), in.h(), in.w()), rng, 0.1);
        ConvWeights w;
        w.groups = l.groups;
        w.filters = Tensor(Shape(l.out_channels, in.c() / l.groups, l.kh, l.kw), 0.01f);
        mac_counter_reset();
        mac_counter_enable(true);
        conv_forward(x, w, l.stride, l.pad);
        mac_counter_enable(false);
        if (mac_counter_value() != rep.rows[li].flops) ++mismatches;
        ++layers_checked;
      } else if (l.kind == LayerKind::kLinear) {
        const Shape in = shapes.at(l.inputs.front());
        Tensor x(Shape(1, in.c(), in.h(), in.w()), 0.1f);
        Tensor w(Shape(l.out_channels, in.c() * in.h() * in.w(), 1, 1), 0.01f);
        mac_counter_reset();
        mac_counter_enable(true);
        linear_forward(x, w, {});
        mac_counter_enable(false);
        if (mac_counter_value() != rep.rows[li].flops) ++mismatches;
        ++layers_checked;
      }
    }
  }
  h.check(mismatches == 0 && layers_checked > 500,
          "measured multiply-adds equal conv_cost exactly for every parameterized layer",
          std::to_string(layers_checked) + " layers across " + std::to_string(cases.size()) +
              " architecture variants, " + std::to_string(mismatches) + " mismatches");
}

// ---------------------------------------------------------------------------
// Criterion 4: batched GEMM
// ---------------------------------------------------------------------------

void gemm_batched_criterion(Harness& h) {
  // bitwise agreement on randomized batches
  Rng rng(77);
  bool all_equal = true;
  for (int run = 0; run < 500; ++run) {
    const i64 batch = static_cast<i64>(rng.uniform_below(9));
    const i64 m = 1 + static_cast<i64>(rng.uniform_below(8));
    const i64 k = 1 + static_cast<i64>(rng.uniform_below(8));
    const i64 n = 1 + static_cast<i64>(rng.uniform_below(8));
    Tensor a = random_tensor(Shape(std::max<i64>(batch, 1), 1, m, k), rng);
    Tensor b = random_tensor(Shape(std::max<i64>(batch, 1), 1, k, n), rng);
    Tensor lo(Shape(std::max<i64>(batch, 1), 1, m, n));
    Tensor bo(Shape(std::max<i64>(batch, 1), 1, m, n));
    std::vector<GemmJob> jobs;
    for (i64 i = 0; i < batch; ++i) {
      ConstMatView av{a.data(), a.numel(), i * m * k, m, k, k};
      ConstMatView bv{b.data(), b.numel(), i * k * n, k, n, n};
      MatView lv{lo.data(), lo.numel(), i * m * n, m, n, n};
      MatView ov{bo.data(), bo.numel(), i * m * n, m, n, n};
      gemm<float>(av, bv, lv, false);
      jobs.push_back({av, bv, ov, false});
    }
    gemm_batched<float>(jobs);
    if (std::memcmp(lo.data(), bo.data(), static_cast<size_t>(lo.numel()) * sizeof(float)) != 0) {
      all_equal = false;
    }
  }
  h.check(all_equal, "batched strategy bitwise-matches looped strategy (500 random batches)");

  for (auto [dim, batch] : {std::pair<i64, i64>{32, 64}, {16, 64}}) {
    BenchScenario sc;
    sc.m = sc.n = sc.k = dim;
    sc.batch = batch;
    sc.reps = 9;
    BenchRun run = bench_gemm(sc, {GemmStrategy::kLooped, GemmStrategy::kBatched}, 3);
    h.check(run.outputs_bitwise_equal,
            "bench outputs bitwise equal at " + std::to_string(batch) + "x" +
                std::to_string(dim) + "^3");
    const double looped = run.results[0].throughput;
    const double batched = run.results[1].throughput;
    char detail[128];
    std::snprintf(detail, sizeof(detail), "batched %.2f GMAC/s vs looped %.2f GMAC/s (%.2fx)",
                  batched / 1e9, looped / 1e9, batched / looped);
    h.check(batched >= looped,
            "batched median throughput >= looped for " + std::to_string(batch) + " matrices of " +
                std::to_string(dim) + "x" + std::to_string(dim),
            detail);
  }
}

// ---------------------------------------------------------------------------
// Criterion 5: ZCA correctness
// ---------------------------------------------------------------------------

DMat gj_invert(const DMat& in) {
  const i64 n = in.rows;
  DMat a = in;
  DMat inv(n, n);
  for (i64 i = 0; i < n; ++i) inv.at(i, i) = 1.0;
  for (i64 col = 0; col < n; ++col) {
    i64 pivot = col;
    for (i64 r = col + 1; r < n; ++r) {
      if (std::abs(a.at(r, col)) > std::abs(a.at(pivot, col))) pivot = r;
    }
    for (i64 j = 0; j < n; ++j) {
      std::swap(a.at(col, j), a.at(pivot, j));
      std::swap(inv.at(col, j), inv.at(pivot, j));
    }
    const double d = a.at(col, col);
    for (i64 j = 0; j < n; ++j) {
      a.at(col, j) /= d;
      inv.at(col, j) /= d;
    }
    for (i64 r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a.at(r, col);
      for (i64 j = 0; j < n; ++j) {
        a.at(r, j) -= f * a.at(col, j);
        inv.at(r, j) -= f * inv.at(col, j);
      }
    }
  }
  return inv;
}

// Denman-Beavers iteration: Y->sqrt(C), Z->C^(-1/2). Solves S*S=C without
// touching the eigendecomposition path.
DMat db_inverse_sqrt(const DMat& c) {
  const i64 n = c.rows;
  DMat y = c, z(n, n);
  for (i64 i = 0; i < n; ++i) z.at(i, i) = 1.0;
  for (int it = 0; it < 60; ++it) {
    DMat yi = gj_invert(y);
    DMat zi = gj_invert(z);
    double delta = 0;
    for (i64 i = 0; i < n * n; ++i) {
      const double ny = 0.5 * (y.a[i] + zi.a[i]);
      const double nz = 0.5 * (z.a[i] + yi.a[i]);
      delta = std::max(delta, std::abs(ny - y.a[i]));
      y.a[i] = ny;
      z.a[i] = nz;
    }
    if (delta < 1e-14) break;
  }
  return z;
}

void zca(Harness& h) {
  Rng rng(88);
  double worst_fro = 0;
  for (i64 c : {8, 16, 33, 64}) {
    SampleMatrix x;
    x.layer = "synthetic";
    x.x = DMat(c, 2000);
    for (auto& v : x.x.a) v = rng.normal();
    // mix the channels so whitening has real work to do
    for (i64 j = 0; j < x.x.cols; ++j) {
      for (i64 i = 1; i < c; ++i) x.x.at(i, j) += 0.5 * x.x.at(i - 1, j);
    }
    center_rows(x);
    auto r = zca_whiten(x);
    CovarianceMap cov = cross_cov(r.xw, r.xw);
    double fro = 0;
    for (i64 i = 0; i < c; ++i) {
      for (i64 j = 0; j < c; ++j) {
        const double d = cov.m.at(i, j) - (i == j ? 1.0 : 0.0);
        fro += d * d;
      }
    }
    worst_fro = std::max(worst_fro, std::sqrt(fro));
  }
  h.check(worst_fro <= 1e-3, "cov(WX, WX) within 1e-3 Frobenius of identity (8..64 channels)",
          "worst " + std::to_string(worst_fro));

  double worst_w = 0;
  for (i64 c : {8, 24}) {
    const double eps = 1e-5;
    SampleMatrix x;
    x.layer = "synthetic";
    x.x = DMat(c, 1500);
    for (auto& v : x.x.a) v = rng.normal();
    for (i64 j = 0; j < x.x.cols; ++j) {
      for (i64 i = 1; i < c; ++i) x.x.at(i, j) += 0.4 * x.x.at(i - 1, j);
    }
    center_rows(x);
    auto r = zca_whiten(x, eps);
    CovarianceMap cov = cross_cov(x, x);
    for (i64 i = 0; i < c; ++i) cov.m.at(i, i) += eps;
    DMat w_oracle = db_inverse_sqrt(cov.m);
    for (i64 i = 0; i < c * c; ++i) {
      worst_w = std::max(worst_w, std::abs(r.w.a[i] - w_oracle.a[i]));
    }
  }
  h.check(worst_w <= 1e-6, "eigen-path W matches the inverse-square-root oracle to 1e-6",
          "worst " + std::to_string(worst_w));
}

// ---------------------------------------------------------------------------
// Criterion 6: block-diagonal structure
// ---------------------------------------------------------------------------

void blockdiag(Harness& h) {
  // Exact dependency-mask test on every grouped layer of every built-in
  // grouped variant: perturbing input block i changes output block i only.
  struct ArchCase {
    std::string label;
    NetSpec net;
  };
  std::vector<ArchCase> cases;
  for (const char* v : {"root-2", "root-4", "root-8", "root-16"}) {
    cases.push_back({"nin-" + std::string(v), make_nin(ArchVariant::parse(v))});
    cases.push_back({"googlenet-" + std::string(v), make_googlenet(ArchVariant::parse(v))});
  }
  for (const char* v : {"root-2", "root-16", "root-64"}) {
    cases.push_back({"resnet50-" + std::string(v), make_resnet50(ArchVariant::parse(v))});
  }

  Rng rng(99);
  u64 grouped_layers = 0, violations = 0;
  for (auto& c : cases) {
    NetSpec net = c.net;
    resolve_net(net);
    for (const auto& l : net.layers) {
      if (l.kind != LayerKind::kConv || l.groups <= 1) continue;
      ++grouped_layers;
      const i64 g = l.groups;
      const i64 c1 = l.in_channels, c2 = l.out_channels;
      const i64 hw = l.kh + 2;
      Tensor x = random_tensor(Shape(1, c1, hw, hw), rng);
      ConvWeights w;
      w.groups = g;
      w.filters = random_tensor(Shape(c2, c1 / g, l.kh, l.kw), rng, 0.5);
      Tensor y0 = conv_forward(x, w, 1, l.pad);
      const i64 ohw = y0.shape().h() * y0.shape().w();
      for (i64 block = 0; block < g; ++block) {
        Tensor x2 = x;
        for (i64 ch = block * (c1 / g); ch < (block + 1) * (c1 / g); ++ch) {
          for (i64 p = 0; p < hw * hw; ++p) x2.data()[ch * hw * hw + p] += 0.7f;
        }
        Tensor y1 = conv_forward(x2, w, 1, l.pad);
        for (i64 co = 0; co < c2; ++co) {
          bool changed = false;
          for (i64 p = 0; p < ohw; ++p) {
            if (y1.data()[co * ohw + p] != y0.data()[co * ohw + p]) {
              changed = true;
              break;
            }
          }
          const bool expect = (co / (c2 / g)) == block;
          if (changed != expect) ++violations;
        }
      }
    }
  }
  h.check(violations == 0 && grouped_layers >= 40,
          "dependency mask exactly block-diagonal for every grouped layer",
          std::to_string(grouped_layers) + " grouped layers, " + std::to_string(violations) +
              " violations");

  // Statistical check on an untrained root-8 NiN (conv3a has 4 groups):
  // whitened cross covariance between conv2c and the grouped conv3a output
  // concentrates in the diagonal blocks.
  NetSpec net = make_nin(ArchVariant::parse("root-8"));
  Model model(net);
  model.init_params(2024);
  SyntheticParams p;
  p.n = 96;
  p.c = 3;
  p.h = p.w = 32;
  Tensor noise = make_synthetic("independent-noise", p, 7).images;
  std::map<std::string, Tensor> acts;
  model.forward(noise, false, &acts);
  SampleMatrix s1 = collect_samples(acts.at("conv2c"), "conv2c", 16, 16);
  SampleMatrix s2 = collect_samples(acts.at("conv3a"), "conv3a", 16, 16);
  center_rows(s1);
  center_rows(s2);
  CovarianceMap map = whitened_cross_cov(s1, s2);
  const i64 g = net.layer("conv3a").groups;
  const i64 c1 = 192, c2 = 192;
  double in_sum = 0, off_sum = 0;
  i64 in_count = 0, off_count = 0;
  for (i64 i = 0; i < c1; ++i) {
    for (i64 j = 0; j < c2; ++j) {
      const bool in_block = (i / (c1 / g)) == (j / (c2 / g));
      const double v = std::abs(map.m.at(i, j));
      if (in_block) {
        in_sum += v;
        ++in_count;
      } else {
        off_sum += v;
        ++off_count;
      }
    }
  }
  const double in_mean = in_sum / in_count;
  const double off_mean = off_sum / off_count;
  char detail[128];
  std::snprintf(detail, sizeof(detail), "mean |off-block| %.4f vs 0.25 * mean |in-block| %.4f",
                off_mean, 0.25 * in_mean);
  h.check(off_mean < 0.25 * in_mean,
          "untrained root-8 NiN: off-block whitened covariance < 0.25x in-block", detail);
}

// ---------------------------------------------------------------------------
// Criterion 7: desk-scale trainability
// ---------------------------------------------------------------------------

void training(Harness& h) {
  // 500-image CIFAR-10-format subset. A real CIFAR-10 binary directory is
  // used when ROOTCONV_CIFAR10_DIR is set; otherwise a deterministic
  // synthetic 10-class set is written in the same layout and read back
  // through the binary loader.
  Dataset data;
  if (const char* dir = std::getenv("ROOTCONV_CIFAR10_DIR")) {
    data = load_dataset(dir);
    std::printf("       using CIFAR-10 binaries from %s\n", dir);
  } else {
    const fs::path path = fs::temp_directory_path() / "rootconv-acceptance-cifar.bin";
    write_cifar10_bin(make_patterned_images(600, 31415), path.string());
    data = load_cifar10_bin({path.string()});
    fs::remove(path);
  }
  data = take_subset(data, 500);
  auto mean = compute_channel_mean(data);
  subtract_channel_mean(data, mean);

  TrainConfig cfg;
  cfg.lr_schedule = {{0, 0.05f}, {20, 0.01f}};
  cfg.momentum = 0.9f;
  cfg.weight_decay = 1e-4f;
  cfg.batch_size = 50;
  cfg.epochs = 30;
  cfg.seed = 17;
  cfg.augment_pad_crop = true;
  cfg.augment_mirror = true;

  auto run_variant = [&](const char* variant) {
    Model model(make_nin(ArchVariant::parse(variant), /*width_div=*/4));
    model.init_params(cfg.seed);
    auto metrics = train(model, data, nullptr, cfg);
    float best = metrics.front().loss;
    for (const auto& m : metrics) best = std::min(best, m.loss);
    std::printf("       %s: final loss %.3f (best %.3f), train acc %.3f\n", variant,
                metrics.back().loss, best, metrics.back().train_acc);
    return metrics.back().loss;
  };

  const float base_loss = run_variant("baseline");
  const float root4_loss = run_variant("root-4");
  h.check(base_loss <= 0.5f, "quarter-width NiN baseline reaches <= 0.5 train loss in 30 epochs",
          "final " + std::to_string(base_loss));
  h.check(root4_loss <= 0.5f, "quarter-width NiN root-4 reaches <= 0.5 train loss in 30 epochs",
          "final " + std::to_string(root4_loss));
  h.check(std::abs(base_loss - root4_loss) <= 0.15f,
          "baseline and root-4 final losses within 0.15",
          "|" + std::to_string(base_loss) + " - " + std::to_string(root4_loss) + "|");

  // Separable synthetic run.
  SyntheticParams p;
  p.n = 256;
  p.h = p.w = 8;
  p.margin = 2.0;
  Dataset sep = make_synthetic("separable-2class", p, 2);
  NetSpec net;
  {
    // three-conv root-2 net
    NetSpec n2;
    n2.input = Shape(1, 3, 8, 8);
    LayerSpec c1;
    c1.name = "c1";
    c1.kind = LayerKind::kConv;
    c1.kh = c1.kw = 3;
    c1.out_channels = 8;
    c1.pad = 1;
    c1.inputs = {"input"};
    n2.layers.push_back(c1);
    LayerSpec r1;
    r1.name = "c1.relu";
    r1.kind = LayerKind::kRelu;
    r1.inputs = {"c1"};
    n2.layers.push_back(r1);
    LayerSpec c2 = c1;
    c2.name = "c2";
    c2.groups = 2;
    c2.inputs = {"c1.relu"};
    c2.out_channels = 8;
    n2.layers.push_back(c2);
    LayerSpec r2 = r1;
    r2.name = "c2.relu";
    r2.inputs = {"c2"};
    n2.layers.push_back(r2);
    LayerSpec c3;
    c3.name = "c3";
    c3.kind = LayerKind::kConv;
    c3.out_channels = 2;
    c3.bias = true;
    c3.inputs = {"c2.relu"};
    n2.layers.push_back(c3);
    LayerSpec gap;
    gap.name = "gap";
    gap.kind = LayerKind::kPool;
    gap.pool_op = PoolOp::kAvg;
    gap.pool_global = true;
    gap.inputs = {"c3"};
    n2.layers.push_back(gap);
    net = n2;
  }
  Model m(net);
  m.init_params(3);
  TrainConfig scfg;
  scfg.lr_schedule = {{0, 0.02f}};
  scfg.epochs = 20;
  scfg.batch_size = 32;
  scfg.seed = 3;
  auto metrics = train(m, sep, nullptr, scfg);
  h.check(metrics.back().train_acc >= 0.99f,
          "separable synthetic run reaches >= 99% train accuracy",
          "got " + std::to_string(metrics.back().train_acc));
}

// ---------------------------------------------------------------------------
// Criterion 8: topology schedules + table rows
// ---------------------------------------------------------------------------

void schedules(Harness& h) {
  auto root = make_schedule(Topology::kRoot, 8, 3);
  auto column = make_schedule(Topology::kColumn, 4, 3);
  auto tree = make_schedule(Topology::kTree, 4, 3);
  h.check(root.counts == std::vector<i64>{1, 8, 4}, "root schedule is 1-8-4");
  h.check(column.counts == std::vector<i64>{1, 4, 4}, "column schedule is 1-4-4");
  h.check(tree.counts == std::vector<i64>{1, 4, 8}, "tree schedule is 1-4-8");

  // NiN table
  {
    const std::pair<const char*, std::array<i64, 2>> rows[] = {
        {"baseline", {1, 1}}, {"root-2", {2, 1}},   {"root-4", {4, 2}},
        {"root-8", {8, 4}},   {"root-16", {16, 8}},
    };
    bool ok = true;
    for (const auto& [variant, expect] : rows) {
      NetSpec net = make_nin(ArchVariant::parse(variant));
      ok = ok && net.layer("conv2a").groups == expect[0] &&
           net.layer("conv3a").groups == expect[1] && net.layer("conv1a").groups == 1;
    }
    h.check(ok, "NiN generator matches all 5 grouping-table rows");
  }
  // ResNet-50 table
  {
    const std::pair<const char*, std::array<i64, 4>> rows[] = {
        {"baseline", {1, 1, 1, 1}},   {"root-2", {2, 1, 1, 1}},   {"root-4", {4, 2, 1, 1}},
        {"root-8", {8, 4, 2, 1}},     {"root-16", {16, 8, 4, 2}}, {"root-32", {32, 16, 8, 4}},
        {"root-64", {64, 32, 16, 8}},
    };
    bool ok = true;
    for (const auto& [variant, expect] : rows) {
      NetSpec net = make_resnet50(ArchVariant::parse(variant));
      const char* stages[] = {"res2", "res3", "res4", "res5"};
      for (int s = 0; s < 4; ++s) {
        for (const auto& l : net.layers) {
          if (l.kind == LayerKind::kConv && l.kh == 3 &&
              l.name.rfind(stages[s], 0) == 0 && l.groups != expect[s]) {
            ok = false;
          }
        }
      }
      ok = ok && net.layer("conv1").groups == 1;
    }
    h.check(ok, "ResNet-50 generator matches all 7 grouping-table rows");
  }
  // GoogLeNet table
  {
    const std::pair<const char*, std::array<i64, 4>> rows[] = {
        {"baseline", {1, 1, 1, 1}}, {"root-2", {2, 1, 1, 1}},  {"root-4", {4, 2, 1, 1}},
        {"root-8", {8, 4, 2, 1}},   {"root-16", {16, 8, 4, 2}},
    };
    bool ok = true;
    for (const auto& [variant, expect] : rows) {
      NetSpec net = make_googlenet(ArchVariant::parse(variant));
      ok = ok && net.layer("conv2").groups == expect[0];
      ok = ok && net.layer("incp3a.3x3").groups == expect[1] &&
           net.layer("incp3b.5x5").groups == expect[1];
      ok = ok && net.layer("incp4a.3x3").groups == expect[2] &&
           net.layer("incp4e.5x5").groups == expect[2];
      ok = ok && net.layer("incp5a.3x3").groups == expect[3] &&
           net.layer("incp5b.5x5").groups == expect[3];
    }
    h.check(ok, "GoogLeNet generator matches all 5 grouping-table rows");
  }
}

}  // namespace

int main(int argc, char** argv) {
  const std::string which = argc > 1 ? argv[1] : "all";
  Harness h;
  const std::map<std::string, std::function<void(Harness&)>> groups = {
      {"cost-nin", cost_nin},
      {"cost-resnet50", cost_resnet50},
      {"cost-resnet200", cost_resnet200},
      {"cost-googlenet", cost_googlenet},
      {"kernels", kernels},
      {"counter", counter},
      {"gemm-batched", gemm_batched_criterion},
      {"zca", zca},
      {"blockdiag", blockdiag},
      {"training", training},
      {"schedules", schedules},
  };
  if (which == "all") {
    for (const auto& [name, fn] : groups) {
      std::printf("== %s ==\n", name.c_str());
      fn(h);
    }
  } else {
    auto it = groups.find(which);
    if (it == groups.end()) {
      std::fprintf(stderr, "unknown criterion group '%s'\n", which.c_str());
      return 2;
    }
    it->second(h);
  }
  std::printf("%d passed, %d failed\n", h.passed, h.failed);
  return h.failed == 0 ? 0 : 1;
}
