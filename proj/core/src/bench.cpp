#include "rootconv/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <sstream>

#include "rootconv/matview.hpp"
#include "rootconv/rng.hpp"

namespace rootconv {

std::string strategy_name(GemmStrategy s) {
  return s == GemmStrategy::kLooped ? "looped" : "batched";
}

namespace {

using Clock = std::chrono::steady_clock;

struct BatchData {
  std::vector<float> a, b, out;
  i64 m, n, k, batch;

  MatViewT<const float> av(i64 i) const {
    return {a.data(), static_cast<i64>(a.size()), i * m * k, m, k, k};
  }
  MatViewT<const float> bv(i64 i) const {
    return {b.data(), static_cast<i64>(b.size()), i * k * n, k, n, n};
  }
  MatView ov(std::vector<float>& buf, i64 i) const {
    return {buf.data(), static_cast<i64>(buf.size()), i * m * n, m, n, n};
  }
};

BatchData make_batch(const BenchScenario& sc, u64 seed) {
  BatchData d;
  d.m = sc.m;
  d.n = sc.n;
  d.k = sc.k;
  d.batch = sc.batch;
  Rng rng(seed, 99);
  d.a.resize(sc.batch * sc.m * sc.k);
  d.b.resize(sc.batch * sc.k * sc.n);
  d.out.resize(sc.batch * sc.m * sc.n);
  for (auto& v : d.a) v = static_cast<float>(rng.normal());
  for (auto& v : d.b) v = static_cast<float>(rng.normal());
  return d;
}

void run_strategy(GemmStrategy strategy, const BatchData& d, std::vector<float>& out) {
  if (strategy == GemmStrategy::kLooped) {
    for (i64 i = 0; i < d.batch; ++i) {
      gemm<float>(d.av(i), d.bv(i), d.ov(out, i), false);
    }
  } else {
    std::vector<GemmJob> jobs;
    jobs.reserve(d.batch);
    for (i64 i = 0; i < d.batch; ++i) {
      jobs.push_back({d.av(i), d.bv(i), d.ov(out, i), false});
    }
    gemm_batched<float>(jobs);
  }
}

}  // namespace

BenchRun bench_gemm(const BenchScenario& scenario, const std::vector<GemmStrategy>& strategies,
                    u64 seed) {
  BenchScenario sc = scenario;
  sc.reps = std::max<i64>(sc.reps, 5);
  BatchData data = make_batch(sc, seed);
  const double macs = static_cast<double>(sc.batch) * sc.m * sc.n * sc.k;

  // Inner iterations per timed sample, sized off a probe run so each sample
  // is long enough to measure.
  std::vector<float> probe_out(data.out.size());
  auto t0 = Clock::now();
  run_strategy(GemmStrategy::kLooped, data, probe_out);
  double probe = std::chrono::duration<double>(Clock::now() - t0).count();
  const i64 iters = std::max<i64>(1, static_cast<i64>(0.01 / std::max(probe, 1e-7)));

  BenchRun run;
  std::vector<std::vector<float>> outputs;
  for (GemmStrategy strategy : strategies) {
    BenchResult res;
    res.strategy = strategy;
    res.scenario = sc;
    std::vector<float> out(data.out.size(), 0.f);
    run_strategy(strategy, data, out);  // warm-up, not timed
    for (i64 rep = 0; rep < sc.reps; ++rep) {
      auto begin = Clock::now();
      for (i64 it = 0; it < iters; ++it) run_strategy(strategy, data, out);
      const double elapsed = std::chrono::duration<double>(Clock::now() - begin).count();
      res.seconds.push_back(elapsed / static_cast<double>(iters));
    }
    std::vector<double> sorted = res.seconds;
    std::sort(sorted.begin(), sorted.end());
    res.min_seconds = sorted.front();
    res.median_seconds = sorted[sorted.size() / 2];
    res.throughput = macs / res.median_seconds;
    outputs.push_back(std::move(out));
    run.results.push_back(std::move(res));
  }
  for (size_t i = 1; i < outputs.size(); ++i) {
    if (std::memcmp(outputs[0].data(), outputs[i].data(), outputs[0].size() * sizeof(float)) !=
        0) {
      run.outputs_bitwise_equal = false;
    }
  }
  return run;
}

std::string bench_csv(const BenchRun& run) {
  std::ostringstream os;
  os << "strategy,m,n,k,batch,reps,median_s,min_s,throughput_macs_per_s\n";
  for (const auto& r : run.results) {
    os << strategy_name(r.strategy) << "," << r.scenario.m << "," << r.scenario.n << ","
       << r.scenario.k << "," << r.scenario.batch << "," << r.scenario.reps << ","
       << r.median_seconds << "," << r.min_seconds << "," << r.throughput << "\n";
  }
  return os.str();
}

std::string bench_text(const BenchRun& run) {
  std::ostringstream os;
  for (const auto& r : run.results) {
    os << strategy_name(r.strategy) << " " << r.scenario.batch << "x(" << r.scenario.m << "x"
       << r.scenario.k << " * " << r.scenario.k << "x" << r.scenario.n << ")"
       << " median " << r.median_seconds * 1e6 << " us, min " << r.min_seconds * 1e6
       << " us, throughput " << r.throughput / 1e9 << " GMAC/s\n";
  }
  os << "outputs bitwise equal: " << (run.outputs_bitwise_equal ? "yes" : "no") << "\n";
  return os.str();
}

}  // namespace rootconv
