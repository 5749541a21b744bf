#pragma once

#include <string>
#include <vector>

#include "rootconv/common.hpp"

namespace rootconv {

enum class GemmStrategy { kLooped, kBatched };

std::string strategy_name(GemmStrategy s);

struct BenchScenario {
  i64 m = 16, n = 16, k = 16;
  i64 batch = 64;
  i64 reps = 5;  // timed samples; one extra warm-up run is not counted
};

struct BenchResult {
  GemmStrategy strategy;
  BenchScenario scenario;
  std::vector<double> seconds;  // one entry per timed rep
  double median_seconds = 0;
  double min_seconds = 0;
  double throughput = 0;  // multiply-adds per second at the median
};

struct BenchRun {
  std::vector<BenchResult> results;
  bool outputs_bitwise_equal = true;  // across strategies
};

/// Times the batch of small multiplications under each strategy on
/// identical inputs. Numeric outputs are required to agree bitwise between
/// strategies; medians over >= 5 reps are reported.
BenchRun bench_gemm(const BenchScenario& scenario, const std::vector<GemmStrategy>& strategies,
                    u64 seed = 0);

std::string bench_csv(const BenchRun& run);
std::string bench_text(const BenchRun& run);

}  // namespace rootconv
