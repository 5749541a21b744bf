#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rootconv/net.hpp"

namespace rootconv {

struct CostOptions {
  // Count batchnorm/relu/pool/softmax work too (normally they contribute
  // zero; conv dominates and the reference figures assume that).
  bool strict = false;
  // Count only conv/linear weight floats, dropping biases and batchnorm
  // scale/shift.
  bool params_conv_only = false;
};

struct CostRow {
  std::string name;
  std::string kind;
  u64 flops = 0;   // multiply-adds for one input sample
  u64 params = 0;  // stored floats
  Shape out;
  double flops_ratio = 1.0;  // variant/baseline, set by compare()
  double params_ratio = 1.0;
  bool has_ratio = false;
};

struct CostReport {
  std::string net_name;
  Shape input;
  std::vector<CostRow> rows;
  u64 total_flops = 0;
  u64 total_params = 0;
  double total_flops_ratio = 1.0;
  double total_params_ratio = 1.0;
  bool has_ratio = false;
};

/// Multiply-adds and parameter floats of one conv layer for a single input
/// sample: flops = Ho*Wo*c2*kh*kw*(c1/g), params = c2*kh*kw*(c1/g) [+ c2].
std::pair<u64, u64> conv_cost(const LayerSpec& layer, const Shape& in_shape);

/// Per-layer cost table of the whole net at the given input resolution
/// (batch extent ignored; figures are per sample).
CostReport net_cost(const NetSpec& net, const Shape& input, const CostOptions& opts = {});

/// Annotates `variant` rows with variant/baseline ratios. Requires the two
/// reports to describe structurally identical nets (same layer names).
CostReport compare(const CostReport& baseline, const CostReport& variant);

std::string report_text(const CostReport& r);
std::string report_csv(const CostReport& r);

}  // namespace rootconv
