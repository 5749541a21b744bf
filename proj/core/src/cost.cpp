#include "rootconv/cost.hpp"

#include <iomanip>
#include <sstream>

namespace rootconv {

std::pair<u64, u64> conv_cost(const LayerSpec& layer, const Shape& in_shape) {
  if (layer.kind != LayerKind::kConv) {
    throw ConfigError("conv_cost: layer " + layer.name + " is not a conv");
  }
  const i64 c1 = in_shape.c();
  const i64 g = layer.groups;
  if (g < 1 || c1 % g != 0 || layer.out_channels % g != 0) {
    throw ConfigError("conv_cost: layer " + layer.name + " channels not divisible by groups");
  }
  const i64 ho = conv_out_extent(in_shape.h(), layer.kh, layer.stride, layer.pad);
  const i64 wo = conv_out_extent(in_shape.w(), layer.kw, layer.stride, layer.pad);
  if (ho < 1 || wo < 1) throw ShapeError("conv_cost: layer " + layer.name + " empty output");
  const u64 filter_dim = static_cast<u64>(layer.kh) * layer.kw * (c1 / g);
  const u64 flops = static_cast<u64>(ho) * wo * layer.out_channels * filter_dim;
  u64 params = static_cast<u64>(layer.out_channels) * filter_dim;
  if (layer.bias) params += layer.out_channels;
  return {flops, params};
}

CostReport net_cost(const NetSpec& net, const Shape& input, const CostOptions& opts) {
  NetSpec sized = net;
  sized.input = Shape(1, input.c(), input.h(), input.w());
  auto shapes = validate_net(sized);

  CostReport rep;
  rep.net_name = net.name;
  rep.input = sized.input;
  for (const auto& l : sized.layers) {
    CostRow row;
    row.name = l.name;
    row.kind = layer_kind_name(l.kind);
    row.out = shapes.at(l.name);
    const Shape in = shapes.at(l.inputs.front());
    switch (l.kind) {
      case LayerKind::kConv: {
        auto [flops, params] = conv_cost(l, in);
        row.flops = flops;
        if (opts.params_conv_only) {
          params = static_cast<u64>(l.out_channels) * l.kh * l.kw * (in.c() / l.groups);
        }
        row.params = params;
        break;
      }
      case LayerKind::kLinear: {
        const u64 in_dim = static_cast<u64>(in.c()) * in.h() * in.w();
        row.flops = in_dim * l.out_channels;
        row.params = in_dim * l.out_channels;
        if (l.bias && !opts.params_conv_only) row.params += l.out_channels;
        break;
      }
      case LayerKind::kBatchNorm: {
        if (l.bn_affine && !opts.params_conv_only) row.params = 2 * static_cast<u64>(in.c());
        if (opts.strict) row.flops = 2ull * in.c() * in.h() * in.w();
        break;
      }
      case LayerKind::kPool: {
        if (opts.strict) {
          const i64 kh = l.pool_global ? in.h() : l.kh;
          const i64 kw = l.pool_global ? in.w() : l.kw;
          row.flops = static_cast<u64>(row.out.h()) * row.out.w() * row.out.c() * kh * kw;
        }
        break;
      }
      case LayerKind::kRelu:
      case LayerKind::kAddShortcut: {
        if (opts.strict) row.flops = static_cast<u64>(in.c()) * in.h() * in.w();
        break;
      }
      case LayerKind::kSoftmax: {
        if (opts.strict) row.flops = 3ull * in.c() * in.h() * in.w();
        break;
      }
      case LayerKind::kConcat:
        break;
    }
    rep.total_flops += row.flops;
    rep.total_params += row.params;
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

CostReport compare(const CostReport& baseline, const CostReport& variant) {
  if (baseline.rows.size() != variant.rows.size()) {
    throw ConfigError("compare: reports have different layer counts (" +
                      std::to_string(baseline.rows.size()) + " vs " +
                      std::to_string(variant.rows.size()) + ")");
  }
  CostReport out = variant;
  for (size_t i = 0; i < out.rows.size(); ++i) {
    const CostRow& b = baseline.rows[i];
    CostRow& v = out.rows[i];
    if (b.name != v.name) {
      throw ConfigError("compare: layer name mismatch at row " + std::to_string(i) + ": '" +
                        b.name + "' vs '" + v.name + "'");
    }
    v.flops_ratio = b.flops == 0 ? 1.0 : static_cast<double>(v.flops) / b.flops;
    v.params_ratio = b.params == 0 ? 1.0 : static_cast<double>(v.params) / b.params;
    v.has_ratio = true;
  }
  out.total_flops_ratio =
      baseline.total_flops == 0 ? 1.0 : static_cast<double>(out.total_flops) / baseline.total_flops;
  out.total_params_ratio = baseline.total_params == 0
                               ? 1.0
                               : static_cast<double>(out.total_params) / baseline.total_params;
  out.has_ratio = true;
  return out;
}

std::string report_text(const CostReport& r) {
  std::ostringstream os;
  os << "# " << r.net_name << " @ " << r.input.str() << "\n";
  os << std::left << std::setw(24) << "layer" << std::setw(12) << "kind" << std::right
     << std::setw(14) << "flops" << std::setw(12) << "params" << "  out";
  if (r.has_ratio) os << std::right << std::setw(12) << "flops_r" << std::setw(10) << "params_r";
  os << "\n";
  for (const auto& row : r.rows) {
    os << std::left << std::setw(24) << row.name << std::setw(12) << row.kind << std::right
       << std::setw(14) << row.flops << std::setw(12) << row.params << "  "
       << row.out.str();
    if (r.has_ratio) {
      os << std::fixed << std::setprecision(4) << std::setw(12) << row.flops_ratio << std::setw(10)
         << row.params_ratio;
      os.unsetf(std::ios::fixed);
    }
    os << "\n";
  }
  os << std::left << std::setw(24) << "TOTAL" << std::setw(12) << "" << std::right << std::setw(14)
     << r.total_flops << std::setw(12) << r.total_params;
  if (r.has_ratio) {
    os << "  " << std::fixed << std::setprecision(4) << "flops_ratio=" << r.total_flops_ratio
       << " (" << std::setprecision(1) << (r.total_flops_ratio - 1.0) * 100.0 << "%)"
       << std::setprecision(4) << " params_ratio=" << r.total_params_ratio << " ("
       << std::setprecision(1) << (r.total_params_ratio - 1.0) * 100.0 << "%)";
  }
  os << "\n";
  return os.str();
}

std::string report_csv(const CostReport& r) {
  std::ostringstream os;
  os << "layer,flops,params,out_n,out_c,out_h,out_w";
  if (r.has_ratio) os << ",flops_ratio,params_ratio";
  os << "\n";
  for (const auto& row : r.rows) {
    os << row.name << "," << row.flops << "," << row.params << "," << row.out.n() << ","
       << row.out.c() << "," << row.out.h() << "," << row.out.w();
    if (r.has_ratio) {
      os << "," << std::setprecision(10) << row.flops_ratio << "," << row.params_ratio;
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace rootconv
