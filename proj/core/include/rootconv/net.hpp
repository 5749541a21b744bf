#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rootconv/common.hpp"
#include "rootconv/ops.hpp"
#include "rootconv/tensor.hpp"

namespace rootconv {

enum class LayerKind { kConv, kPool, kBatchNorm, kRelu, kLinear, kConcat, kAddShortcut, kSoftmax };

std::string layer_kind_name(LayerKind k);
LayerKind layer_kind_from_name(const std::string& s);

/// Declarative description of one layer. `inputs` name earlier layers (or
/// "input" for the network input); in-channels are derived during
/// validation, never stored in files.
struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::kConv;
  i64 kh = 1, kw = 1;
  i64 out_channels = 0;  // conv/linear only
  i64 stride = 1;
  i64 pad = 0;
  i64 groups = 1;
  std::vector<std::string> inputs;

  bool bias = false;          // conv/linear
  bool bn_affine = true;      // batchnorm
  PoolOp pool_op = PoolOp::kMax;
  bool pool_global = false;
  bool pool_ceil = true;
  bool pool_count_exclude_pad = false;

  // Resolved by validation.
  i64 in_channels = 0;

  bool is_spatial_conv() const {
    return kind == LayerKind::kConv && !(kh == 1 && kw == 1);
  }
};

/// An ordered layer list forming a DAG: every layer may only consume the
/// network input or layers listed before it.
struct NetSpec {
  std::string name;
  Shape input{1, 3, 32, 32};
  std::vector<LayerSpec> layers;
  std::string output;  // defaults to the last layer

  const LayerSpec& layer(const std::string& name) const;
  LayerSpec& layer(const std::string& name);
  bool has_layer(const std::string& name) const;
  std::string output_layer() const { return output.empty() ? layers.back().name : output; }
};

/// Checks name uniqueness, reference order, divisibility, and channel
/// agreement along every edge; returns per-layer output shapes (keyed by
/// layer name, plus "input"). Errors name the offending layer.
std::map<std::string, Shape> validate_net(const NetSpec& net);

/// validate_net plus writing the derived in-channel counts back into the
/// layer specs.
void resolve_net(NetSpec& net);

std::string net_to_json(const NetSpec& net);
NetSpec net_from_json(const std::string& json_text);
void save_net(const NetSpec& net, const std::string& path);
NetSpec load_net(const std::string& path);

}  // namespace rootconv
