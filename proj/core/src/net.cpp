#include "rootconv/net.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace rootconv {

using nlohmann::json;

std::string layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::kConv: return "conv";
    case LayerKind::kPool: return "pool";
    case LayerKind::kBatchNorm: return "batchnorm";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kLinear: return "linear";
    case LayerKind::kConcat: return "concat";
    case LayerKind::kAddShortcut: return "add-shortcut";
    case LayerKind::kSoftmax: return "softmax";
  }
  return "?";
}

LayerKind layer_kind_from_name(const std::string& s) {
  if (s == "conv") return LayerKind::kConv;
  if (s == "pool") return LayerKind::kPool;
  if (s == "batchnorm") return LayerKind::kBatchNorm;
  if (s == "relu") return LayerKind::kRelu;
  if (s == "linear") return LayerKind::kLinear;
  if (s == "concat") return LayerKind::kConcat;
  if (s == "add-shortcut") return LayerKind::kAddShortcut;
  if (s == "softmax") return LayerKind::kSoftmax;
  throw FormatError("unknown layer kind: " + s);
}

const LayerSpec& NetSpec::layer(const std::string& n) const {
  for (const auto& l : layers) {
    if (l.name == n) return l;
  }
  throw ConfigError("no layer named " + n + " in net " + name);
}

LayerSpec& NetSpec::layer(const std::string& n) {
  for (auto& l : layers) {
    if (l.name == n) return l;
  }
  throw ConfigError("no layer named " + n + " in net " + name);
}

bool NetSpec::has_layer(const std::string& n) const {
  for (const auto& l : layers) {
    if (l.name == n) return true;
  }
  return false;
}

std::map<std::string, Shape> validate_net(const NetSpec& net) {
  std::map<std::string, Shape> shapes;
  shapes["input"] = net.input;
  std::set<std::string> seen{"input"};

  for (const auto& l : net.layers) {
    if (l.name.empty() || seen.count(l.name)) {
      throw ConfigError("layer name empty or duplicated: '" + l.name + "'");
    }
    if (l.inputs.empty()) {
      throw ConfigError("layer " + l.name + ": no inputs");
    }
    std::vector<Shape> in_shapes;
    for (const auto& src : l.inputs) {
      auto it = shapes.find(src);
      if (it == shapes.end()) {
        throw ConfigError("layer " + l.name + ": input '" + src +
                          "' does not name the network input or an earlier layer");
      }
      in_shapes.push_back(it->second);
    }
    const Shape& in = in_shapes.front();
    Shape out = in;
    switch (l.kind) {
      case LayerKind::kConv: {
        if (in_shapes.size() != 1) throw ConfigError("layer " + l.name + ": conv takes one input");
        if (l.groups < 1) throw ConfigError("layer " + l.name + ": groups must be >= 1");
        if (in.c() % l.groups != 0 || l.out_channels % l.groups != 0) {
          throw ConfigError("layer " + l.name + ": channels (" + std::to_string(in.c()) + "->" +
                            std::to_string(l.out_channels) + ") not divisible by groups " +
                            std::to_string(l.groups));
        }
        i64 ho = conv_out_extent(in.h(), l.kh, l.stride, l.pad);
        i64 wo = conv_out_extent(in.w(), l.kw, l.stride, l.pad);
        if (ho < 1 || wo < 1) {
          throw ShapeError("layer " + l.name + ": empty output extent");
        }
        out = Shape(in.n(), l.out_channels, ho, wo);
        break;
      }
      case LayerKind::kPool: {
        if (in_shapes.size() != 1) throw ConfigError("layer " + l.name + ": pool takes one input");
        i64 ho, wo;
        if (l.pool_global) {
          ho = wo = 1;
        } else {
          ho = pool_out_extent(in.h(), l.kh, l.stride, l.pad, l.pool_ceil);
          wo = pool_out_extent(in.w(), l.kw, l.stride, l.pad, l.pool_ceil);
        }
        if (ho < 1 || wo < 1) throw ShapeError("layer " + l.name + ": empty output extent");
        out = Shape(in.n(), in.c(), ho, wo);
        break;
      }
      case LayerKind::kBatchNorm:
      case LayerKind::kRelu:
      case LayerKind::kSoftmax: {
        if (in_shapes.size() != 1) {
          throw ConfigError("layer " + l.name + ": takes one input");
        }
        out = in;
        break;
      }
      case LayerKind::kLinear: {
        if (in_shapes.size() != 1) throw ConfigError("layer " + l.name + ": linear takes one input");
        out = Shape(in.n(), l.out_channels, 1, 1);
        break;
      }
      case LayerKind::kConcat: {
        i64 c = 0;
        for (size_t i = 0; i < in_shapes.size(); ++i) {
          if (in_shapes[i].h() != in.h() || in_shapes[i].w() != in.w() ||
              in_shapes[i].n() != in.n()) {
            throw ShapeError("layer " + l.name + ": concat input '" + l.inputs[i] +
                             "' spatial/batch extents disagree (" + in_shapes[i].str() + " vs " +
                             in.str() + ")");
          }
          c += in_shapes[i].c();
        }
        out = Shape(in.n(), c, in.h(), in.w());
        break;
      }
      case LayerKind::kAddShortcut: {
        if (in_shapes.size() != 2) {
          throw ConfigError("layer " + l.name + ": add-shortcut takes two inputs");
        }
        if (in_shapes[0] != in_shapes[1]) {
          throw ShapeError("layer " + l.name + ": shortcut operands disagree on edge " +
                           l.inputs[0] + " vs " + l.inputs[1] + " (" + in_shapes[0].str() +
                           " vs " + in_shapes[1].str() + ")");
        }
        out = in;
        break;
      }
    }
    shapes[l.name] = out;
    seen.insert(l.name);
  }
  if (!net.output.empty() && !shapes.count(net.output)) {
    throw ConfigError("declared output '" + net.output + "' is not a layer");
  }
  return shapes;
}

void resolve_net(NetSpec& net) {
  auto shapes = validate_net(net);
  for (auto& l : net.layers) {
    i64 c = 0;
    if (l.kind == LayerKind::kConcat) {
      for (const auto& src : l.inputs) c += shapes.at(src).c();
    } else {
      const Shape& in = shapes.at(l.inputs.front());
      c = (l.kind == LayerKind::kLinear) ? in.c() * in.h() * in.w() : in.c();
    }
    l.in_channels = c;
  }
}

std::string net_to_json(const NetSpec& net) {
  json j;
  j["name"] = net.name;
  j["input"] = {net.input.n(), net.input.c(), net.input.h(), net.input.w()};
  if (!net.output.empty()) j["output"] = net.output;
  json layers = json::array();
  for (const auto& l : net.layers) {
    json jl;
    jl["name"] = l.name;
    jl["kind"] = layer_kind_name(l.kind);
    jl["inputs"] = l.inputs;
    if (l.kind == LayerKind::kConv) {
      jl["kernel"] = {l.kh, l.kw};
      jl["out"] = l.out_channels;
      jl["stride"] = l.stride;
      jl["pad"] = l.pad;
      jl["groups"] = l.groups;
      if (l.bias) jl["bias"] = true;
    } else if (l.kind == LayerKind::kPool) {
      jl["op"] = l.pool_op == PoolOp::kMax ? "max" : "avg";
      if (l.pool_global) {
        jl["global"] = true;
      } else {
        jl["kernel"] = {l.kh, l.kw};
        jl["stride"] = l.stride;
        jl["pad"] = l.pad;
        jl["ceil"] = l.pool_ceil;
        if (l.pool_count_exclude_pad) jl["count_exclude_pad"] = true;
      }
    } else if (l.kind == LayerKind::kLinear) {
      jl["out"] = l.out_channels;
      if (l.bias) jl["bias"] = true;
    } else if (l.kind == LayerKind::kBatchNorm) {
      jl["affine"] = l.bn_affine;
    }
    layers.push_back(jl);
  }
  j["layers"] = layers;
  return j.dump(2);
}

NetSpec net_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("net spec: invalid JSON: ") + e.what());
  }
  NetSpec net;
  net.name = j.value("name", "");
  if (!j.contains("input") || !j["input"].is_array() || j["input"].size() != 4) {
    throw FormatError("net spec: 'input' must be [n,c,h,w]");
  }
  net.input = Shape(j["input"][0], j["input"][1], j["input"][2], j["input"][3]);
  net.output = j.value("output", "");
  if (!j.contains("layers") || !j["layers"].is_array()) {
    throw FormatError("net spec: missing 'layers' array");
  }
  for (const auto& jl : j["layers"]) {
    LayerSpec l;
    l.name = jl.at("name").get<std::string>();
    l.kind = layer_kind_from_name(jl.at("kind").get<std::string>());
    l.inputs = jl.at("inputs").get<std::vector<std::string>>();
    if (jl.contains("kernel")) {
      l.kh = jl["kernel"][0];
      l.kw = jl["kernel"][1];
    }
    l.out_channels = jl.value("out", i64(0));
    l.stride = jl.value("stride", i64(1));
    l.pad = jl.value("pad", i64(0));
    l.groups = jl.value("groups", i64(1));
    l.bias = jl.value("bias", false);
    l.bn_affine = jl.value("affine", true);
    if (l.kind == LayerKind::kPool) {
      l.pool_op = jl.value("op", std::string("max")) == "avg" ? PoolOp::kAvg : PoolOp::kMax;
      l.pool_global = jl.value("global", false);
      l.pool_ceil = jl.value("ceil", true);
      l.pool_count_exclude_pad = jl.value("count_exclude_pad", false);
    }
    net.layers.push_back(std::move(l));
  }
  return net;
}

void save_net(const NetSpec& net, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open for write: " + path);
  os << net_to_json(net) << "\n";
}

NetSpec load_net(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return net_from_json(ss.str());
}

}  // namespace rootconv
