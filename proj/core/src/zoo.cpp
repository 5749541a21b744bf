#include "rootconv/zoo.hpp"

#include <array>

namespace rootconv {

ArchVariant ArchVariant::parse(const std::string& s) {
  ArchVariant v;
  if (s == "baseline" || s == "orig" || s.empty()) {
    v.degree = 1;
    return v;
  }
  auto dash = s.find('-');
  if (dash == std::string::npos) {
    throw ConfigError("variant must be 'baseline' or '<topology>-<degree>', got '" + s + "'");
  }
  v.topology = topology_from_name(s.substr(0, dash));
  v.degree = std::stoll(s.substr(dash + 1));
  if (v.degree < 2) throw ConfigError("variant degree must be >= 2, got '" + s + "'");
  return v;
}

std::string ArchVariant::str() const {
  if (baseline()) return "baseline";
  return topology_name(topology) + "-" + std::to_string(degree);
}

namespace {

std::vector<i64> schedule_counts(const ArchVariant& v, i64 positions) {
  if (v.baseline()) return std::vector<i64>(positions, 1);
  return make_schedule(v.topology, v.degree, positions).counts;
}

struct NetBuilder {
  NetSpec net;
  std::string last = "input";

  std::string conv(const std::string& name, i64 k, i64 out, i64 stride, i64 pad, i64 groups,
                   const std::string& input, bool bias = false) {
    LayerSpec l;
    l.name = name;
    l.kind = LayerKind::kConv;
    l.kh = l.kw = k;
    l.out_channels = out;
    l.stride = stride;
    l.pad = pad;
    l.groups = groups;
    l.bias = bias;
    l.inputs = {input};
    net.layers.push_back(l);
    last = name;
    return name;
  }

  std::string bn(const std::string& of, bool affine = true) {
    LayerSpec l;
    l.name = of + ".bn";
    l.kind = LayerKind::kBatchNorm;
    l.bn_affine = affine;
    l.inputs = {of};
    net.layers.push_back(l);
    last = l.name;
    return l.name;
  }

  std::string relu(const std::string& of) {
    LayerSpec l;
    l.name = of + ".relu";
    l.kind = LayerKind::kRelu;
    l.inputs = {of};
    net.layers.push_back(l);
    last = l.name;
    return l.name;
  }

  // conv + bn + relu chain, returns the relu output name
  std::string cbr(const std::string& name, i64 k, i64 out, i64 stride, i64 pad, i64 groups,
                  const std::string& input, bool affine = true) {
    conv(name, k, out, stride, pad, groups, input);
    bn(name, affine);
    return relu(name + ".bn");
  }

  std::string maxpool(const std::string& name, i64 k, i64 stride, i64 pad,
                      const std::string& input) {
    LayerSpec l;
    l.name = name;
    l.kind = LayerKind::kPool;
    l.pool_op = PoolOp::kMax;
    l.kh = l.kw = k;
    l.stride = stride;
    l.pad = pad;
    l.pool_ceil = true;
    l.inputs = {input};
    net.layers.push_back(l);
    last = name;
    return name;
  }

  std::string avgpool(const std::string& name, i64 k, i64 stride, i64 pad,
                      const std::string& input) {
    LayerSpec l;
    l.name = name;
    l.kind = LayerKind::kPool;
    l.pool_op = PoolOp::kAvg;
    l.kh = l.kw = k;
    l.stride = stride;
    l.pad = pad;
    l.pool_ceil = true;
    l.inputs = {input};
    net.layers.push_back(l);
    last = name;
    return name;
  }

  std::string global_avgpool(const std::string& name, const std::string& input) {
    LayerSpec l;
    l.name = name;
    l.kind = LayerKind::kPool;
    l.pool_op = PoolOp::kAvg;
    l.pool_global = true;
    l.inputs = {input};
    net.layers.push_back(l);
    last = name;
    return name;
  }

  std::string linear(const std::string& name, i64 out, const std::string& input) {
    LayerSpec l;
    l.name = name;
    l.kind = LayerKind::kLinear;
    l.out_channels = out;
    l.bias = true;
    l.inputs = {input};
    net.layers.push_back(l);
    last = name;
    return name;
  }

  std::string concat(const std::string& name, const std::vector<std::string>& inputs) {
    LayerSpec l;
    l.name = name;
    l.kind = LayerKind::kConcat;
    l.inputs = inputs;
    net.layers.push_back(l);
    last = name;
    return name;
  }

  std::string add_shortcut(const std::string& name, const std::string& a, const std::string& b) {
    LayerSpec l;
    l.name = name;
    l.kind = LayerKind::kAddShortcut;
    l.inputs = {a, b};
    net.layers.push_back(l);
    last = name;
    return name;
  }

  std::string softmax(const std::string& name, const std::string& input) {
    LayerSpec l;
    l.name = name;
    l.kind = LayerKind::kSoftmax;
    l.inputs = {input};
    net.layers.push_back(l);
    last = name;
    return name;
  }
};

}  // namespace

NetSpec make_nin(const ArchVariant& v, i64 width_div, i64 classes) {
  auto counts = schedule_counts(v, 3);
  const i64 d = width_div;
  NetBuilder b;
  b.net.name = "nin-" + v.str() + (d > 1 ? "-w" + std::to_string(d) : "");
  b.net.input = Shape(1, 3, 32, 32);

  std::string t = b.cbr("conv1a", 5, 192 / d, 1, 2, counts[0], "input");
  t = b.cbr("conv1b", 1, 160 / d, 1, 0, 1, t);
  t = b.cbr("conv1c", 1, 96 / d, 1, 0, 1, t);
  t = b.maxpool("pool1", 3, 2, 0, t);

  t = b.cbr("conv2a", 5, 192 / d, 1, 2, counts[1], t);
  t = b.cbr("conv2b", 1, 192 / d, 1, 0, 1, t);
  t = b.cbr("conv2c", 1, 192 / d, 1, 0, 1, t);
  t = b.maxpool("pool2", 3, 2, 0, t);

  t = b.cbr("conv3a", 3, 192 / d, 1, 1, counts[2], t);
  t = b.cbr("conv3b", 1, 192 / d, 1, 0, 1, t);
  t = b.conv("conv3c", 1, classes, 1, 0, 1, t, /*bias=*/true);
  t = b.global_avgpool("pool3", t);
  b.softmax("prob", t);
  b.net.output = "prob";
  validate_net(b.net);
  return b.net;
}

namespace {

// Post-activation bottleneck (1x1 -> 3x3 -> 1x1), stride on the first 1x1,
// projection shortcut on the first block of each stage.
// res2a, res2b, ... for short stages; res4a, res4b1, res4b2, ... once the
// alphabet would run out.
std::string block_id(const std::string& prefix, i64 i, i64 blocks) {
  if (blocks <= 26) return prefix + static_cast<char>('a' + i);
  if (i == 0) return prefix + "a";
  return prefix + "b" + std::to_string(i);
}

std::string resnet_stage_v1(NetBuilder& b, const std::string& prefix, std::string in, i64 blocks,
                            i64 width, i64 out, i64 stride, i64 groups) {
  for (i64 i = 0; i < blocks; ++i) {
    const std::string bn = block_id(prefix, i, blocks);
    const i64 s = (i == 0) ? stride : 1;
    std::string shortcut = in;
    if (i == 0) {
      b.conv(bn + ".proj", 1, out, s, 0, 1, in);
      shortcut = b.bn(bn + ".proj");
    }
    std::string t = b.cbr(bn + ".conv1", 1, width, s, 0, 1, in);
    t = b.cbr(bn + ".conv2", 3, width, 1, 1, groups, t);
    b.conv(bn + ".conv3", 1, out, 1, 0, 1, t);
    t = b.bn(bn + ".conv3");
    b.add_shortcut(bn + ".add", t, shortcut);
    in = b.relu(bn + ".add");
  }
  return in;
}

// Pre-activation bottleneck, stride on the 3x3, raw-input projection.
std::string resnet_stage_preact(NetBuilder& b, const std::string& prefix, std::string in,
                                i64 blocks, i64 width, i64 out, i64 stride, i64 groups) {
  auto named_bn = [&b](const std::string& name, const std::string& input) {
    LayerSpec l;
    l.name = name;
    l.kind = LayerKind::kBatchNorm;
    l.inputs = {input};
    b.net.layers.push_back(l);
    return name;
  };
  for (i64 i = 0; i < blocks; ++i) {
    const std::string bn = block_id(prefix, i, blocks);
    const i64 s = (i == 0) ? stride : 1;
    std::string shortcut = in;
    if (i == 0) {
      b.conv(bn + ".proj", 1, out, s, 0, 1, in);
      shortcut = bn + ".proj";
    }
    std::string t = b.relu(named_bn(bn + ".bn1", in));
    t = b.conv(bn + ".conv1", 1, width, 1, 0, 1, t);
    t = b.relu(named_bn(bn + ".bn2", t));
    t = b.conv(bn + ".conv2", 3, width, s, 1, groups, t);
    t = b.relu(named_bn(bn + ".bn3", t));
    t = b.conv(bn + ".conv3", 1, out, 1, 0, 1, t);
    b.add_shortcut(bn + ".add", t, shortcut);
    in = bn + ".add";
  }
  return in;
}

NetSpec make_resnet(const ArchVariant& v, i64 width_div, i64 classes, bool preact,
                    const std::array<i64, 4>& blocks, const std::string& label) {
  auto counts = schedule_counts(v, 5);
  const i64 d = width_div;
  NetBuilder b;
  b.net.name = label + "-" + v.str() + (d > 1 ? "-w" + std::to_string(d) : "");
  b.net.input = Shape(1, 3, 224, 224);

  std::string t = b.cbr("conv1", 7, 64 / d, 2, 3, counts[0], "input");
  t = b.maxpool("pool1", 3, 2, 0, t);

  const std::array<i64, 4> widths{64 / d, 128 / d, 256 / d, 512 / d};
  const std::array<i64, 4> outs{256 / d, 512 / d, 1024 / d, 2048 / d};
  const std::array<i64, 4> strides{1, 2, 2, 2};
  for (int s = 0; s < 4; ++s) {
    const std::string prefix = "res" + std::to_string(s + 2);
    if (preact) {
      t = resnet_stage_preact(b, prefix, t, blocks[s], widths[s], outs[s], strides[s],
                              counts[s + 1]);
    } else {
      t = resnet_stage_v1(b, prefix, t, blocks[s], widths[s], outs[s], strides[s], counts[s + 1]);
    }
  }
  if (preact) {
    LayerSpec l;
    l.name = "final.bn";
    l.kind = LayerKind::kBatchNorm;
    l.inputs = {t};
    b.net.layers.push_back(l);
    t = b.relu("final.bn");
  }
  t = b.global_avgpool("pool5", t);
  t = b.linear("fc", classes, t);
  b.softmax("prob", t);
  b.net.output = "prob";
  validate_net(b.net);
  return b.net;
}

}  // namespace

NetSpec make_resnet50(const ArchVariant& v, i64 width_div, i64 classes) {
  if (!v.baseline() && v.topology == Topology::kRoot &&
      (v.degree < 2 || v.degree > 64)) {
    throw ConfigError("resnet50: unsupported degree " + std::to_string(v.degree));
  }
  return make_resnet(v, width_div, classes, /*preact=*/false, {3, 4, 6, 3}, "resnet50");
}

NetSpec make_resnet200(const ArchVariant& v, i64 width_div, i64 classes) {
  if (!v.baseline() && v.topology == Topology::kRoot &&
      (v.degree < 2 || v.degree > 64)) {
    throw ConfigError("resnet200: unsupported degree " + std::to_string(v.degree));
  }
  return make_resnet(v, width_div, classes, /*preact=*/true, {3, 24, 36, 3}, "resnet200");
}

namespace {

struct InceptionCfg {
  i64 c1, c3r, c3, c5r, c5, cp;
};

std::string inception(NetBuilder& b, const std::string& name, const std::string& in,
                      const InceptionCfg& c, i64 groups) {
  std::string b1 = b.cbr(name + ".1x1", 1, c.c1, 1, 0, 1, in, /*affine=*/false);
  std::string r3 = b.cbr(name + ".3x3_reduce", 1, c.c3r, 1, 0, 1, in, false);
  std::string b3 = b.cbr(name + ".3x3", 3, c.c3, 1, 1, groups, r3, false);
  std::string r5 = b.cbr(name + ".5x5_reduce", 1, c.c5r, 1, 0, 1, in, false);
  std::string b5 = b.cbr(name + ".5x5", 5, c.c5, 1, 2, groups, r5, false);
  std::string p = b.maxpool(name + ".pool", 3, 1, 1, in);
  std::string bp = b.cbr(name + ".pool_proj", 1, c.cp, 1, 0, 1, p, false);
  return b.concat(name + ".concat", {b1, b3, b5, bp});
}

void googlenet_aux(NetBuilder& b, const std::string& name, const std::string& from, i64 width_div,
                   i64 classes) {
  const i64 d = width_div;
  std::string t = b.avgpool(name + ".pool", 5, 3, 0, from);
  t = b.cbr(name + ".conv", 1, 128 / d, 1, 0, 1, t, false);
  t = b.linear(name + ".fc1", 1024 / d, t);
  t = b.relu(t);
  t = b.linear(name + ".fc2", classes, t);
  b.softmax(name + ".prob", t);
}

}  // namespace

NetSpec make_googlenet(const ArchVariant& v, bool with_aux, i64 width_div, i64 classes) {
  if (!v.baseline() && v.topology == Topology::kRoot && (v.degree < 2 || v.degree > 16)) {
    throw ConfigError("googlenet: unsupported degree " + std::to_string(v.degree));
  }
  auto counts = schedule_counts(v, 5);
  const i64 d = width_div;
  NetBuilder b;
  b.net.name = "googlenet-" + v.str() + (with_aux ? "-aux" : "") +
               (d > 1 ? "-w" + std::to_string(d) : "");
  b.net.input = Shape(1, 3, 224, 224);

  std::string t = b.cbr("conv1", 7, 64 / d, 2, 3, counts[0], "input", false);
  t = b.maxpool("pool1", 3, 2, 0, t);
  t = b.cbr("conv2_reduce", 1, 64 / d, 1, 0, 1, t, false);
  t = b.cbr("conv2", 3, 192 / d, 1, 1, counts[1], t, false);
  t = b.maxpool("pool2", 3, 2, 0, t);

  auto cfg = [d](i64 c1, i64 c3r, i64 c3, i64 c5r, i64 c5, i64 cp) {
    return InceptionCfg{c1 / d, c3r / d, c3 / d, c5r / d, c5 / d, cp / d};
  };
  t = inception(b, "incp3a", t, cfg(64, 96, 128, 16, 32, 32), counts[2]);
  t = inception(b, "incp3b", t, cfg(128, 128, 192, 32, 96, 64), counts[2]);
  t = b.maxpool("pool3", 3, 2, 0, t);
  t = inception(b, "incp4a", t, cfg(192, 96, 208, 16, 48, 64), counts[3]);
  std::string aux1_from = t;
  t = inception(b, "incp4b", t, cfg(160, 112, 224, 24, 64, 64), counts[3]);
  t = inception(b, "incp4c", t, cfg(128, 128, 256, 24, 64, 64), counts[3]);
  t = inception(b, "incp4d", t, cfg(112, 144, 288, 32, 64, 64), counts[3]);
  std::string aux2_from = t;
  t = inception(b, "incp4e", t, cfg(256, 160, 320, 32, 128, 128), counts[3]);
  t = b.maxpool("pool4", 3, 2, 0, t);
  t = inception(b, "incp5a", t, cfg(256, 160, 320, 32, 128, 128), counts[4]);
  t = inception(b, "incp5b", t, cfg(384, 192, 384, 48, 128, 128), counts[4]);
  t = b.global_avgpool("pool5", t);
  t = b.linear("fc", classes, t);
  b.softmax("prob", t);
  if (with_aux) {
    googlenet_aux(b, "aux1", aux1_from, d, classes);
    googlenet_aux(b, "aux2", aux2_from, d, classes);
  }
  b.net.output = "prob";
  validate_net(b.net);
  return b.net;
}

NetSpec make_arch(const std::string& arch, const ArchVariant& v) {
  if (arch == "nin") return make_nin(v);
  if (arch == "nin-quarter") return make_nin(v, 4);
  if (arch == "resnet50") return make_resnet50(v);
  if (arch == "resnet200") return make_resnet200(v);
  if (arch == "googlenet") return make_googlenet(v);
  if (arch == "googlenet-aux") return make_googlenet(v, true);
  throw ConfigError("unknown architecture '" + arch +
                    "' (expected nin, nin-quarter, resnet50, resnet200, googlenet)");
}

std::string logits_layer(const NetSpec& net) {
  const std::string out = net.output_layer();
  const LayerSpec& l = net.layer(out);
  if (l.kind == LayerKind::kSoftmax) return l.inputs.front();
  return out;
}

}  // namespace rootconv
