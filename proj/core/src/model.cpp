#include "rootconv/model.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rootconv/zoo.hpp"

namespace rootconv {

using nlohmann::json;
namespace fs = std::filesystem;

Model::Model(NetSpec net) : net_(std::move(net)) {
  resolve_net(net_);
  for (const auto& l : net_.layers) {
    if (l.kind == LayerKind::kConv) {
      LayerState st;
      st.w = Tensor(Shape(l.out_channels, l.in_channels / l.groups, l.kh, l.kw));
      st.w_mom = Tensor(st.w.shape());
      if (l.bias) {
        st.b.assign(l.out_channels, 0.f);
        st.b_mom.assign(l.out_channels, 0.f);
      }
      state_.layers.emplace(l.name, std::move(st));
    } else if (l.kind == LayerKind::kLinear) {
      LayerState st;
      st.w = Tensor(Shape(l.out_channels, l.in_channels, 1, 1));
      st.w_mom = Tensor(st.w.shape());
      if (l.bias) {
        st.b.assign(l.out_channels, 0.f);
        st.b_mom.assign(l.out_channels, 0.f);
      }
      state_.layers.emplace(l.name, std::move(st));
    } else if (l.kind == LayerKind::kBatchNorm) {
      LayerState st;
      st.bn = BatchNormState::make(l.in_channels, l.bn_affine);
      if (l.bn_affine) {
        st.gamma_mom.assign(l.in_channels, 0.f);
        st.beta_mom.assign(l.in_channels, 0.f);
      }
      state_.layers.emplace(l.name, std::move(st));
    }
  }
}

void Model::init_params(u64 seed) {
  Rng rng(seed);
  for (const auto& l : net_.layers) {
    auto it = state_.layers.find(l.name);
    if (it == state_.layers.end()) continue;
    LayerState& st = it->second;
    if (l.kind == LayerKind::kConv || l.kind == LayerKind::kLinear) {
      const i64 fan_in = (l.kind == LayerKind::kConv) ? l.kh * l.kw * (l.in_channels / l.groups)
                                                      : l.in_channels;
      const float std_dev = std::sqrt(2.0f / static_cast<float>(fan_in));
      for (i64 i = 0; i < st.w.numel(); ++i) {
        st.w.data()[i] = std_dev * static_cast<float>(rng.normal());
      }
      std::fill(st.b.begin(), st.b.end(), 0.f);
      std::fill(st.w_mom.raw().begin(), st.w_mom.raw().end(), 0.f);
      std::fill(st.b_mom.begin(), st.b_mom.end(), 0.f);
    } else if (l.kind == LayerKind::kBatchNorm) {
      st.bn = BatchNormState::make(l.in_channels, l.bn_affine);
    }
  }
  state_.step = 0;
  state_.rng_seed = seed;
  state_.rng_counter = 0;
}

namespace {

PoolGeom pool_geom(const LayerSpec& l) {
  PoolGeom g;
  g.op = l.pool_op;
  g.kh = l.kh;
  g.kw = l.kw;
  g.stride = l.stride;
  g.pad = l.pad;
  g.ceil_mode = l.pool_ceil;
  g.count_exclude_pad = l.pool_count_exclude_pad;
  g.global = l.pool_global;
  return g;
}

ConvWeights conv_weights_view(const LayerState& st, const LayerSpec& l) {
  ConvWeights w;
  w.filters = st.w;
  w.bias = st.b;
  w.groups = l.groups;
  return w;
}

void add_into(Tensor& acc, const Tensor& g) {
  for (i64 i = 0; i < acc.numel(); ++i) acc.data()[i] += g.data()[i];
}

}  // namespace

Tensor Model::forward(const Tensor& x, bool training, std::map<std::string, Tensor>* activations) {
  std::map<std::string, Tensor> local;
  std::map<std::string, Tensor>& acts = activations ? *activations : local;
  acts.clear();
  acts.emplace("input", x);
  for (const auto& l : net_.layers) {
    const Tensor& in = acts.at(l.inputs.front());
    Tensor out;
    switch (l.kind) {
      case LayerKind::kConv: {
        const LayerState& st = state_.layers.at(l.name);
        out = conv_forward(in, conv_weights_view(st, l), l.stride, l.pad);
        break;
      }
      case LayerKind::kPool:
        out = pool_forward(in, pool_geom(l));
        break;
      case LayerKind::kBatchNorm: {
        LayerState& st = state_.layers.at(l.name);
        out = batchnorm_forward(in, st.bn, training);
        break;
      }
      case LayerKind::kRelu:
        out = relu(in);
        break;
      case LayerKind::kLinear: {
        const LayerState& st = state_.layers.at(l.name);
        out = linear_forward(in, st.w, st.b);
        break;
      }
      case LayerKind::kConcat: {
        const Shape s0 = in.shape();
        i64 c = 0;
        for (const auto& src : l.inputs) c += acts.at(src).shape().c();
        out = Tensor(Shape(s0.n(), c, s0.h(), s0.w()));
        i64 c_off = 0;
        const i64 hw = s0.h() * s0.w();
        for (const auto& src : l.inputs) {
          const Tensor& t = acts.at(src);
          for (i64 n = 0; n < s0.n(); ++n) {
            std::copy(t.data() + n * t.shape().c() * hw,
                      t.data() + (n + 1) * t.shape().c() * hw,
                      out.data() + (n * c + c_off) * hw);
          }
          c_off += t.shape().c();
        }
        break;
      }
      case LayerKind::kAddShortcut:
        out = add(acts.at(l.inputs[0]), acts.at(l.inputs[1]));
        break;
      case LayerKind::kSoftmax:
        out = softmax(in);
        break;
    }
    acts.emplace(l.name, std::move(out));
  }
  return acts.at(net_.output_layer());
}

Model::LossGrads Model::forward_backward(const Tensor& x, const std::vector<int>& labels) {
  std::map<std::string, Tensor> acts;
  std::map<std::string, BatchNormCacheT<float>> bn_caches;

  acts.emplace("input", x);
  for (const auto& l : net_.layers) {
    const Tensor& in = acts.at(l.inputs.front());
    Tensor out;
    switch (l.kind) {
      case LayerKind::kConv: {
        const LayerState& st = state_.layers.at(l.name);
        out = conv_forward(in, conv_weights_view(st, l), l.stride, l.pad);
        break;
      }
      case LayerKind::kPool:
        out = pool_forward(in, pool_geom(l));
        break;
      case LayerKind::kBatchNorm: {
        LayerState& st = state_.layers.at(l.name);
        BatchNormCacheT<float> cache;
        out = batchnorm_forward(in, st.bn, /*training=*/true, &cache);
        bn_caches.emplace(l.name, std::move(cache));
        break;
      }
      case LayerKind::kRelu:
        out = relu(in);
        break;
      case LayerKind::kLinear: {
        const LayerState& st = state_.layers.at(l.name);
        out = linear_forward(in, st.w, st.b);
        break;
      }
      case LayerKind::kConcat: {
        const Shape s0 = in.shape();
        i64 c = 0;
        for (const auto& src : l.inputs) c += acts.at(src).shape().c();
        out = Tensor(Shape(s0.n(), c, s0.h(), s0.w()));
        i64 c_off = 0;
        const i64 hw = s0.h() * s0.w();
        for (const auto& src : l.inputs) {
          const Tensor& t = acts.at(src);
          for (i64 n = 0; n < s0.n(); ++n) {
            std::copy(t.data() + n * t.shape().c() * hw,
                      t.data() + (n + 1) * t.shape().c() * hw,
                      out.data() + (n * c + c_off) * hw);
          }
          c_off += t.shape().c();
        }
        break;
      }
      case LayerKind::kAddShortcut:
        out = add(acts.at(l.inputs[0]), acts.at(l.inputs[1]));
        break;
      case LayerKind::kSoftmax:
        out = in;  // loss is computed on the logits directly
        break;
    }
    acts.emplace(l.name, std::move(out));
  }

  const std::string logits_name = logits_layer(net_);
  Tensor logits = acts.at(logits_name);
  if (logits.shape().h() != 1 || logits.shape().w() != 1) {
    logits = logits.reshaped(
        Shape(logits.shape().n(), logits.shape().c() * logits.shape().h() * logits.shape().w(), 1,
              1));
  }
  auto loss_res = softmax_cross_entropy(logits, labels);
  if (!std::isfinite(loss_res.loss)) {
    for (const auto& l : net_.layers) {
      const Tensor& a = acts.at(l.name);
      for (i64 i = 0; i < a.numel(); ++i) {
        if (!std::isfinite(a.data()[i])) {
          throw std::runtime_error("training diverged: first non-finite activation in layer '" +
                                   l.name + "'");
        }
      }
    }
    throw std::runtime_error("training diverged: non-finite loss");
  }

  LossGrads result;
  result.loss = loss_res.loss;
  result.logits = logits;

  std::map<std::string, Tensor> grad;
  grad.emplace(logits_name, loss_res.grad.reshaped(acts.at(logits_name).shape()));

  for (auto it = net_.layers.rbegin(); it != net_.layers.rend(); ++it) {
    const LayerSpec& l = *it;
    auto git = grad.find(l.name);
    if (git == grad.end()) continue;  // not on the loss path
    const Tensor gy = std::move(git->second);
    grad.erase(git);

    auto propagate = [&grad](const std::string& src, Tensor g) {
      if (src == "input") return;
      auto slot = grad.find(src);
      if (slot == grad.end()) {
        grad.emplace(src, std::move(g));
      } else {
        add_into(slot->second, g);
      }
    };

    switch (l.kind) {
      case LayerKind::kConv: {
        const LayerState& st = state_.layers.at(l.name);
        const Tensor& in = acts.at(l.inputs.front());
        const bool need_gx = l.inputs.front() != "input";
        auto g = conv_backward(in, conv_weights_view(st, l), l.stride, l.pad, gy, need_gx);
        result.grads.gw.emplace(l.name, std::move(g.gw));
        if (!st.b.empty()) result.grads.gb.emplace(l.name, std::move(g.gbias));
        if (need_gx) propagate(l.inputs.front(), std::move(g.gx));
        break;
      }
      case LayerKind::kPool:
        propagate(l.inputs.front(), pool_backward(acts.at(l.inputs.front()), pool_geom(l), gy));
        break;
      case LayerKind::kBatchNorm: {
        const LayerState& st = state_.layers.at(l.name);
        auto g = batchnorm_backward(acts.at(l.inputs.front()), st.bn, bn_caches.at(l.name), gy);
        if (st.bn.affine) {
          result.grads.ggamma.emplace(l.name, std::move(g.ggamma));
          result.grads.gbeta.emplace(l.name, std::move(g.gbeta));
        }
        propagate(l.inputs.front(), std::move(g.gx));
        break;
      }
      case LayerKind::kRelu:
        propagate(l.inputs.front(), relu_grad(acts.at(l.inputs.front()), gy));
        break;
      case LayerKind::kLinear: {
        const LayerState& st = state_.layers.at(l.name);
        auto g = linear_backward(acts.at(l.inputs.front()), st.w, gy);
        result.grads.gw.emplace(l.name, std::move(g.gw));
        if (!st.b.empty()) result.grads.gb.emplace(l.name, std::move(g.gbias));
        if (l.inputs.front() != "input") propagate(l.inputs.front(), std::move(g.gx));
        break;
      }
      case LayerKind::kConcat: {
        i64 c_off = 0;
        const i64 hw = gy.shape().h() * gy.shape().w();
        const i64 n = gy.shape().n();
        const i64 c_total = gy.shape().c();
        for (const auto& src : l.inputs) {
          const i64 c = acts.at(src).shape().c();
          Tensor part(Shape(n, c, gy.shape().h(), gy.shape().w()));
          for (i64 b = 0; b < n; ++b) {
            std::copy(gy.data() + (b * c_total + c_off) * hw,
                      gy.data() + (b * c_total + c_off + c) * hw, part.data() + b * c * hw);
          }
          propagate(src, std::move(part));
          c_off += c;
        }
        break;
      }
      case LayerKind::kAddShortcut: {
        propagate(l.inputs[0], gy);
        propagate(l.inputs[1], gy);
        break;
      }
      case LayerKind::kSoftmax:
        propagate(l.inputs.front(), gy);
        break;
    }
  }
  return result;
}

void Model::sgd_step(const GradientSet& g, float lr, float momentum, float weight_decay) {
  for (auto& [name, st] : state_.layers) {
    if (auto it = g.gw.find(name); it != g.gw.end()) {
      const Tensor& gw = it->second;
      for (i64 i = 0; i < st.w.numel(); ++i) {
        float v = momentum * st.w_mom.data()[i] + gw.data()[i] + weight_decay * st.w.data()[i];
        st.w_mom.data()[i] = v;
        st.w.data()[i] -= lr * v;
      }
    }
    if (auto it = g.gb.find(name); it != g.gb.end()) {
      const auto& gb = it->second;
      for (size_t i = 0; i < st.b.size(); ++i) {
        float v = momentum * st.b_mom[i] + gb[i];
        st.b_mom[i] = v;
        st.b[i] -= lr * v;
      }
    }
    if (auto it = g.ggamma.find(name); it != g.ggamma.end()) {
      const auto& gg = it->second;
      const auto& gb = g.gbeta.at(name);
      for (size_t i = 0; i < st.bn.gamma.size(); ++i) {
        float vg = momentum * st.gamma_mom[i] + gg[i];
        st.gamma_mom[i] = vg;
        st.bn.gamma[i] -= lr * vg;
        float vb = momentum * st.beta_mom[i] + gb[i];
        st.beta_mom[i] = vb;
        st.bn.beta[i] -= lr * vb;
      }
    }
  }
  ++state_.step;
}

u64 Model::param_count() const {
  u64 total = 0;
  for (const auto& l : net_.layers) {
    auto it = state_.layers.find(l.name);
    if (it == state_.layers.end()) continue;
    const LayerState& st = it->second;
    if (l.kind == LayerKind::kConv || l.kind == LayerKind::kLinear) {
      total += static_cast<u64>(st.w.numel()) + st.b.size();
    } else if (l.kind == LayerKind::kBatchNorm) {
      total += st.bn.gamma.size() + st.bn.beta.size();
    }
  }
  return total;
}

// ---------------------------------------------------------------------------
// Checkpoints: manifest JSON + one RTN1 file per tensor.
// ---------------------------------------------------------------------------

namespace {

Tensor vec_tensor(const std::vector<float>& v) {
  Tensor t(Shape(1, static_cast<i64>(v.size()), 1, 1));
  std::copy(v.begin(), v.end(), t.data());
  return t;
}

std::vector<float> tensor_vec(const Tensor& t) {
  return std::vector<float>(t.data(), t.data() + t.numel());
}

}  // namespace

void Model::save_checkpoint(const std::string& dir) const {
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = "rootconv-checkpoint-v1";
  manifest["net"] = json::parse(net_to_json(net_));
  manifest["step"] = state_.step;
  manifest["rng"] = {{"seed", state_.rng_seed}, {"counter", state_.rng_counter}};
  json tensors = json::object();

  auto emit = [&](const std::string& key, const Tensor& t) {
    const std::string file = key + ".rtn";
    save_tensor(t, (fs::path(dir) / file).string());
    tensors[key] = file;
  };

  for (const auto& l : net_.layers) {
    auto it = state_.layers.find(l.name);
    if (it == state_.layers.end()) continue;
    const LayerState& st = it->second;
    if (l.kind == LayerKind::kConv || l.kind == LayerKind::kLinear) {
      emit(l.name + ".w", st.w);
      emit(l.name + ".w_mom", st.w_mom);
      if (!st.b.empty()) {
        emit(l.name + ".b", vec_tensor(st.b));
        emit(l.name + ".b_mom", vec_tensor(st.b_mom));
      }
    } else if (l.kind == LayerKind::kBatchNorm) {
      emit(l.name + ".bn.mean", vec_tensor(st.bn.running_mean));
      emit(l.name + ".bn.var", vec_tensor(st.bn.running_var));
      if (st.bn.affine) {
        emit(l.name + ".bn.gamma", vec_tensor(st.bn.gamma));
        emit(l.name + ".bn.beta", vec_tensor(st.bn.beta));
        emit(l.name + ".bn.gamma_mom", vec_tensor(st.gamma_mom));
        emit(l.name + ".bn.beta_mom", vec_tensor(st.beta_mom));
      }
    }
  }
  manifest["tensors"] = tensors;
  std::ofstream os(fs::path(dir) / "manifest.json");
  if (!os) throw FormatError("cannot write checkpoint manifest in " + dir);
  os << manifest.dump(2) << "\n";
}

Model Model::load_checkpoint(const std::string& dir) {
  std::ifstream is(fs::path(dir) / "manifest.json");
  if (!is) throw FormatError("no checkpoint manifest in " + dir);
  json manifest;
  try {
    is >> manifest;
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("checkpoint manifest: ") + e.what());
  }
  Model m(net_from_json(manifest.at("net").dump()));
  m.state_.step = manifest.value("step", u64(0));
  if (manifest.contains("rng")) {
    m.state_.rng_seed = manifest["rng"].value("seed", u64(0));
    m.state_.rng_counter = manifest["rng"].value("counter", u64(0));
  }
  const json& tensors = manifest.at("tensors");
  auto fetch = [&](const std::string& key) {
    return load_tensor((fs::path(dir) / tensors.at(key).get<std::string>()).string());
  };
  for (const auto& l : m.net_.layers) {
    auto it = m.state_.layers.find(l.name);
    if (it == m.state_.layers.end()) continue;
    LayerState& st = it->second;
    if (l.kind == LayerKind::kConv || l.kind == LayerKind::kLinear) {
      st.w = fetch(l.name + ".w");
      st.w_mom = fetch(l.name + ".w_mom");
      if (l.bias) {
        st.b = tensor_vec(fetch(l.name + ".b"));
        st.b_mom = tensor_vec(fetch(l.name + ".b_mom"));
      }
    } else if (l.kind == LayerKind::kBatchNorm) {
      st.bn.running_mean = tensor_vec(fetch(l.name + ".bn.mean"));
      st.bn.running_var = tensor_vec(fetch(l.name + ".bn.var"));
      if (l.bn_affine) {
        st.bn.gamma = tensor_vec(fetch(l.name + ".bn.gamma"));
        st.bn.beta = tensor_vec(fetch(l.name + ".bn.beta"));
        st.gamma_mom = tensor_vec(fetch(l.name + ".bn.gamma_mom"));
        st.beta_mom = tensor_vec(fetch(l.name + ".bn.beta_mom"));
      }
    }
  }
  return m;
}

}  // namespace rootconv
