#pragma once

#include <map>
#include <string>
#include <vector>

#include "rootconv/net.hpp"
#include "rootconv/rng.hpp"

namespace rootconv {

/// Parameters and optimizer state of one layer. Conv filters are
/// (c2, c1/g, kh, kw); linear weights (out, in, 1, 1). Every parameter
/// tensor has a same-shaped momentum buffer.
struct LayerState {
  Tensor w;
  std::vector<float> b;
  Tensor w_mom;
  std::vector<float> b_mom;
  BatchNormState bn;
  std::vector<float> gamma_mom, beta_mom;
};

struct ModelState {
  std::map<std::string, LayerState> layers;
  u64 step = 0;
  u64 rng_seed = 0;
  u64 rng_counter = 0;
};

struct GradientSet {
  std::map<std::string, Tensor> gw;
  std::map<std::string, std::vector<float>> gb;
  std::map<std::string, std::vector<float>> ggamma;
  std::map<std::string, std::vector<float>> gbeta;
};

/// Executable network: a validated NetSpec plus its parameter state.
class Model {
 public:
  explicit Model(NetSpec net);

  const NetSpec& net() const { return net_; }
  ModelState& state() { return state_; }
  const ModelState& state() const { return state_; }

  /// He initialization with per-group fan-in: conv weights are
  /// Normal(0, sqrt(2 / (kh*kw*c1/g))).
  void init_params(u64 seed);

  /// Runs the DAG; returns the declared output activation. When
  /// `activations` is given, every layer's output (and "input") is kept.
  Tensor forward(const Tensor& x, bool training,
                 std::map<std::string, Tensor>* activations = nullptr);

  struct LossGrads {
    float loss = 0;
    Tensor logits;
    GradientSet grads;
  };

  /// Forward, softmax cross-entropy at the logits layer, full backward.
  /// Aborts with a diagnostic naming the first non-finite layer if the
  /// loss diverges.
  LossGrads forward_backward(const Tensor& x, const std::vector<int>& labels);

  /// v <- mu*v + g (+ wd*w for weights); p <- p - lr*v.
  void sgd_step(const GradientSet& g, float lr, float momentum, float weight_decay);

  void save_checkpoint(const std::string& dir) const;
  static Model load_checkpoint(const std::string& dir);

  /// Parameter float count actually stored (weights, biases, bn affine).
  u64 param_count() const;

 private:
  NetSpec net_;
  ModelState state_;
};

}  // namespace rootconv
