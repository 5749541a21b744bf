#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rootconv/dataio.hpp"
#include "rootconv/model.hpp"

namespace rootconv {

struct TrainConfig {
  std::vector<std::pair<i64, float>> lr_schedule{{0, 0.1f}};  // (from-epoch, lr)
  float momentum = 0.9f;
  float weight_decay = 1e-4f;
  i64 batch_size = 64;
  i64 epochs = 10;
  u64 seed = 1;
  bool augment_pad_crop = false;
  bool augment_mirror = false;
  bool eval_each_epoch = false;
};

struct EpochMetrics {
  i64 epoch = 0;
  float loss = 0;       // mean train loss over the epoch's batches
  float train_acc = 0;  // on the (augmented) training batches
  float eval_acc = 0;   // -1 when no eval split was given
};

float learning_rate_at(const TrainConfig& cfg, i64 epoch);

/// SGD with momentum and weight decay over the given model. Deterministic
/// for a fixed (net, data, config, seed). The eval split may be null.
std::vector<EpochMetrics> train(Model& model, const Dataset& train_data, const Dataset* eval_data,
                                const TrainConfig& cfg);

/// Top-k accuracy over the dataset in eval mode (identity/center-crop path).
double evaluate(Model& model, const Dataset& data, i64 topk = 1);

std::string metrics_csv(const std::vector<EpochMetrics>& metrics);

/// Copies `count` samples (in order) into a new dataset.
Dataset take_subset(const Dataset& ds, i64 count);

/// Collects rows `indices` of the dataset into a batch tensor + labels.
std::pair<Tensor, std::vector<int>> gather_batch(const Dataset& ds, const std::vector<i64>& idx);

}  // namespace rootconv
