#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rootconv/rng.hpp"
#include "rootconv/tensor.hpp"

namespace rootconv {

struct Dataset {
  Tensor images;  // (n, c, h, w)
  std::vector<int> labels;
  std::vector<float> channel_mean;  // computed from the training split
  std::string split;
  i64 classes = 10;

  i64 size() const { return images.shape().n(); }
};

/// CIFAR-10 binary batches: records of 1 label byte + 3072 pixel bytes
/// (R plane, G plane, B plane, row-major), pixels scaled to [0,1].
Dataset load_cifar10_bin(const std::vector<std::string>& paths);

/// Writes `ds` in the same binary layout (values clamped to [0,1] bytes).
void write_cifar10_bin(const Dataset& ds, const std::string& path);

std::vector<float> compute_channel_mean(const Dataset& ds);
void subtract_channel_mean(Dataset& ds, const std::vector<float>& mean);

struct AugmentConfig {
  bool pad_crop = true;
  bool mirror = true;
  i64 pad = 4;
};

/// Training-path augmentation: zero-pad, random crop back to the original
/// extent, mirror with p=1/2. The eval path is the identity (center crop of
/// the padded frame).
Tensor augment_batch(const Tensor& batch, const AugmentConfig& cfg, Rng& rng);

struct SyntheticParams {
  i64 n = 512;
  i64 c = 3;
  i64 h = 8;
  i64 w = 8;
  i64 classes = 2;
  double margin = 1.0;
  double noise = 1.0;
  std::vector<std::pair<i64, i64>> blocks;  // [begin, end) channel ranges
  double block_corr = 0.7;
};

/// kinds: "separable-2class" (labels +-margin along a fixed direction, noise
/// orthogonal to it), "independent-noise" (iid unit normals),
/// "group-correlated" (channels correlated only within declared blocks).
Dataset make_synthetic(const std::string& kind, const SyntheticParams& params, u64 seed);

/// Accepts either a directory of CIFAR-10 *.bin batches or a
/// "synth:<kind>:<seed>" address.
Dataset load_dataset(const std::string& source);

}  // namespace rootconv
