#include "rootconv/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace rootconv {

namespace fs = std::filesystem;

namespace {
constexpr i64 kRecordBytes = 3073;  // 1 label + 3*32*32 pixels
constexpr i64 kImageBytes = 3072;
}  // namespace

Dataset load_cifar10_bin(const std::vector<std::string>& paths) {
  std::vector<unsigned char> bytes;
  for (const auto& p : paths) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw FormatError("cannot open: " + p);
    std::vector<unsigned char> file((std::istreambuf_iterator<char>(is)),
                                    std::istreambuf_iterator<char>());
    if (file.size() % kRecordBytes != 0) {
      const i64 offset = (static_cast<i64>(file.size()) / kRecordBytes) * kRecordBytes;
      throw FormatError(p + ": length " + std::to_string(file.size()) +
                        " is not a multiple of 3073; truncated record at byte offset " +
                        std::to_string(offset));
    }
    bytes.insert(bytes.end(), file.begin(), file.end());
  }
  const i64 n = static_cast<i64>(bytes.size()) / kRecordBytes;
  Dataset ds;
  ds.images = Tensor(Shape(std::max<i64>(n, 1), 3, 32, 32));
  ds.labels.resize(n);
  for (i64 i = 0; i < n; ++i) {
    const unsigned char* rec = bytes.data() + i * kRecordBytes;
    ds.labels[i] = rec[0];
    float* dst = ds.images.data() + i * kImageBytes;
    for (i64 j = 0; j < kImageBytes; ++j) {
      dst[j] = static_cast<float>(rec[1 + j]) / 255.0f;
    }
  }
  ds.classes = 10;
  return ds;
}

void write_cifar10_bin(const Dataset& ds, const std::string& path) {
  if (ds.images.shape().c() != 3 || ds.images.shape().h() != 32 || ds.images.shape().w() != 32) {
    throw ConfigError("write_cifar10_bin: images must be (n,3,32,32)");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open for write: " + path);
  for (i64 i = 0; i < ds.size(); ++i) {
    unsigned char label = static_cast<unsigned char>(ds.labels[i]);
    os.write(reinterpret_cast<const char*>(&label), 1);
    const float* src = ds.images.data() + i * kImageBytes;
    for (i64 j = 0; j < kImageBytes; ++j) {
      const float v = std::clamp(src[j], 0.0f, 1.0f);
      unsigned char b = static_cast<unsigned char>(std::lround(v * 255.0f));
      os.write(reinterpret_cast<const char*>(&b), 1);
    }
  }
}

std::vector<float> compute_channel_mean(const Dataset& ds) {
  const i64 c = ds.images.shape().c();
  const i64 per = ds.images.shape().h() * ds.images.shape().w();
  std::vector<double> acc(c, 0.0);
  for (i64 n = 0; n < ds.size(); ++n) {
    for (i64 ch = 0; ch < c; ++ch) {
      const float* plane = ds.images.data() + (n * c + ch) * per;
      for (i64 p = 0; p < per; ++p) acc[ch] += plane[p];
    }
  }
  std::vector<float> mean(c);
  for (i64 ch = 0; ch < c; ++ch) {
    mean[ch] = static_cast<float>(acc[ch] / (static_cast<double>(ds.size()) * per));
  }
  return mean;
}

void subtract_channel_mean(Dataset& ds, const std::vector<float>& mean) {
  const i64 c = ds.images.shape().c();
  if (static_cast<i64>(mean.size()) != c) {
    throw ShapeError("subtract_channel_mean: mean length != channels");
  }
  const i64 per = ds.images.shape().h() * ds.images.shape().w();
  for (i64 n = 0; n < ds.size(); ++n) {
    for (i64 ch = 0; ch < c; ++ch) {
      float* plane = ds.images.data() + (n * c + ch) * per;
      for (i64 p = 0; p < per; ++p) plane[p] -= mean[ch];
    }
  }
  ds.channel_mean = mean;
}

Tensor augment_batch(const Tensor& batch, const AugmentConfig& cfg, Rng& rng) {
  const i64 n = batch.shape().n(), c = batch.shape().c();
  const i64 h = batch.shape().h(), w = batch.shape().w();
  Tensor out(batch.shape());
  const i64 pad = cfg.pad_crop ? cfg.pad : 0;
  for (i64 i = 0; i < n; ++i) {
    // Crop offset into the zero-padded frame; (pad, pad) recovers the
    // original image.
    const i64 oy = cfg.pad_crop ? static_cast<i64>(rng.uniform_below(2 * pad + 1)) : pad;
    const i64 ox = cfg.pad_crop ? static_cast<i64>(rng.uniform_below(2 * pad + 1)) : pad;
    const bool flip = cfg.mirror && rng.coin();
    for (i64 ch = 0; ch < c; ++ch) {
      const float* src = batch.data() + (i * c + ch) * h * w;
      float* dst = out.data() + (i * c + ch) * h * w;
      for (i64 y = 0; y < h; ++y) {
        const i64 sy = y + oy - pad;
        for (i64 x = 0; x < w; ++x) {
          const i64 sx_raw = x + ox - pad;
          const i64 sx = flip ? (w - 1 - sx_raw) : sx_raw;
          const bool in = sy >= 0 && sy < h && sx >= 0 && sx < w;
          dst[y * w + x] = in ? src[sy * w + sx] : 0.0f;
        }
      }
    }
  }
  return out;
}

namespace {

Dataset synth_separable(const SyntheticParams& p, u64 seed) {
  Rng rng(seed, 1);
  Dataset ds;
  ds.images = Tensor(Shape(p.n, p.c, p.h, p.w));
  ds.labels.resize(p.n);
  ds.classes = 2;
  const i64 dim = p.c * p.h * p.w;
  // Fixed unit direction, constant within each channel so the functional is
  // translation invariant (representable by conv + global pooling nets).
  // Labels sit at +-margin along it and the noise is projected out of it,
  // so the separator classifies every sample.
  std::vector<float> u(dim);
  Rng dir_rng(seed, 2);
  double norm = 0;
  const i64 per = p.h * p.w;
  for (i64 c = 0; c < p.c; ++c) {
    const float level = static_cast<float>(dir_rng.normal()) + (c % 2 == 0 ? 0.5f : -0.5f);
    for (i64 i = 0; i < per; ++i) u[c * per + i] = level;
  }
  for (i64 i = 0; i < dim; ++i) norm += static_cast<double>(u[i]) * u[i];
  norm = std::sqrt(norm);
  for (i64 i = 0; i < dim; ++i) u[i] = static_cast<float>(u[i] / norm);

  for (i64 s = 0; s < p.n; ++s) {
    const int label = static_cast<int>(s % 2);
    const float sign = label == 1 ? 1.0f : -1.0f;
    float* x = ds.images.data() + s * dim;
    double dot = 0;
    for (i64 i = 0; i < dim; ++i) {
      x[i] = static_cast<float>(p.noise * rng.normal());
      dot += static_cast<double>(x[i]) * u[i];
    }
    for (i64 i = 0; i < dim; ++i) {
      x[i] = x[i] - static_cast<float>(dot) * u[i] + sign * static_cast<float>(p.margin) * u[i];
    }
    ds.labels[s] = label;
  }
  return ds;
}

Dataset synth_noise(const SyntheticParams& p, u64 seed) {
  Rng rng(seed, 3);
  Dataset ds;
  ds.images = Tensor(Shape(p.n, p.c, p.h, p.w));
  ds.labels.assign(p.n, 0);
  ds.classes = std::max<i64>(p.classes, 1);
  for (i64 i = 0; i < ds.images.numel(); ++i) {
    ds.images.data()[i] = static_cast<float>(rng.normal());
  }
  return ds;
}

Dataset synth_group_correlated(const SyntheticParams& p, u64 seed) {
  Rng rng(seed, 4);
  Dataset ds;
  ds.images = Tensor(Shape(p.n, p.c, p.h, p.w));
  ds.labels.assign(p.n, 0);
  ds.classes = std::max<i64>(p.classes, 1);
  auto blocks = p.blocks;
  if (blocks.empty()) blocks.push_back({0, p.c});
  const double rho = p.block_corr;
  const float a = static_cast<float>(std::sqrt(rho));
  const float b = static_cast<float>(std::sqrt(1.0 - rho));
  const i64 per = p.h * p.w;
  for (i64 s = 0; s < p.n; ++s) {
    for (i64 pos = 0; pos < per; ++pos) {
      for (const auto& [begin, end] : blocks) {
        const float latent = static_cast<float>(rng.normal());
        for (i64 ch = begin; ch < end; ++ch) {
          const float own = static_cast<float>(rng.normal());
          ds.images.data()[(s * p.c + ch) * per + pos] = a * latent + b * own;
        }
      }
    }
  }
  return ds;
}

}  // namespace

Dataset make_synthetic(const std::string& kind, const SyntheticParams& params, u64 seed) {
  if (kind == "separable-2class") return synth_separable(params, seed);
  if (kind == "independent-noise") return synth_noise(params, seed);
  if (kind == "group-correlated") return synth_group_correlated(params, seed);
  throw ConfigError("make_synthetic: unknown kind '" + kind + "'");
}

Dataset load_dataset(const std::string& source) {
  if (source.rfind("synth:", 0) == 0) {
    const auto rest = source.substr(6);
    const auto colon = rest.find(':');
    const std::string kind = colon == std::string::npos ? rest : rest.substr(0, colon);
    const u64 seed = colon == std::string::npos ? 0 : std::stoull(rest.substr(colon + 1));
    SyntheticParams p;
    if (kind == "separable-2class") {
      p.n = 512;
      p.h = p.w = 8;
    } else {
      p.n = 1024;
      p.c = 8;
      p.h = p.w = 8;
      p.blocks = {{0, 4}, {4, 8}};
    }
    return make_synthetic(kind, p, seed);
  }
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(source)) {
    if (entry.path().extension() == ".bin") files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw FormatError("no .bin batches in " + source);
  return load_cifar10_bin(files);
}

}  // namespace rootconv
