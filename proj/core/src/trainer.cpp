#include "rootconv/trainer.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "rootconv/zoo.hpp"

namespace rootconv {

float learning_rate_at(const TrainConfig& cfg, i64 epoch) {
  float lr = cfg.lr_schedule.empty() ? 0.1f : cfg.lr_schedule.front().second;
  for (const auto& [from, rate] : cfg.lr_schedule) {
    if (epoch >= from) lr = rate;
  }
  return lr;
}

Dataset take_subset(const Dataset& ds, i64 count) {
  count = std::min(count, ds.size());
  Dataset out;
  const i64 per = ds.images.shape().c() * ds.images.shape().h() * ds.images.shape().w();
  out.images = Tensor(Shape(count, ds.images.shape().c(), ds.images.shape().h(),
                            ds.images.shape().w()));
  std::copy(ds.images.data(), ds.images.data() + count * per, out.images.data());
  out.labels.assign(ds.labels.begin(), ds.labels.begin() + count);
  out.channel_mean = ds.channel_mean;
  out.classes = ds.classes;
  out.split = ds.split;
  return out;
}

std::pair<Tensor, std::vector<int>> gather_batch(const Dataset& ds, const std::vector<i64>& idx) {
  const i64 per = ds.images.shape().c() * ds.images.shape().h() * ds.images.shape().w();
  Tensor batch(Shape(static_cast<i64>(idx.size()), ds.images.shape().c(), ds.images.shape().h(),
                     ds.images.shape().w()));
  std::vector<int> labels(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) {
    std::copy(ds.images.data() + idx[i] * per, ds.images.data() + (idx[i] + 1) * per,
              batch.data() + static_cast<i64>(i) * per);
    labels[i] = ds.labels[idx[i]];
  }
  return {std::move(batch), std::move(labels)};
}

namespace {

i64 count_correct(const Tensor& logits, const std::vector<int>& labels, i64 topk) {
  const i64 n = logits.shape().n();
  const i64 k = logits.shape().c() * logits.shape().h() * logits.shape().w();
  i64 correct = 0;
  for (i64 b = 0; b < n; ++b) {
    const float* row = logits.data() + b * k;
    const float target = row[labels[b]];
    i64 above = 0;
    for (i64 j = 0; j < k; ++j) {
      if (row[j] > target) ++above;
    }
    if (above < topk) ++correct;
  }
  return correct;
}

}  // namespace

std::vector<EpochMetrics> train(Model& model, const Dataset& train_data, const Dataset* eval_data,
                                const TrainConfig& cfg) {
  if (train_data.size() == 0) throw ConfigError("train: empty dataset");
  Rng rng(cfg.seed, /*stream=*/17);
  AugmentConfig aug;
  aug.pad_crop = cfg.augment_pad_crop;
  aug.mirror = cfg.augment_mirror;
  const bool augment = cfg.augment_pad_crop || cfg.augment_mirror;

  std::vector<EpochMetrics> metrics;
  std::vector<i64> order(train_data.size());
  std::iota(order.begin(), order.end(), 0);

  for (i64 epoch = 0; epoch < cfg.epochs; ++epoch) {
    const float lr = learning_rate_at(cfg, epoch);
    rng.shuffle(order);
    double loss_sum = 0;
    i64 batches = 0;
    i64 correct = 0, seen = 0;
    for (i64 begin = 0; begin < train_data.size(); begin += cfg.batch_size) {
      const i64 end = std::min<i64>(begin + cfg.batch_size, train_data.size());
      std::vector<i64> idx(order.begin() + begin, order.begin() + end);
      auto [batch, labels] = gather_batch(train_data, idx);
      if (augment) batch = augment_batch(batch, aug, rng);
      auto out = model.forward_backward(batch, labels);
      model.sgd_step(out.grads, lr, cfg.momentum, cfg.weight_decay);
      loss_sum += out.loss;
      correct += count_correct(out.logits, labels, 1);
      seen += end - begin;
      ++batches;
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.loss = static_cast<float>(loss_sum / std::max<i64>(batches, 1));
    m.train_acc = static_cast<float>(static_cast<double>(correct) / std::max<i64>(seen, 1));
    m.eval_acc = -1.0f;
    if (eval_data && (cfg.eval_each_epoch || epoch == cfg.epochs - 1)) {
      m.eval_acc = static_cast<float>(evaluate(model, *eval_data));
    }
    metrics.push_back(m);
  }
  model.state().rng_seed = cfg.seed;
  model.state().rng_counter = rng.counter();
  return metrics;
}

double evaluate(Model& model, const Dataset& data, i64 topk) {
  if (data.size() == 0) return 0.0;
  const i64 batch_size = 64;
  i64 correct = 0;
  for (i64 begin = 0; begin < data.size(); begin += batch_size) {
    const i64 end = std::min<i64>(begin + batch_size, data.size());
    std::vector<i64> idx(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    auto [batch, labels] = gather_batch(data, idx);
    std::map<std::string, Tensor> acts;
    model.forward(batch, /*training=*/false, &acts);
    const Tensor& logits = acts.at(logits_layer(model.net()));
    correct += count_correct(logits, labels, topk);
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

std::string metrics_csv(const std::vector<EpochMetrics>& metrics) {
  std::ostringstream os;
  os << "epoch,loss,train_acc,eval_acc\n";
  for (const auto& m : metrics) {
    os << m.epoch << "," << m.loss << "," << m.train_acc << ",";
    if (m.eval_acc >= 0) os << m.eval_acc;
    os << "\n";
  }
  return os.str();
}

}  // namespace rootconv
