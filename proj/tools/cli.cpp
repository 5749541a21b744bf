#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "rootconv/analysis.hpp"
#include "rootconv/bench.hpp"
#include "rootconv/cost.hpp"
#include "rootconv/dataio.hpp"
#include "rootconv/model.hpp"
#include "rootconv/net.hpp"
#include "rootconv/schedule.hpp"
#include "rootconv/threading.hpp"
#include "rootconv/trainer.hpp"
#include "rootconv/zoo.hpp"

namespace rootconv {
namespace {

namespace fs = std::filesystem;

Shape parse_shape(const std::string& s) {
  Shape out;
  std::stringstream ss(s);
  std::string item;
  int i = 0;
  while (std::getline(ss, item, ',') && i < 4) out.e[i++] = std::stoll(item);
  if (i != 4) throw ConfigError("expected shape n,c,h,w, got '" + s + "'");
  return out;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open for write: " + path);
  os << content;
}

struct CostArgs {
  std::string arch;
  std::string net_file;
  std::string variant = "baseline";
  std::string input;
  std::string csv_path;
  std::string out_path;
  std::string params_mode = "inclusive";
  bool baseline = false;
  bool strict = false;
  bool aux = false;
};

NetSpec build_net(const std::string& arch, const std::string& net_file, const std::string& variant,
                  bool aux) {
  if (!net_file.empty()) return load_net(net_file);
  const ArchVariant v = ArchVariant::parse(variant);
  if (arch == "googlenet") return make_googlenet(v, aux);
  return make_arch(arch, v);
}

int run_cost(const CostArgs& a) {
  NetSpec net = build_net(a.arch, a.net_file, a.variant, a.aux);
  const Shape input = a.input.empty() ? net.input : parse_shape(a.input);
  CostOptions opts;
  opts.strict = a.strict;
  opts.params_conv_only = a.params_mode == "conv-only";
  CostReport rep = net_cost(net, input, opts);
  if (a.baseline) {
    NetSpec base = build_net(a.arch, a.net_file, "baseline", a.aux);
    rep = compare(net_cost(base, input, opts), rep);
  }
  const std::string text = report_text(rep);
  if (a.out_path.empty()) {
    std::cout << text;
  } else {
    write_file(a.out_path, text);
  }
  if (!a.csv_path.empty()) write_file(a.csv_path, report_csv(rep));
  return 0;
}

struct TransformArgs {
  std::string in_file;
  std::string out_file;
  std::string topology = "root";
  i64 degree = 2;
};

int run_transform(const TransformArgs& a) {
  NetSpec net = load_net(a.in_file);
  const auto spatial = spatial_conv_layers(net);
  auto schedule = make_schedule(topology_from_name(a.topology), a.degree,
                                static_cast<i64>(spatial.size()));
  NetSpec out = apply_root_transform(net, schedule);
  validate_net(out);
  save_net(out, a.out_file);
  std::cout << "wrote " << a.out_file << " (" << topology_name(schedule.topology) << "-"
            << a.degree << " over " << spatial.size() << " spatial convs)\n";
  return 0;
}

int run_validate(const std::string& file) {
  NetSpec net = load_net(file);
  auto shapes = validate_net(net);
  std::cout << file << ": valid (" << net.layers.size() << " layers, output "
            << net.output_layer() << " " << shapes.at(net.output_layer()).str() << ")\n";
  return 0;
}

struct TrainArgs {
  std::string arch = "nin-quarter";
  std::string net_file;
  std::string variant = "baseline";
  std::string data;
  std::string eval_data;
  std::string out_dir;
  std::string metrics_path;
  std::string lr_schedule;
  double lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  i64 epochs = 10;
  i64 batch = 64;
  i64 subset = 0;
  u64 seed = 1;
  bool augment = false;
  bool quiet = false;
};

std::vector<std::pair<i64, float>> parse_lr_schedule(const std::string& s, double fallback) {
  if (s.empty()) return {{0, static_cast<float>(fallback)}};
  std::vector<std::pair<i64, float>> sched;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("lr schedule entries are epoch:lr");
    sched.push_back({std::stoll(item.substr(0, colon)), std::stof(item.substr(colon + 1))});
  }
  return sched;
}

int run_train(const TrainArgs& a) {
  Dataset data = load_dataset(a.data);
  if (a.subset > 0) data = take_subset(data, a.subset);
  auto mean = compute_channel_mean(data);
  subtract_channel_mean(data, mean);

  Dataset eval_set;
  const Dataset* eval_ptr = nullptr;
  if (!a.eval_data.empty()) {
    eval_set = load_dataset(a.eval_data);
    subtract_channel_mean(eval_set, mean);
    eval_ptr = &eval_set;
  }

  NetSpec net;
  if (!a.net_file.empty()) {
    net = load_net(a.net_file);
  } else {
    const ArchVariant v = ArchVariant::parse(a.variant);
    net = make_arch(a.arch, v);
  }
  // Size the spec to the dataset.
  net.input = Shape(1, data.images.shape().c(), data.images.shape().h(), data.images.shape().w());
  validate_net(net);

  Model model(net);
  model.init_params(a.seed);

  TrainConfig cfg;
  cfg.lr_schedule = parse_lr_schedule(a.lr_schedule, a.lr);
  cfg.momentum = static_cast<float>(a.momentum);
  cfg.weight_decay = static_cast<float>(a.weight_decay);
  cfg.batch_size = a.batch;
  cfg.epochs = a.epochs;
  cfg.seed = a.seed;
  cfg.augment_pad_crop = a.augment;
  cfg.augment_mirror = a.augment;
  cfg.eval_each_epoch = eval_ptr != nullptr;

  auto metrics = train(model, data, eval_ptr, cfg);
  if (!a.quiet) {
    for (const auto& m : metrics) {
      std::cout << "epoch " << m.epoch << " loss " << m.loss << " train_acc " << m.train_acc;
      if (m.eval_acc >= 0) std::cout << " eval_acc " << m.eval_acc;
      std::cout << "\n";
    }
  }
  if (!a.metrics_path.empty()) write_file(a.metrics_path, metrics_csv(metrics));
  if (!a.out_dir.empty()) {
    model.save_checkpoint(a.out_dir);
    std::cout << "checkpoint written to " << a.out_dir << "\n";
  }
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  i64 subset = 0;
  i64 topk = 1;
};

int run_eval(const EvalArgs& a) {
  Model model = Model::load_checkpoint(a.checkpoint);
  Dataset data = load_dataset(a.data);
  if (a.subset > 0) data = take_subset(data, a.subset);
  auto mean = compute_channel_mean(data);
  subtract_channel_mean(data, mean);
  const double acc = evaluate(model, data, a.topk);
  std::cout << "top-" << a.topk << " accuracy: " << acc << " over " << data.size()
            << " samples\n";
  return 0;
}

struct CovarArgs {
  std::string checkpoint;
  std::string layers;
  std::string out_path;
  std::string csv_path;
  std::string data;
  i64 samples = 64;
  u64 seed = 7;
  bool whiten = false;
  bool correlation = false;
};

int run_covar(const CovarArgs& a) {
  Model model = Model::load_checkpoint(a.checkpoint);
  const auto comma = a.layers.find(',');
  if (comma == std::string::npos) {
    throw ConfigError("--layers expects two comma-separated layer names");
  }
  const std::string layer1 = a.layers.substr(0, comma);
  const std::string layer2 = a.layers.substr(comma + 1);

  Tensor inputs;
  if (a.data.empty() || a.data.rfind("synth:", 0) == 0) {
    const Shape in = model.net().input;
    SyntheticParams p;
    p.n = a.samples;
    p.c = in.c();
    p.h = in.h();
    p.w = in.w();
    u64 seed = a.seed;
    if (!a.data.empty()) {
      const auto pos = a.data.rfind(':');
      if (pos > 5) seed = std::stoull(a.data.substr(pos + 1));
    }
    inputs = make_synthetic("independent-noise", p, seed).images;
  } else {
    Dataset ds = load_dataset(a.data);
    ds = take_subset(ds, a.samples);
    auto mean = compute_channel_mean(ds);
    subtract_channel_mean(ds, mean);
    inputs = ds.images;
  }

  std::map<std::string, Tensor> acts;
  model.forward(inputs, /*training=*/false, &acts);
  if (!acts.count(layer1)) throw ConfigError("unknown layer '" + layer1 + "'");
  if (!acts.count(layer2)) throw ConfigError("unknown layer '" + layer2 + "'");
  const Tensor& fm1 = acts.at(layer1);
  const Tensor& fm2 = acts.at(layer2);
  const i64 th = std::max(fm1.shape().h(), fm2.shape().h());
  const i64 tw = std::max(fm1.shape().w(), fm2.shape().w());
  SampleMatrix s1 = collect_samples(fm1, layer1, th, tw);
  SampleMatrix s2 = collect_samples(fm2, layer2, th, tw);
  center_rows(s1);
  center_rows(s2);
  if (a.correlation) {
    normalize_rows(s1);
    normalize_rows(s2);
  }
  CovarianceMap map =
      a.whiten ? whitened_cross_cov(s1, s2) : cross_cov(s1, s2);
  render_heatmap(map, a.out_path);
  std::cout << "wrote " << a.out_path << " (" << map.m.rows << "x" << map.m.cols
            << (map.whitened ? ", whitened" : "") << (a.correlation ? ", correlation" : "")
            << ")\n";
  if (!a.csv_path.empty()) {
    std::ostringstream os;
    for (i64 i = 0; i < map.m.rows; ++i) {
      for (i64 j = 0; j < map.m.cols; ++j) {
        os << (j ? "," : "") << map.m.at(i, j);
      }
      os << "\n";
    }
    write_file(a.csv_path, os.str());
  }
  return 0;
}

struct BenchArgs {
  std::string dims = "16x16x16";
  std::string strategies = "looped,batched";
  std::string csv_path;
  i64 batch = 64;
  i64 reps = 5;
  u64 seed = 0;
};

int run_bench(const BenchArgs& a) {
  BenchScenario sc;
  {
    std::stringstream ss(a.dims);
    std::string item;
    std::vector<i64> dims;
    while (std::getline(ss, item, 'x')) dims.push_back(std::stoll(item));
    if (dims.size() != 3) throw ConfigError("--dims expects MxNxK");
    sc.m = dims[0];
    sc.n = dims[1];
    sc.k = dims[2];
  }
  sc.batch = a.batch;
  sc.reps = a.reps;
  std::vector<GemmStrategy> strategies;
  std::stringstream ss(a.strategies);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "looped") strategies.push_back(GemmStrategy::kLooped);
    else if (item == "batched") strategies.push_back(GemmStrategy::kBatched);
    else throw ConfigError("unknown strategy '" + item + "'");
  }
  BenchRun run = bench_gemm(sc, strategies, a.seed);
  std::cout << bench_text(run);
  if (!a.csv_path.empty()) write_file(a.csv_path, bench_csv(run));
  return run.outputs_bitwise_equal ? 0 : 1;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"grouped-convolution network engine and architecture analysis"};
  app.require_subcommand(1);

  int threads = 0;
  app.add_option("--threads", threads, "bound on kernel parallelism (0 = auto)");

  CostArgs cost_args;
  auto* cost_cmd = app.add_subcommand("cost", "multiply-add and parameter report for a network");
  cost_cmd->add_option("--arch", cost_args.arch, "built-in architecture");
  cost_cmd->add_option("--net", cost_args.net_file, "net spec JSON instead of --arch");
  cost_cmd->add_option("--variant", cost_args.variant, "baseline|root-N|column-N|tree-N");
  cost_cmd->add_option("--input", cost_args.input, "override input shape n,c,h,w");
  cost_cmd->add_option("--csv", cost_args.csv_path, "write CSV report here");
  cost_cmd->add_option("--out", cost_args.out_path, "write text report here (default stdout)");
  cost_cmd->add_option("--params-mode", cost_args.params_mode, "inclusive|conv-only");
  cost_cmd->add_flag("--baseline", cost_args.baseline, "also report ratios vs the baseline");
  cost_cmd->add_flag("--strict", cost_args.strict, "count batchnorm/relu/pool/softmax too");
  cost_cmd->add_flag("--aux", cost_args.aux, "include googlenet auxiliary towers");

  TransformArgs tr_args;
  auto* tr_cmd = app.add_subcommand("transform", "apply a grouping schedule to a net spec");
  tr_cmd->add_option("--in", tr_args.in_file, "input net JSON")->required();
  tr_cmd->add_option("--out", tr_args.out_file, "output net JSON")->required();
  tr_cmd->add_option("--topology", tr_args.topology, "root|column|tree");
  tr_cmd->add_option("--degree", tr_args.degree, "grouping degree (power of two)");

  std::string validate_file;
  auto* val_cmd = app.add_subcommand("validate", "check a net spec JSON");
  val_cmd->add_option("file", validate_file, "net JSON")->required();

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "desk-scale SGD training");
  train_cmd->add_option("--arch", train_args.arch, "built-in architecture");
  train_cmd->add_option("--net", train_args.net_file, "net spec JSON instead of --arch");
  train_cmd->add_option("--variant", train_args.variant, "baseline|root-N|...");
  train_cmd->add_option("--data", train_args.data, "data dir or synth:<kind>:<seed>")->required();
  train_cmd->add_option("--eval-data", train_args.eval_data, "held-out split");
  train_cmd->add_option("--out", train_args.out_dir, "checkpoint directory");
  train_cmd->add_option("--metrics", train_args.metrics_path, "metrics CSV path");
  train_cmd->add_option("--lr", train_args.lr, "learning rate");
  train_cmd->add_option("--lr-schedule", train_args.lr_schedule, "epoch:lr,epoch:lr,...");
  train_cmd->add_option("--momentum", train_args.momentum, "SGD momentum");
  train_cmd->add_option("--weight-decay", train_args.weight_decay, "L2 penalty");
  train_cmd->add_option("--epochs", train_args.epochs, "epochs");
  train_cmd->add_option("--batch", train_args.batch, "batch size");
  train_cmd->add_option("--subset", train_args.subset, "train on the first N samples");
  train_cmd->add_option("--seed", train_args.seed, "rng seed");
  train_cmd->add_flag("--augment", train_args.augment, "pad-crop + mirror augmentation");
  train_cmd->add_flag("--quiet", train_args.quiet, "suppress per-epoch lines");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "checkpoint dir")->required();
  eval_cmd->add_option("--data", eval_args.data, "data dir or synth:...")->required();
  eval_cmd->add_option("--subset", eval_args.subset, "evaluate on the first N samples");
  eval_cmd->add_option("--topk", eval_args.topk, "top-k accuracy");

  CovarArgs covar_args;
  auto* covar_cmd = app.add_subcommand("covar", "inter-layer covariance heatmap");
  covar_cmd->add_option("--checkpoint", covar_args.checkpoint, "checkpoint dir")->required();
  covar_cmd->add_option("--layers", covar_args.layers, "two layer names, comma separated")
      ->required();
  covar_cmd->add_option("--out", covar_args.out_path, "PGM output path")->required();
  covar_cmd->add_option("--csv", covar_args.csv_path, "also write raw values as CSV");
  covar_cmd->add_option("--data", covar_args.data, "data dir or synth:... (default noise)");
  covar_cmd->add_option("--samples", covar_args.samples, "input images to run");
  covar_cmd->add_option("--seed", covar_args.seed, "noise seed");
  covar_cmd->add_flag("--whiten", covar_args.whiten, "ZCA-whiten both sides");
  covar_cmd->add_flag("--correlation", covar_args.correlation, "variance-normalize rows");

  BenchArgs bench_args;
  auto* bench_cmd = app.add_subcommand("bench", "batched vs looped small-GEMM timing");
  bench_cmd->add_option("--dims", bench_args.dims, "matrix dims MxNxK");
  bench_cmd->add_option("--batch", bench_args.batch, "matrices per batch");
  bench_cmd->add_option("--reps", bench_args.reps, "timed repetitions (>= 5)");
  bench_cmd->add_option("--strategies", bench_args.strategies, "comma list: looped,batched");
  bench_cmd->add_option("--out", bench_args.csv_path, "CSV output path");
  bench_cmd->add_option("--seed", bench_args.seed, "input seed");

  try {
    app.parse(argc, const_cast<char**>(argv));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  set_threads(threads);
  try {
    if (*cost_cmd) return run_cost(cost_args);
    if (*tr_cmd) return run_transform(tr_args);
    if (*val_cmd) return run_validate(validate_file);
    if (*train_cmd) return run_train(train_args);
    if (*eval_cmd) return run_eval(eval_args);
    if (*covar_cmd) return run_covar(covar_args);
    if (*bench_cmd) return run_bench(bench_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace rootconv
