#include "mish/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <thread>

#include "mish/csv.hpp"
#include "mish/errors.hpp"

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mish {

namespace {

// ---------------------------------------------------------------------------
// Strict config parsing

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed)
      if (it.key() == a) {
        ok = true;
        break;
      }
    if (!ok) throw ConfigError("unknown key \"" + it.key() + "\" in " + where);
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for \"") + key + "\": " + e.what());
  }
}

OptimizerConfig parse_optimizer(const json& j) {
  check_keys(j, "optimizer", {"kind", "lr", "momentum", "rho", "beta1", "beta2", "eps"});
  std::string kind = get_or<std::string>(j, "kind", "sgd");
  try {
    if (kind == "sgd")
      return OptimizerConfig::SGD(get_or(j, "lr", 0.01), get_or(j, "momentum", 0.9));
    if (kind == "rmsprop")
      return OptimizerConfig::RMSProp(get_or(j, "lr", 1e-3), get_or(j, "rho", 0.9),
                                      get_or(j, "eps", 1e-8));
    if (kind == "adam")
      return OptimizerConfig::Adam(get_or(j, "lr", 1e-3), get_or(j, "beta1", 0.9),
                                   get_or(j, "beta2", 0.999), get_or(j, "eps", 1e-8));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  throw ConfigError("unknown optimizer kind \"" + kind + "\"");
}

GridConfig parse_grid(const json& j, const GridConfig& defaults) {
  check_keys(j, "grid", {"x_range", "y_range", "resolution"});
  GridConfig g = defaults;
  if (j.contains("x_range")) {
    auto r = j.at("x_range").get<std::vector<double>>();
    if (r.size() != 2) throw ConfigError("grid.x_range must be [lo, hi]");
    g.x_lo = r[0];
    g.x_hi = r[1];
  }
  if (j.contains("y_range")) {
    auto r = j.at("y_range").get<std::vector<double>>();
    if (r.size() != 2) throw ConfigError("grid.y_range must be [lo, hi]");
    g.y_lo = r[0];
    g.y_hi = r[1];
  }
  g.resolution = get_or(j, "resolution", g.resolution);
  if (g.resolution < 2) throw ConfigError("grid.resolution must be >= 2");
  return g;
}

DatasetConfig parse_dataset(const json& j) {
  check_keys(j, "dataset",
             {"type", "train_images", "train_labels", "test_images", "test_labels", "dir",
              "n_train", "n_test", "seed", "noise", "channels", "img", "n_per_class",
              "num_classes", "dim", "spread"});
  DatasetConfig dc;
  dc.type = get_or<std::string>(j, "type", dc.type);
  if (dc.type != "synthetic-digits" && dc.type != "idx" && dc.type != "cifar10" &&
      dc.type != "blobs")
    throw ConfigError("dataset.type must be one of synthetic-digits, idx, cifar10, blobs");
  dc.train_images = get_or<std::string>(j, "train_images", "");
  dc.train_labels = get_or<std::string>(j, "train_labels", "");
  dc.test_images = get_or<std::string>(j, "test_images", "");
  dc.test_labels = get_or<std::string>(j, "test_labels", "");
  dc.dir = get_or<std::string>(j, "dir", "");
  dc.n_train = get_or(j, "n_train", dc.n_train);
  dc.n_test = get_or(j, "n_test", dc.n_test);
  dc.seed = get_or(j, "seed", dc.seed);
  dc.noise = get_or(j, "noise", dc.noise);
  dc.channels = get_or(j, "channels", dc.channels);
  dc.img = get_or(j, "img", dc.img);
  dc.n_per_class = get_or(j, "n_per_class", dc.n_per_class);
  dc.num_classes = get_or(j, "num_classes", dc.num_classes);
  dc.dim = get_or(j, "dim", dc.dim);
  dc.spread = get_or(j, "spread", dc.spread);
  if (dc.type == "idx" &&
      (dc.train_images.empty() || dc.train_labels.empty() || dc.test_images.empty() ||
       dc.test_labels.empty()))
    throw ConfigError("dataset.type idx requires train/test image and label paths");
  if (dc.type == "cifar10" && dc.dir.empty())
    throw ConfigError("dataset.type cifar10 requires dir");
  return dc;
}

json dataset_to_json(const DatasetConfig& dc) {
  json j;
  j["type"] = dc.type;
  if (dc.type == "idx") {
    j["train_images"] = dc.train_images;
    j["train_labels"] = dc.train_labels;
    j["test_images"] = dc.test_images;
    j["test_labels"] = dc.test_labels;
  } else if (dc.type == "cifar10") {
    j["dir"] = dc.dir;
  } else if (dc.type == "blobs") {
    j["n_per_class"] = dc.n_per_class;
    j["num_classes"] = dc.num_classes;
    j["dim"] = dc.dim;
    j["spread"] = dc.spread;
    j["seed"] = dc.seed;
  } else {
    j["n_train"] = dc.n_train;
    j["n_test"] = dc.n_test;
    j["seed"] = dc.seed;
    j["noise"] = dc.noise;
    j["channels"] = dc.channels;
    j["img"] = dc.img;
  }
  return j;
}

json grid_to_json(const GridConfig& g) {
  return json{{"x_range", {g.x_lo, g.x_hi}},
              {"y_range", {g.y_lo, g.y_hi}},
              {"resolution", g.resolution}};
}

const std::vector<std::string>& default_activations(const std::string& experiment) {
  static const std::vector<std::string> sweep = {"mish", "swish", "relu"};
  static const std::vector<std::string> init = {"mish", "swish"};
  static const std::vector<std::string> scape = {"relu", "mish", "swish"};
  static const std::vector<std::string> none = {};
  if (experiment == "sweep-init") return init;
  if (experiment == "landscape") return scape;
  if (experiment == "gradcheck" || experiment == "bench" || experiment == "gen-data")
    return none;
  return sweep;
}

int64_t default_epochs(const std::string& experiment, bool paper_scale) {
  if (paper_scale) return 50;
  // Desk-scale budgets: deep-stack trainability for every activation needs
  // the longer depth-sweep schedule.
  if (experiment == "sweep-depth") return 20;
  if (experiment == "sweep-noise") return 6;
  if (experiment == "sweep-init") return 6;
  if (experiment == "stats") return 8;
  return 10;
}

void build_resolved_json(ExperimentConfig& cfg) {
  json j;
  j["experiment"] = cfg.experiment;
  j["seeds"] = cfg.seeds;
  j["activations"] = cfg.activations;
  j["output_dir"] = cfg.output_dir;
  j["paper_scale"] = cfg.paper_scale;
  j["jobs"] = cfg.jobs;
  const std::string& e = cfg.experiment;
  bool wants_data = e == "sweep-depth" || e == "sweep-noise" || e == "sweep-init" ||
                    e == "stats" || e == "train" || e == "gen-data" ||
                    (e == "landscape" && cfg.loss_slice.enabled);
  if (wants_data) j["dataset"] = dataset_to_json(cfg.dataset);
  if (e == "sweep-depth") {
    j["depths"] = cfg.depths;
    j["width"] = cfg.width;
  }
  if (e == "sweep-noise") {
    j["sigmas"] = cfg.sigmas;
    j["width_scale"] = cfg.width_scale;
  }
  if (e == "sweep-init") {
    j["initializers"] = cfg.initializers;
    j["width_scale"] = cfg.width_scale;
  }
  if (e == "stats") {
    j["n_runs"] = cfg.n_runs;
    j["width_scale"] = cfg.width_scale;
  }
  if (e == "train") {
    j["arch"] = cfg.arch;
    j["depth"] = cfg.depth;
    j["width"] = cfg.width;
    j["width_scale"] = cfg.width_scale;
    if (!cfg.save_checkpoint.empty()) j["save_checkpoint"] = cfg.save_checkpoint;
  }
  if (e == "sweep-depth" || e == "sweep-noise" || e == "sweep-init" || e == "stats" ||
      e == "train") {
    j["epochs"] = cfg.epochs;
    j["batch_size"] = cfg.batch_size;
    j["optimizer"] = {{"kind", optimizer_name(cfg.optimizer.kind)},
                      {"lr", cfg.optimizer.lr},
                      {"momentum", cfg.optimizer.momentum},
                      {"rho", cfg.optimizer.rho},
                      {"beta1", cfg.optimizer.beta1},
                      {"beta2", cfg.optimizer.beta2},
                      {"eps", cfg.optimizer.eps}};
  }
  if (e == "bench") {
    j["buffer_len"] = cfg.buffer_len;
    j["n_total"] = cfg.n_total;
    j["warmup"] = cfg.warmup;
    j["parallel"] = cfg.parallel;
  }
  if (e == "landscape") {
    j["grid"] = grid_to_json(cfg.grid);
    j["depth"] = cfg.depth;
    j["landscape_width"] = cfg.landscape_width;
    if (cfg.loss_slice.enabled) {
      j["loss_slice"] = {{"checkpoint", cfg.loss_slice.checkpoint},
                         {"subset", cfg.loss_slice.subset},
                         {"seed", cfg.loss_slice.seed},
                         {"grid", grid_to_json(cfg.loss_slice.grid)}};
    }
  }
  cfg.resolved_json = j.dump(2);
}

OptimizerConfig default_optimizer(const std::string& experiment) {
  // Depth and noise sweeps run plain momentum SGD; the six-layer CNN uses
  // RMSProp; stats runs use Adam.
  if (experiment == "sweep-init") return OptimizerConfig::RMSProp(1e-3, 0.9);
  if (experiment == "stats") return OptimizerConfig::Adam(1e-3);
  return OptimizerConfig::SGD(0.01, 0.9);
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text,
                              const std::string& expected_experiment) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  check_keys(j, "config",
             {"experiment", "seeds", "activations", "output_dir", "paper_scale", "jobs",
              "dataset", "depths", "sigmas", "initializers", "n_runs", "epochs",
              "batch_size", "width", "width_scale", "optimizer", "buffer_len", "n_total",
              "warmup", "parallel", "grid", "depth", "landscape_width", "loss_slice",
              "arch", "save_checkpoint"});

  ExperimentConfig cfg;
  if (!j.contains("experiment")) throw ConfigError("missing required key \"experiment\"");
  cfg.experiment = j.at("experiment").get<std::string>();
  static const char* kKnown[] = {"gradcheck", "bench",      "landscape",  "train",
                                 "sweep-depth", "sweep-noise", "sweep-init", "stats",
                                 "gen-data"};
  bool known = false;
  for (const char* k : kKnown) known = known || cfg.experiment == k;
  if (!known) throw ConfigError("unknown experiment \"" + cfg.experiment + "\"");
  if (!expected_experiment.empty() && cfg.experiment != expected_experiment)
    throw ConfigError("config experiment \"" + cfg.experiment + "\" does not match subcommand \"" +
                      expected_experiment + "\"");

  if (!j.contains("seeds")) throw ConfigError("missing required key \"seeds\"");
  cfg.seeds = j.at("seeds").get<std::vector<uint64_t>>();
  if (cfg.seeds.empty()) throw ConfigError("\"seeds\" must be nonempty");

  cfg.activations = get_or(j, "activations", default_activations(cfg.experiment));
  for (const std::string& a : cfg.activations) {
    try {
      parse_activation(a);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  cfg.output_dir = get_or<std::string>(j, "output_dir", cfg.output_dir);
  cfg.paper_scale = get_or(j, "paper_scale", cfg.paper_scale);
  cfg.jobs = get_or(j, "jobs", cfg.jobs);

  if (j.contains("dataset")) cfg.dataset = parse_dataset(j.at("dataset"));
  cfg.depths = get_or(j, "depths", cfg.depths);
  cfg.sigmas = get_or(j, "sigmas", cfg.sigmas);
  cfg.initializers = get_or(j, "initializers", cfg.initializers);
  for (const std::string& name : cfg.initializers) {
    try {
      parse_initializer(name);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  cfg.n_runs = get_or(j, "n_runs", cfg.paper_scale ? int64_t{23} : cfg.n_runs);
  cfg.epochs = get_or(j, "epochs", int64_t{0});
  cfg.batch_size = get_or(j, "batch_size", cfg.batch_size);
  cfg.width = get_or(j, "width", cfg.paper_scale ? int64_t{500} : cfg.width);
  cfg.width_scale = get_or(j, "width_scale", cfg.paper_scale ? 1.0 : cfg.width_scale);
  if (j.contains("optimizer")) {
    cfg.optimizer = parse_optimizer(j.at("optimizer"));
    cfg.optimizer_set = true;
  } else {
    cfg.optimizer = default_optimizer(cfg.experiment);
  }
  cfg.buffer_len = get_or(j, "buffer_len", cfg.buffer_len);
  cfg.n_total = get_or(j, "n_total", cfg.n_total);
  cfg.warmup = get_or(j, "warmup", cfg.warmup);
  cfg.parallel = get_or(j, "parallel", cfg.parallel);
  if (j.contains("grid")) cfg.grid = parse_grid(j.at("grid"), cfg.grid);
  cfg.depth = get_or(j, "depth", cfg.depth);
  cfg.landscape_width = get_or(j, "landscape_width", cfg.landscape_width);
  if (j.contains("loss_slice")) {
    const json& ls = j.at("loss_slice");
    check_keys(ls, "loss_slice", {"checkpoint", "subset", "grid", "seed"});
    cfg.loss_slice.enabled = true;
    if (!ls.contains("checkpoint"))
      throw ConfigError("loss_slice requires \"checkpoint\"");
    cfg.loss_slice.checkpoint = ls.at("checkpoint").get<std::string>();
    cfg.loss_slice.subset = get_or(ls, "subset", cfg.loss_slice.subset);
    cfg.loss_slice.seed = get_or(ls, "seed", cfg.loss_slice.seed);
    if (ls.contains("grid")) cfg.loss_slice.grid = parse_grid(ls.at("grid"), cfg.loss_slice.grid);
  }
  cfg.arch = get_or<std::string>(j, "arch", cfg.arch);
  if (cfg.arch != "mlp" && cfg.arch != "cnn6" && cfg.arch != "cnn5")
    throw ConfigError("arch must be one of mlp, cnn6, cnn5");
  cfg.save_checkpoint = get_or<std::string>(j, "save_checkpoint", "");

  if (cfg.epochs == 0) cfg.epochs = default_epochs(cfg.experiment, cfg.paper_scale);
  if (cfg.paper_scale && cfg.dataset.type == "synthetic-digits" && !j.contains("dataset")) {
    cfg.dataset.n_train = 60000;
    cfg.dataset.n_test = 10000;
  }

  build_resolved_json(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path, const std::string& expected_experiment) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), expected_experiment);
}

void apply_overrides(ExperimentConfig& cfg, const std::optional<std::string>& output_dir,
                     bool paper_scale, int64_t seed_offset, int jobs) {
  if (output_dir) cfg.output_dir = *output_dir;
  if (paper_scale && !cfg.paper_scale) {
    cfg.paper_scale = true;
    cfg.epochs = 50;
    cfg.width = 500;
    cfg.n_runs = 23;
    cfg.width_scale = 1.0;
    if (cfg.dataset.type == "synthetic-digits") {
      cfg.dataset.n_train = 60000;
      cfg.dataset.n_test = 10000;
    }
  }
  for (uint64_t& s : cfg.seeds) s += static_cast<uint64_t>(seed_offset);
  if (jobs > 0) cfg.jobs = jobs;
  build_resolved_json(cfg);
}

std::pair<Dataset, Dataset> load_dataset(const DatasetConfig& dc, bool paper_scale) {
  (void)paper_scale;
  if (dc.type == "idx") {
    Dataset train = load_idx(dc.train_images, dc.train_labels);
    train.split = Split::train;
    Dataset test = load_idx(dc.test_images, dc.test_labels);
    test.split = Split::test;
    return {std::move(train), std::move(test)};
  }
  if (dc.type == "cifar10") {
    return {load_cifar10_binary(dc.dir, Split::train), load_cifar10_binary(dc.dir, Split::test)};
  }
  if (dc.type == "blobs") {
    Dataset train = synth_blobs(dc.n_per_class, dc.num_classes, dc.dim, dc.spread, dc.seed);
    Dataset test = synth_blobs(std::max<int64_t>(1, dc.n_per_class / 4), dc.num_classes, dc.dim,
                               dc.spread, mix_seed(dc.seed, 0x7e57u));
    test.split = Split::test;
    return {std::move(train), std::move(test)};
  }
  Dataset all = synth_digits(dc.n_train + dc.n_test, dc.seed, dc.img, dc.channels, dc.noise);
  Dataset train = head(all, dc.n_train);
  Dataset test;
  test.split = Split::test;
  test.num_classes = all.num_classes;
  std::vector<int64_t> shape = all.images.shape;
  shape[0] = dc.n_test;
  test.images = Tensor<float>(shape);
  int64_t per = all.sample_elems();
  std::copy(all.images.data.begin() + dc.n_train * per, all.images.data.end(),
            test.images.data.begin());
  test.labels.assign(all.labels.begin() + dc.n_train, all.labels.end());
  return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------
// Shared runner plumbing

namespace {

fs::path prepare_output_dir(const ExperimentConfig& cfg) {
  fs::path dir(cfg.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output dir: " + dir.string());
  std::ofstream sidecar(dir / (cfg.experiment + "_config.json"));
  if (!sidecar) throw IoError("cannot write config sidecar in " + dir.string());
  sidecar << cfg.resolved_json << '\n';
  return dir;
}

std::string fmt(double v, const char* spec = "%.6g") {
  if (std::isnan(v)) return "diverged";
  char buf[64];
  snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Cell outputs land in
// pre-sized slots, so completion order never affects file contents.
void for_each_cell(size_t n, int jobs, const std::function<void(size_t)>& fn) {
  if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
  jobs = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
  if (jobs == 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<size_t>(jobs));
  for (int t = 0; t < jobs; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (;;) {
          size_t i = next.fetch_add(1);
          if (i >= n) return;
          fn(i);
        }
      } catch (...) {
        errors[static_cast<size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

TrainConfig make_train_config(const ExperimentConfig& cfg, uint64_t seed) {
  TrainConfig tc;
  tc.optimizer = cfg.optimizer;
  tc.batch_size = cfg.batch_size;
  tc.epochs = cfg.epochs;
  tc.seed = seed;
  return tc;
}

}  // namespace

NetworkSpec build_cnn5(const ActivationKind& activation, int64_t in_ch, int64_t img,
                       double width_scale, int64_t classes) {
  auto scaled = [&](int64_t base) {
    return std::max<int64_t>(1, static_cast<int64_t>(std::llround(base * width_scale)));
  };
  const int64_t c1 = scaled(16), c2 = scaled(32), c3 = scaled(64), fc = scaled(64);
  NetworkSpec spec;
  spec.layers.push_back(LayerDesc::Conv2D(in_ch, c1, 3, 1, 1));
  spec.layers.push_back(LayerDesc::Act(activation));
  spec.layers.push_back(LayerDesc::MaxPool());
  spec.layers.push_back(LayerDesc::Conv2D(c1, c2, 3, 1, 1));
  spec.layers.push_back(LayerDesc::Act(activation));
  spec.layers.push_back(LayerDesc::MaxPool());
  spec.layers.push_back(LayerDesc::Conv2D(c2, c3, 3, 1, 1));
  spec.layers.push_back(LayerDesc::Act(activation));
  spec.layers.push_back(LayerDesc::MaxPool());
  spec.layers.push_back(LayerDesc::Flatten());
  int64_t side = img / 8;
  spec.layers.push_back(LayerDesc::Dense(side * side * c3, fc));
  spec.layers.push_back(LayerDesc::Act(activation));
  spec.layers.push_back(LayerDesc::Dense(fc, classes));
  return spec;
}

// ---------------------------------------------------------------------------
// gradcheck

namespace {

bool is_piecewise(Activation tag) {
  switch (tag) {
    case Activation::relu:
    case Activation::leaky_relu:
    case Activation::elu:
    case Activation::selu:
    case Activation::srelu:
    case Activation::rrelu:
      return true;
    default:
      return false;
  }
}

std::vector<double> kink_points(const ActivationKind& k) {
  switch (k.tag) {
    case Activation::relu:
    case Activation::leaky_relu:
    case Activation::elu:
    case Activation::selu:
    case Activation::rrelu:
      return {0.0};
    case Activation::srelu:
      return {k.t_neg, k.t_pos};
    default:
      return {};
  }
}

// Max relative error between analytic and finite-difference gradients over
// every parameter of a small double-precision network.
double network_gradcheck_error(const ActivationKind& act) {
  NetworkSpec spec;
  spec.seed = 1234;
  spec.layers.push_back(LayerDesc::Dense(12, 16));
  spec.layers.push_back(LayerDesc::BatchNorm(16));
  spec.layers.push_back(LayerDesc::Act(act));
  spec.layers.push_back(LayerDesc::Dense(16, 10));
  Network<double> net = Network<double>::build(spec, {12});

  RandomEngine rng(99);
  const int64_t n = 8;
  Tensor<double> batch({n, 12});
  for (auto& v : batch.data) v = rng.uniform(-1.5, 1.5);
  std::vector<int> labels(n);
  for (int64_t i = 0; i < n; ++i) labels[i] = static_cast<int>(rng.uniform_index(10));

  auto loss_fn = [&] {
    Tensor<double> logits = net.forward(batch, Mode::train);
    return softmax_cross_entropy<double>(logits, labels, nullptr);
  };

  net.zero_grad();
  Tensor<double> logits = net.forward(batch, Mode::train);
  Tensor<double> dlogits;
  softmax_cross_entropy<double>(logits, labels, &dlogits);
  net.backward(dlogits);

  const double h = 1e-5;
  double max_rel = 0.0;
  for (ParamTensor<double>* p : net.parameters()) {
    for (size_t j = 0; j < p->value.size(); ++j) {
      double saved = p->value[j];
      p->value[j] = saved + h;
      double lp = loss_fn();
      p->value[j] = saved - h;
      double lm = loss_fn();
      p->value[j] = saved;
      double fd = (lp - lm) / (2.0 * h);
      double an = p->grad[j];
      double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-2});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

// im2col path against the explicit-loop reference, observed through an
// identity dense head.
double conv_dual_route_error() {
  RandomEngine rng(7);
  Tensor<double> x({2, 6, 6, 3});
  for (auto& v : x.data) v = rng.uniform(-1.0, 1.0);
  Tensor<double> w({4, 3, 3, 3});
  for (auto& v : w.data) v = rng.uniform(-0.5, 0.5);
  std::vector<double> bias(4);
  for (auto& v : bias) v = rng.uniform(-0.1, 0.1);

  Tensor<double> naive = conv2d_forward_naive<double>(x, w, bias, 1, 1);

  NetworkSpec spec;
  spec.seed = 0;
  spec.layers.push_back(LayerDesc::Conv2D(3, 4, 3, 1, 1));
  spec.layers.push_back(LayerDesc::Flatten());
  spec.layers.push_back(LayerDesc::Dense(6 * 6 * 4, 6 * 6 * 4));
  Network<double> net = Network<double>::build(spec, {6, 6, 3});
  auto params = net.parameters();
  params[0]->value = w.data;
  params[1]->value.assign(bias.begin(), bias.end());
  std::fill(params[2]->value.begin(), params[2]->value.end(), 0.0);
  for (int64_t i = 0; i < 6 * 6 * 4; ++i) params[2]->value[i * (6 * 6 * 4) + i] = 1.0;

  Tensor<double> through = net.forward(x, Mode::eval);
  double max_err = 0.0;
  for (size_t i = 0; i < naive.data.size(); ++i)
    max_err = std::max(max_err, std::abs(naive.data[i] - through.data[i]));
  return max_err;
}

}  // namespace

GradcheckReport run_gradcheck(const ExperimentConfig& cfg, const GradOverride& hook) {
  GradcheckReport report;
  auto add = [&](const std::string& name, double err, double tol) {
    report.checks.push_back({name, err, tol, err <= tol});
  };
  auto gradf = [&](const ActivationKind& k, double x) {
    return hook ? hook(k, x) : grad(k, x);
  };

  // Identity between the rational and decomposed derivative forms.
  {
    double max_err = 0.0;
    for (int i = 0; i <= 10000; ++i) {
      double x = -20.0 + 40.0 * static_cast<double>(i) / 10000.0;
      max_err = std::max(max_err, std::abs(mish_grad_rational(x) - grad(ActivationKind::Mish(), x)));
    }
    add("mish_identity_eq_rational_vs_decomposed", max_err, 1e-9);
  }

  // Closed form vs central differences for every kind.
  {
    const double h = 1e-5;
    for (int ki = 0; ki < kActivationCount; ++ki) {
      const ActivationKind& k = ActivationKind::all_default()[ki];
      auto kinks = kink_points(k);
      double max_err = 0.0;
      for (int i = 0; i <= 1000; ++i) {
        double x = -6.0 + 12.0 * static_cast<double>(i) / 1000.0;
        bool near_kink = false;
        for (double kx : kinks) near_kink = near_kink || std::abs(x - kx) < 2.0 * h;
        if (is_piecewise(k.tag) && near_kink) continue;
        max_err = std::max(max_err, std::abs(gradf(k, x) - finite_diff(k, x, h)));
      }
      add("fd_conformance_" + activation_name(k), max_err, 1e-6);
    }
  }

  // Bounded below, saturation, delta range, non-monotonic sign structure.
  {
    Minimum m = minimum_of(ActivationKind::Mish());
    double worst = 0.0;
    double sign_violation = 0.0;
    double delta_violation = 0.0;
    for (int i = 0; i <= 20000; ++i) {
      double x = -100.0 + 200.0 * static_cast<double>(i) / 20000.0;
      worst = std::max(worst, (-0.30885 - 1e-6) - eval(ActivationKind::Mish(), x));
      double g = grad(ActivationKind::Mish(), x);
      if (x < m.x_min - 1e-3 && g >= 0.0) sign_violation = std::max(sign_violation, g);
      if (x > m.x_min + 1e-3 && g <= 0.0) sign_violation = std::max(sign_violation, -g);
      double delta = mish_grad_decomposed(x).delta;
      if (!(delta > 0.0 && delta < 1.0))
        delta_violation = std::max(delta_violation, 1.0);
    }
    add("mish_bounded_below", std::max(0.0, worst), 0.0);
    add("mish_grad_sign_structure", sign_violation, 0.0);
    add("mish_delta_in_unit_interval", delta_violation, 0.0);

    double sat_pos = 0.0;
    for (double x : {20.0, 25.0, 50.0, 100.0, 1000.0})
      sat_pos = std::max(sat_pos, std::abs(eval(ActivationKind::Mish(), x) - x));
    add("mish_saturation_positive", sat_pos, 1e-7);
    double sat_neg = 0.0;
    for (double x : {-40.0, -60.0, -100.0})
      sat_neg = std::max(sat_neg, std::abs(eval(ActivationKind::Mish(), x)));
    add("mish_saturation_negative", sat_neg, 1e-15);
  }

  // Second derivatives vs second-order central differences.
  for (const ActivationKind& k : {ActivationKind::Mish(), ActivationKind::Swish()}) {
    double max_err = 0.0;
    const double h = 1e-4;
    for (int i = 0; i <= 600; ++i) {
      double x = -6.0 + 12.0 * static_cast<double>(i) / 600.0;
      double num = (eval(k, x + h) - 2.0 * eval(k, x) + eval(k, x - h)) / (h * h);
      max_err = std::max(max_err, std::abs(grad2(k, x) - num));
    }
    add("grad2_fd_" + activation_name(k), max_err, 1e-4);
  }

  // Whole-network gradient checks.
  for (const char* name : {"mish", "swish", "relu", "gelu", "tanh_softplus"}) {
    double err = network_gradcheck_error(parse_activation(name));
    add(std::string("network_gradcheck_") + name, err, 1e-5);
  }

  // Softmax / cross-entropy identities.
  {
    RandomEngine rng(5);
    Tensor<double> logits({16, 10});
    for (auto& v : logits.data) v = rng.uniform(-4.0, 4.0);
    Tensor<double> probs = softmax(logits);
    double row_err = 0.0;
    for (int64_t i = 0; i < 16; ++i) {
      double s = 0.0;
      for (int64_t j = 0; j < 10; ++j) s += probs.data[i * 10 + j];
      row_err = std::max(row_err, std::abs(s - 1.0));
    }
    add("softmax_rows_sum_to_one", row_err, 1e-6);

    Tensor<double> uniform({4, 10});
    std::vector<int> labels = {0, 3, 7, 9};
    double ce = softmax_cross_entropy<double>(uniform, labels, nullptr);
    add("uniform_logits_ce_ln_c", std::abs(ce - std::log(10.0)), 1e-9);
  }

  // Conv im2col path vs explicit loops.
  add("conv_im2col_vs_naive", conv_dual_route_error(), 1e-10);

  fs::path dir = prepare_output_dir(cfg);
  json j;
  j["all_pass"] = report.all_pass();
  json checks = json::array();
  for (const auto& c : report.checks)
    checks.push_back(
        {{"name", c.name}, {"max_err", c.max_err}, {"tol", c.tol}, {"pass", c.pass}});
  j["checks"] = checks;
  std::ofstream os(dir / "gradcheck_report.json");
  os << j.dump(2) << '\n';
  return report;
}

// ---------------------------------------------------------------------------
// Sweeps

void run_sweep_depth(const ExperimentConfig& cfg) {
  fs::path dir = prepare_output_dir(cfg);
  auto [train_set, test_set] = load_dataset(cfg.dataset, cfg.paper_scale);

  struct Cell {
    int64_t depth;
    std::string act;
    uint64_t seed;
    RunResult result;
  };
  std::vector<Cell> cells;
  for (int64_t depth : cfg.depths)
    for (const std::string& act : cfg.activations)
      for (uint64_t seed : cfg.seeds) cells.push_back({depth, act, seed, {}});

  for_each_cell(cells.size(), cfg.jobs, [&](size_t i) {
    Cell& c = cells[i];
    NetworkSpec spec = build_mlp(c.depth, cfg.width, parse_activation(c.act),
                                 train_set.sample_elems(), train_set.num_classes);
    spec.seed = mix_seed(c.seed, static_cast<uint64_t>(c.depth));
    c.result = train<float>(spec, make_train_config(cfg, c.seed), train_set, test_set);
  });

  std::ofstream os(dir / "depth_sweep.csv");
  if (!os) throw IoError("cannot write depth_sweep.csv");
  csv_write_row(os, {"depth", "activation", "seed", "final_test_acc", "final_test_loss",
                     "wall_seconds"});
  for (const Cell& c : cells)
    csv_write_row(os, {std::to_string(c.depth), c.act, std::to_string(c.seed),
                       fmt(c.result.final_test_acc), fmt(c.result.final_test_loss),
                       fmt(c.result.wall_seconds)});
}

void run_sweep_noise(const ExperimentConfig& cfg) {
  fs::path dir = prepare_output_dir(cfg);
  auto [train_set, test_set] = load_dataset(cfg.dataset, cfg.paper_scale);

  // One noisy test set per sigma, shared by every activation and seed so the
  // comparison sees identical corruption draws.
  std::vector<Dataset> noisy;
  noisy.reserve(cfg.sigmas.size());
  for (size_t si = 0; si < cfg.sigmas.size(); ++si)
    noisy.push_back(corrupt_gaussian(test_set, cfg.sigmas[si],
                                     mix_seed(cfg.dataset.seed, 0xbeef00 + si)));

  struct Cell {
    std::string act;
    uint64_t seed;
    std::vector<double> loss;  // per sigma
    std::vector<double> acc;
    double clean_loss = 0.0;
    bool diverged = false;
  };
  std::vector<Cell> cells;
  for (const std::string& act : cfg.activations)
    for (uint64_t seed : cfg.seeds) cells.push_back({act, seed, {}, {}, 0.0, false});

  const int64_t in_ch = train_set.images.dim(3);
  const int64_t img = train_set.images.dim(1);

  for_each_cell(cells.size(), cfg.jobs, [&](size_t i) {
    Cell& c = cells[i];
    NetworkSpec spec = build_cnn5(parse_activation(c.act), in_ch, img, cfg.width_scale,
                                  train_set.num_classes);
    spec.seed = mix_seed(c.seed, 0xc5);
    auto [result, net] =
        train_with_net<float>(spec, make_train_config(cfg, c.seed), train_set, test_set);
    c.diverged = result.diverged;
    if (!c.diverged) c.clean_loss = evaluate<float>(net, test_set).first;
    for (const Dataset& nds : noisy) {
      if (c.diverged) {
        c.loss.push_back(std::numeric_limits<double>::quiet_NaN());
        c.acc.push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      auto [loss, acc] = evaluate<float>(net, nds);
      c.loss.push_back(loss);
      c.acc.push_back(acc);
    }
  });

  std::ofstream os(dir / "noise_sweep.csv");
  if (!os) throw IoError("cannot write noise_sweep.csv");
  csv_write_row(os, {"activation", "seed", "sigma", "test_loss", "test_acc",
                     "clean_test_loss"});
  for (const Cell& c : cells)
    for (size_t si = 0; si < cfg.sigmas.size(); ++si)
      csv_write_row(os, {c.act, std::to_string(c.seed), fmt(cfg.sigmas[si], "%.4g"),
                         fmt(c.loss[si], "%.9g"), fmt(c.acc[si]),
                         c.diverged ? "diverged" : fmt(c.clean_loss, "%.9g")});
}

void run_sweep_init(const ExperimentConfig& cfg) {
  fs::path dir = prepare_output_dir(cfg);
  auto [train_set, test_set] = load_dataset(cfg.dataset, cfg.paper_scale);

  struct Cell {
    std::string init;
    std::string act;
    uint64_t seed;
    RunResult result;
  };
  std::vector<Cell> cells;
  for (const std::string& init : cfg.initializers)
    for (const std::string& act : cfg.activations)
      for (uint64_t seed : cfg.seeds) cells.push_back({init, act, seed, {}});

  const int64_t in_ch = train_set.images.dim(3);
  const int64_t img = train_set.images.dim(1);

  for_each_cell(cells.size(), cfg.jobs, [&](size_t i) {
    Cell& c = cells[i];
    NetworkSpec spec = build_cnn6(parse_activation(c.act), in_ch, img, cfg.width_scale,
                                  train_set.num_classes);
    spec.initializer = parse_initializer(c.init);
    spec.seed = mix_seed(c.seed, 0xc6);
    c.result = train<float>(spec, make_train_config(cfg, c.seed), train_set, test_set);
  });

  std::ofstream os(dir / "init_sweep.csv");
  if (!os) throw IoError("cannot write init_sweep.csv");
  csv_write_row(os, {"initializer", "activation", "seed", "final_test_acc",
                     "final_test_loss"});
  for (const Cell& c : cells)
    csv_write_row(os, {c.init, c.act, std::to_string(c.seed), fmt(c.result.final_test_acc),
                       fmt(c.result.final_test_loss)});
}

void run_stats(const ExperimentConfig& cfg) {
  fs::path dir = prepare_output_dir(cfg);
  auto [train_set, test_set] = load_dataset(cfg.dataset, cfg.paper_scale);

  // Distinct run seeds: the configured list, extended past its end.
  std::vector<uint64_t> run_seeds = cfg.seeds;
  while (static_cast<int64_t>(run_seeds.size()) < cfg.n_runs)
    run_seeds.push_back(run_seeds.back() + 1);
  run_seeds.resize(static_cast<size_t>(cfg.n_runs));

  struct Cell {
    std::string act;
    uint64_t seed;
    RunResult result;
  };
  std::vector<Cell> cells;
  for (const std::string& act : cfg.activations)
    for (uint64_t seed : run_seeds) cells.push_back({act, seed, {}});

  const int64_t in_ch = train_set.images.dim(3);
  const int64_t img = train_set.images.dim(1);

  for_each_cell(cells.size(), cfg.jobs, [&](size_t i) {
    Cell& c = cells[i];
    NetworkSpec spec = build_cnn6(parse_activation(c.act), in_ch, img, cfg.width_scale,
                                  train_set.num_classes);
    spec.seed = mix_seed(c.seed, 0x57a7);
    c.result = train<float>(spec, make_train_config(cfg, c.seed), train_set, test_set);
  });

  std::ofstream os(dir / "stats.csv");
  if (!os) throw IoError("cannot write stats.csv");
  csv_write_row(os, {"activation", "mu_acc", "mu_loss", "sigma_acc"});
  json runs_json = json::array();
  for (const std::string& act : cfg.activations) {
    std::vector<RunResult> results;
    for (const Cell& c : cells)
      if (c.act == act) results.push_back(c.result);
    StatSummary s = aggregate_runs(results);
    csv_write_row(os, {act, fmt(s.mean_acc, "%.6g"), fmt(s.mean_loss, "%.6g"),
                       fmt(s.std_acc, "%.6g")});
    for (const RunResult& r : results) {
      json rj = json::parse(run_result_to_json(r));
      rj["activation"] = act;
      runs_json.push_back(rj);
    }
  }
  std::ofstream rj(dir / "runs.json");
  rj << runs_json.dump(2) << '\n';
}

void run_bench(const ExperimentConfig& cfg) {
  fs::path dir = prepare_output_dir(cfg);
  int workers = cfg.parallel ? static_cast<int>(std::thread::hardware_concurrency()) : 1;
  std::vector<BenchReport> reports =
      speed_profile(cfg.buffer_len, static_cast<size_t>(cfg.n_total),
                    static_cast<size_t>(cfg.warmup), workers);
  for (const BenchReport& r : reports)
    if (r.timer_warning)
      std::cerr << "warning: timer resolution coarser than 1% of mean for "
                << activation_name(r.kind) << " " << variant_name(r.variant) << " "
                << pass_name(r.pass) << "\n";
  std::ofstream os(dir / "bench.csv");
  if (!os) throw IoError("cannot write bench.csv");
  write_bench_csv(os, reports);
}

void run_landscape(const ExperimentConfig& cfg) {
  fs::path dir = prepare_output_dir(cfg);
  GridSpec grid = cfg.grid.to_grid();

  json summary;
  summary["grid"] = grid_to_json(cfg.grid);
  json per_act = json::object();

  std::vector<std::vector<double>> rough(cfg.activations.size());
  std::vector<std::vector<double>> tv(cfg.activations.size());

  for (size_t ai = 0; ai < cfg.activations.size(); ++ai) {
    const std::string& act = cfg.activations[ai];
    ActivationKind kind = parse_activation(act);
    for (size_t si = 0; si < cfg.seeds.size(); ++si) {
      Field2D field =
          output_landscape(kind, cfg.seeds[si], grid, cfg.depth, cfg.landscape_width);
      rough[ai].push_back(roughness(field));
      tv[ai].push_back(total_variation(field));
      if (si == 0) {
        std::string base = "landscape_" + act + "_" + std::to_string(cfg.seeds[si]);
        export_field(field, (dir / (base + ".csv")).string(), FieldFormat::csv);
        export_field(field, (dir / (base + ".pgm")).string(), FieldFormat::pgm);
      }
    }
    per_act[act] = {{"roughness", rough[ai]}, {"total_variation", tv[ai]}};
  }
  summary["per_activation"] = per_act;

  // Pairwise seed-matched ordering counts.
  json pairwise = json::object();
  for (size_t a = 0; a < cfg.activations.size(); ++a)
    for (size_t b = 0; b < cfg.activations.size(); ++b) {
      if (a == b) continue;
      int count = 0;
      for (size_t si = 0; si < cfg.seeds.size(); ++si)
        if (rough[a][si] > rough[b][si]) ++count;
      pairwise[cfg.activations[a] + "_rougher_than_" + cfg.activations[b]] = count;
    }
  summary["pairwise"] = pairwise;
  summary["n_seeds"] = cfg.seeds.size();

  if (cfg.loss_slice.enabled) {
    Network<double> net = load_network<double>(cfg.loss_slice.checkpoint);
    auto [train_set, test_set] = load_dataset(cfg.dataset, cfg.paper_scale);
    Dataset subset = head(test_set, cfg.loss_slice.subset);
    GridSpec sgrid = cfg.loss_slice.grid.to_grid();
    Field2D slice = loss_slice(net, subset, cfg.loss_slice.seed, sgrid);

    auto [base_loss, base_acc] = evaluate<double>(net, subset);
    (void)base_acc;
    int rc = sgrid.resolution / 2;
    bool centered = sgrid.resolution % 2 == 1 &&
                    std::abs(sgrid.x_at(rc)) < 1e-12 && std::abs(sgrid.y_at(rc)) < 1e-12;
    double center_val = centered ? slice.at(rc, rc) : std::numeric_limits<double>::quiet_NaN();

    std::string base = "loss_slice_" + std::to_string(cfg.loss_slice.seed);
    export_field(slice, (dir / (base + ".csv")).string(), FieldFormat::csv);
    export_field(slice, (dir / (base + ".pgm")).string(), FieldFormat::pgm);
    summary["loss_slice"] = {{"checkpoint", cfg.loss_slice.checkpoint},
                             {"base_loss", base_loss},
                             {"center_value", center_val},
                             {"center_abs_diff",
                              centered ? std::abs(center_val - base_loss)
                                       : std::numeric_limits<double>::quiet_NaN()},
                             {"grid_has_exact_center", centered},
                             {"has_nonfinite", slice.has_nonfinite}};
  }

  std::ofstream os(dir / "landscape_summary.json");
  if (!os) throw IoError("cannot write landscape_summary.json");
  os << summary.dump(2) << '\n';
}

void run_train(const ExperimentConfig& cfg) {
  fs::path dir = prepare_output_dir(cfg);
  auto [train_set, test_set] = load_dataset(cfg.dataset, cfg.paper_scale);
  ActivationKind act = parse_activation(cfg.activations.at(0));

  NetworkSpec spec;
  const int64_t in_ch = train_set.images.rank() == 4 ? train_set.images.dim(3) : 1;
  const int64_t img = train_set.images.rank() == 4 ? train_set.images.dim(1) : 0;
  if (cfg.arch == "mlp") {
    spec = build_mlp(cfg.depth, cfg.width, act, train_set.sample_elems(),
                     train_set.num_classes);
  } else if (cfg.arch == "cnn6") {
    spec = build_cnn6(act, in_ch, img, cfg.width_scale, train_set.num_classes);
  } else {
    spec = build_cnn5(act, in_ch, img, cfg.width_scale, train_set.num_classes);
  }
  spec.seed = mix_seed(cfg.seeds.at(0), 0x7121);

  auto [result, net] =
      train_with_net<float>(spec, make_train_config(cfg, cfg.seeds.at(0)), train_set, test_set);

  std::ofstream rj(dir / "run_result.json");
  rj << run_result_to_json(result) << '\n';
  std::ofstream rc(dir / "epochs.csv");
  run_result_to_csv(rc, result);
  if (!cfg.save_checkpoint.empty()) save_network(net, cfg.save_checkpoint);
}

void run_gen_data(const ExperimentConfig& cfg) {
  fs::path dir = prepare_output_dir(cfg);
  const DatasetConfig& dc = cfg.dataset;
  auto [train_set, test_set] = load_dataset(dc, cfg.paper_scale);
  if (dc.channels == 3 && dc.img == 32) {
    save_cifar10_binary(train_set, test_set, dir.string());
  } else {
    save_idx(train_set, (dir / "train-images-idx3-ubyte").string(),
             (dir / "train-labels-idx1-ubyte").string());
    save_idx(test_set, (dir / "t10k-images-idx3-ubyte").string(),
             (dir / "t10k-labels-idx1-ubyte").string());
  }
}

int run_experiment(const ExperimentConfig& cfg) {
  if (cfg.experiment == "gradcheck") {
    GradcheckReport r = run_gradcheck(cfg);
    for (const auto& c : r.checks)
      if (!c.pass)
        std::cerr << "gradcheck FAILED: " << c.name << " max_err " << c.max_err << " tol "
                  << c.tol << "\n";
    return r.all_pass() ? 0 : 1;
  }
  if (cfg.experiment == "bench") {
    run_bench(cfg);
    return 0;
  }
  if (cfg.experiment == "landscape") {
    run_landscape(cfg);
    return 0;
  }
  if (cfg.experiment == "train") {
    run_train(cfg);
    return 0;
  }
  if (cfg.experiment == "sweep-depth") {
    run_sweep_depth(cfg);
    return 0;
  }
  if (cfg.experiment == "sweep-noise") {
    run_sweep_noise(cfg);
    return 0;
  }
  if (cfg.experiment == "sweep-init") {
    run_sweep_init(cfg);
    return 0;
  }
  if (cfg.experiment == "stats") {
    run_stats(cfg);
    return 0;
  }
  if (cfg.experiment == "gen-data") {
    run_gen_data(cfg);
    return 0;
  }
  throw ConfigError("unknown experiment \"" + cfg.experiment + "\"");
}

}  // namespace mish
