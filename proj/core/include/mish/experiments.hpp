#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mish/bench.hpp"
#include "mish/data.hpp"
#include "mish/landscape.hpp"
#include "mish/nn.hpp"

namespace mish {

struct DatasetConfig {
  std::string type = "synthetic-digits";  // synthetic-digits | idx | cifar10 | blobs
  // idx
  std::string train_images, train_labels, test_images, test_labels;
  // cifar10
  std::string dir;
  // synthetic
  int64_t n_train = 8000, n_test = 2000;
  uint64_t seed = 7;
  double noise = 0.15;
  int channels = 1;
  int64_t img = 28;
  // blobs
  int64_t n_per_class = 100;
  int num_classes = 4;
  int64_t dim = 16;
  double spread = 0.1;
};

struct GridConfig {
  double x_lo = -10.0, x_hi = 10.0, y_lo = -10.0, y_hi = 10.0;
  int resolution = 256;
  GridSpec to_grid() const { return {x_lo, x_hi, y_lo, y_hi, resolution}; }
};

struct LossSliceConfig {
  bool enabled = false;
  std::string checkpoint;
  int64_t subset = 2048;
  GridConfig grid{-1.0, 1.0, -1.0, 1.0, 25};
  uint64_t seed = 1;
};

// Resolved experiment description. Parsing is strict: unknown or missing
// keys raise ConfigError before anything is written.
struct ExperimentConfig {
  std::string experiment;
  std::vector<uint64_t> seeds;
  std::vector<std::string> activations;
  std::string output_dir = "out";
  bool paper_scale = false;
  int jobs = 0;  // concurrent sweep cells; 0 = hardware

  DatasetConfig dataset;

  std::vector<int64_t> depths{5, 10, 15, 20, 25};
  std::vector<double> sigmas{0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<std::string> initializers{"glorot_uniform", "lecun_normal", "he_uniform"};
  int64_t n_runs = 5;
  int64_t epochs = 0;  // 0 -> per-experiment default
  int64_t batch_size = 128;
  int64_t width = 256;
  double width_scale = 0.25;
  OptimizerConfig optimizer;
  bool optimizer_set = false;

  size_t buffer_len = size_t{1} << 20;
  int64_t n_total = 100;
  int64_t warmup = 10;
  bool parallel = false;

  GridConfig grid;
  int depth = 5;
  int landscape_width = 64;
  LossSliceConfig loss_slice;

  std::string arch = "mlp";
  std::string save_checkpoint;

  // Fully resolved config as JSON, written as the run's sidecar.
  std::string resolved_json;
};

ExperimentConfig parse_config(const std::string& json_text,
                              const std::string& expected_experiment = "");
ExperimentConfig load_config(const std::string& path,
                             const std::string& expected_experiment = "");
// CLI-level overrides; re-resolves the sidecar JSON.
void apply_overrides(ExperimentConfig& cfg, const std::optional<std::string>& output_dir,
                     bool paper_scale, int64_t seed_offset, int jobs);

// Builds the train/test pair the config describes.
std::pair<Dataset, Dataset> load_dataset(const DatasetConfig& dc, bool paper_scale);

struct GradcheckReport {
  struct Check {
    std::string name;
    double max_err = 0.0;
    double tol = 0.0;
    bool pass = false;
  };
  std::vector<Check> checks;
  bool all_pass() const {
    for (const Check& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

// Test hook: when set, replaces the closed-form derivative inside the
// derivative-conformance checks. Never reachable from configs.
using GradOverride = std::function<double(const ActivationKind&, double)>;

// Scalar and network invariant suites; writes gradcheck_report.json.
GradcheckReport run_gradcheck(const ExperimentConfig& cfg, const GradOverride& hook = {});

void run_sweep_depth(const ExperimentConfig& cfg);
void run_sweep_noise(const ExperimentConfig& cfg);
void run_sweep_init(const ExperimentConfig& cfg);
void run_stats(const ExperimentConfig& cfg);
void run_bench(const ExperimentConfig& cfg);
void run_landscape(const ExperimentConfig& cfg);
void run_train(const ExperimentConfig& cfg);
void run_gen_data(const ExperimentConfig& cfg);

// Dispatch by cfg.experiment. Returns 0 on success, 1 when a check-style
// experiment (gradcheck) reports failures.
int run_experiment(const ExperimentConfig& cfg);

// Fixed five-layer CNN used by the noise sweep: three conv-pool blocks plus a
// two-layer dense head (five weighted layers).
NetworkSpec build_cnn5(const ActivationKind& activation, int64_t in_ch, int64_t img,
                       double width_scale = 1.0, int64_t classes = 10);

}  // namespace mish
