// mishbench: reproducible activation-function experiments from JSON configs.
//
// Usage: mishbench <experiment> --config <path.json>
//                  [--output-dir D] [--paper-scale] [--seed-offset N] [--jobs N]
//
// Exit codes: 0 success, 1 check failure, 2 config error, 3 I/O error.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "mish/errors.hpp"
#include "mish/experiments.hpp"

namespace {

const char* kExperiments[] = {"gradcheck", "bench",      "landscape",  "train",
                              "sweep-depth", "sweep-noise", "sweep-init", "stats",
                              "gen-data"};

const char* kDescriptions[] = {
    "scalar and network derivative invariant suites",
    "kernel speed profile (Table-style CSV)",
    "output landscapes, roughness summary, optional loss slice",
    "one training run with JSON/CSV metrics",
    "test accuracy vs network depth",
    "test loss vs input Gaussian noise",
    "test accuracy across weight initializers",
    "multi-run mean/std statistics per activation",
    "write a synthetic dataset in IDX or CIFAR binary format",
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mish activation benchmark and reproduction suite"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir_flag;
  bool paper_scale = false;
  int64_t seed_offset = 0;
  int jobs = 0;

  for (size_t i = 0; i < std::size(kExperiments); ++i) {
    CLI::App* sub = app.add_subcommand(kExperiments[i], kDescriptions[i]);
    sub->add_option("--config", config_path, "experiment config (JSON)")->required();
    sub->add_option("--output-dir", output_dir_flag, "override the config's output_dir");
    sub->add_flag("--paper-scale", paper_scale,
                  "paper-scale settings: 50 epochs, width 500, 23 runs");
    sub->add_option("--seed-offset", seed_offset, "added to every seed in the config");
    sub->add_option("--jobs", jobs, "concurrent sweep cells (default: hardware)");
  }

  CLI11_PARSE(app, argc, argv);
  std::string experiment = app.get_subcommands().front()->get_name();

  try {
    mish::ExperimentConfig cfg = mish::load_config(config_path, experiment);
    std::optional<std::string> output_dir;
    if (!output_dir_flag.empty()) output_dir = output_dir_flag;
    if (const char* env = std::getenv("MISHBENCH_OUTPUT_DIR"); env && !output_dir)
      output_dir = std::string(env);
    mish::apply_overrides(cfg, output_dir, paper_scale, seed_offset, jobs);
    return mish::run_experiment(cfg);
  } catch (const mish::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const mish::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 3;
  } catch (const mish::FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 3;
  } catch (const mish::LengthError& e) {
    std::cerr << "length error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
