#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "mish/kernels.hpp"

namespace mish {

enum class Pass { forward, backward };

inline std::string pass_name(Pass p) {
  return p == Pass::forward ? "forward" : "backward";
}

// Trimmed statistics of one timing series: samples outside
// [Q1 - 1.5 IQR, Q3 + 1.5 IQR] are discarded, mean/std are over survivors.
struct BenchStats {
  size_t n_total = 0;
  size_t n_kept = 0;
  double mean = 0.0;
  double std_dev = 0.0;  // unbiased (n-1); 0 when n_kept < 2
};

// Quartiles use linear interpolation at (n-1)p on the sorted samples.
BenchStats summarize_samples(std::vector<double> samples);

struct BenchReport {
  ActivationKind kind;
  KernelVariant variant = KernelVariant::naive;
  Pass pass = Pass::forward;
  Precision precision = Precision::single_prec;
  size_t buffer_len = 0;
  size_t n_total = 0;
  size_t n_kept = 0;
  size_t warmup = 0;
  double mean_ns = 0.0;
  double std_ns = 0.0;
  int workers = 1;
  // Set when the clock's tick is coarser than 1% of the measured mean.
  bool timer_warning = false;
};

// Times `n_total` full passes over a seeded buffer after `warmup` untimed
// ones. One sample = one wall-clock pass. Timed sections run on one thread
// unless workers > 1 is requested explicitly.
BenchReport benchmark_op(const ActivationKind& kind, KernelVariant variant, Pass pass,
                         Precision precision, size_t buffer_len, size_t n_total = 100,
                         size_t warmup = 10, int workers = 1, uint64_t seed = 42);

// The full grid {relu, softplus, mish-naive, mish-fused} x {forward, backward}
// x {single, double}: 16 reports.
std::vector<BenchReport> speed_profile(size_t buffer_len, size_t n_total = 100,
                                       size_t warmup = 10, int workers = 1,
                                       uint64_t seed = 42);

// Header: kind,variant,pass,precision,buffer_len,n_total,n_kept,mean_ns,std_ns,workers
void write_bench_csv(std::ostream& os, const std::vector<BenchReport>& reports);

// Smallest positive step the monotonic clock can resolve, in ns.
double timer_resolution_ns();

}  // namespace mish
