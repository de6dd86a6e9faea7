#include "mish/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "mish/csv.hpp"

namespace mish {

namespace {

using Clock = std::chrono::steady_clock;

// Keeps the optimizer from discarding benchmark work.
volatile double g_sink = 0.0;

double quantile_sorted(const std::vector<double>& s, double p) {
  double pos = p * static_cast<double>(s.size() - 1);
  size_t lo = static_cast<size_t>(pos);
  size_t hi = std::min(lo + 1, s.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return s[lo] + frac * (s[hi] - s[lo]);
}

double checksum(const Buffer& b) {
  size_t n = b.size();
  if (n == 0) return 0.0;
  if (b.precision() == Precision::single_prec) {
    auto s = b.f32();
    return s[0] + s[n / 2] + s[n - 1];
  }
  auto s = b.f64();
  return s[0] + s[n / 2] + s[n - 1];
}

std::string format_double(double v) {
  char buf[64];
  snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

BenchStats summarize_samples(std::vector<double> samples) {
  if (samples.empty()) throw std::invalid_argument("summarize_samples: empty");
  BenchStats st;
  st.n_total = samples.size();
  std::sort(samples.begin(), samples.end());
  double q1 = quantile_sorted(samples, 0.25);
  double q3 = quantile_sorted(samples, 0.75);
  double iqr = q3 - q1;
  double lo = q1 - 1.5 * iqr;
  double hi = q3 + 1.5 * iqr;

  double sum = 0.0;
  size_t kept = 0;
  for (double v : samples) {
    if (v >= lo && v <= hi) {
      sum += v;
      ++kept;
    }
  }
  st.n_kept = kept;
  st.mean = sum / static_cast<double>(kept);
  if (kept >= 2) {
    double ss = 0.0;
    for (double v : samples) {
      if (v >= lo && v <= hi) {
        double d = v - st.mean;
        ss += d * d;
      }
    }
    st.std_dev = std::sqrt(ss / static_cast<double>(kept - 1));
  }
  return st;
}

double timer_resolution_ns() {
  static const double res = [] {
    double best = 1e9;
    for (int i = 0; i < 1000; ++i) {
      auto t0 = Clock::now();
      auto t1 = Clock::now();
      while (t1 == t0) t1 = Clock::now();
      double d = std::chrono::duration<double, std::nano>(t1 - t0).count();
      best = std::min(best, d);
    }
    return best;
  }();
  return res;
}

BenchReport benchmark_op(const ActivationKind& kind, KernelVariant variant, Pass pass,
                         Precision precision, size_t buffer_len, size_t n_total,
                         size_t warmup, int workers, uint64_t seed) {
  if (buffer_len < 1) throw std::invalid_argument("benchmark_op: buffer_len must be >= 1");
  if (n_total < 10) throw std::invalid_argument("benchmark_op: n_total must be >= 10");

  Buffer input(precision, buffer_len);
  fill_uniform(input, seed);
  Buffer output(precision, buffer_len);
  Buffer upstream(precision, buffer_len);
  fill_uniform(upstream, seed + 1);
  Buffer grad_out(precision, buffer_len);

  // Backward timings use the cache of one untimed forward.
  ActivationCache cache = apply_forward(kind, input, output, variant, workers);

  auto one_pass = [&] {
    if (pass == Pass::forward) {
      apply_forward(kind, input, output, variant, workers);
      g_sink = g_sink + checksum(output);
    } else {
      apply_backward(kind, cache, upstream, grad_out, workers);
      g_sink = g_sink + checksum(grad_out);
    }
  };

  for (size_t i = 0; i < warmup; ++i) one_pass();

  std::vector<double> samples;
  samples.reserve(n_total);
  for (size_t i = 0; i < n_total; ++i) {
    auto t0 = Clock::now();
    one_pass();
    auto t1 = Clock::now();
    samples.push_back(std::chrono::duration<double, std::nano>(t1 - t0).count());
  }

  BenchStats st = summarize_samples(std::move(samples));
  BenchReport r;
  r.kind = kind;
  r.variant = variant;
  r.pass = pass;
  r.precision = precision;
  r.buffer_len = buffer_len;
  r.n_total = st.n_total;
  r.n_kept = st.n_kept;
  r.warmup = warmup;
  r.mean_ns = st.mean;
  r.std_ns = st.std_dev;
  r.workers = workers;
  r.timer_warning = timer_resolution_ns() > 0.01 * st.mean;
  return r;
}

std::vector<BenchReport> speed_profile(size_t buffer_len, size_t n_total, size_t warmup,
                                       int workers, uint64_t seed) {
  struct Cell {
    ActivationKind kind;
    KernelVariant variant;
  };
  const Cell cells[] = {
      {ActivationKind::ReLU(), KernelVariant::naive},
      {ActivationKind::SoftPlus(), KernelVariant::naive},
      {ActivationKind::Mish(), KernelVariant::naive},
      {ActivationKind::Mish(), KernelVariant::fused},
  };
  std::vector<BenchReport> out;
  out.reserve(16);
  for (const Cell& c : cells) {
    for (Pass pass : {Pass::forward, Pass::backward}) {
      for (Precision prec : {Precision::single_prec, Precision::double_prec}) {
        out.push_back(benchmark_op(c.kind, c.variant, pass, prec, buffer_len,
                                   n_total, warmup, workers, seed));
      }
    }
  }
  return out;
}

void write_bench_csv(std::ostream& os, const std::vector<BenchReport>& reports) {
  csv_write_row(os, {"kind", "variant", "pass", "precision", "buffer_len", "n_total",
                     "n_kept", "mean_ns", "std_ns", "workers"});
  for (const BenchReport& r : reports) {
    csv_write_row(os, {activation_name(r.kind), variant_name(r.variant), pass_name(r.pass),
                       precision_name(r.precision), std::to_string(r.buffer_len),
                       std::to_string(r.n_total), std::to_string(r.n_kept),
                       format_double(r.mean_ns), format_double(r.std_ns),
                       std::to_string(r.workers)});
  }
}

}  // namespace mish
