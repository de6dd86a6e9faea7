#include "mish/kernels.hpp"

#include <cmath>
#include <stdexcept>
#include <thread>
#include <vector>

#include "mish/errors.hpp"
#include "mish/rng.hpp"

namespace mish {

namespace {

void check_same(const Buffer& a, const Buffer& b, const char* what) {
  if (a.size() != b.size())
    throw std::invalid_argument(std::string(what) + ": length mismatch");
  if (a.precision() != b.precision())
    throw std::invalid_argument(std::string(what) + ": precision mismatch");
}

// Runs fn(begin, end) over [0, n) on `workers` threads, contiguous chunks.
template <typename Fn>
void parallel_chunks(size_t n, int workers, Fn&& fn) {
  if (workers <= 1 || n < 2048) {
    fn(size_t{0}, n);
    return;
  }
  size_t w = static_cast<size_t>(workers);
  std::vector<std::thread> pool;
  pool.reserve(w);
  size_t chunk = (n + w - 1) / w;
  for (size_t t = 0; t < w; ++t) {
    size_t b = t * chunk;
    size_t e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

template <typename T>
void apply_forward_span(const ActivationKind& kind, std::span<const T> in,
                        std::span<T> out, std::span<T> tanh_sp_out) {
  const bool want_t = !tanh_sp_out.empty();
  if (want_t && kind.tag != Activation::mish)
    throw std::invalid_argument("fused forward cache is defined for mish only");
  for (size_t i = 0; i < in.size(); ++i) {
    double x = static_cast<double>(in[i]);
    if (want_t) {
      double t = std::tanh(softplus_stable(x));
      tanh_sp_out[i] = static_cast<T>(t);
      out[i] = static_cast<T>(x * t);
    } else {
      out[i] = static_cast<T>(eval(kind, x));
    }
  }
}

template <typename T>
void apply_backward_naive_span(const ActivationKind& kind, std::span<const T> saved_in,
                               std::span<const T> upstream, std::span<T> grad_out) {
  for (size_t i = 0; i < saved_in.size(); ++i) {
    double x = static_cast<double>(saved_in[i]);
    grad_out[i] = static_cast<T>(static_cast<double>(upstream[i]) * grad(kind, x));
  }
}

template <typename T>
void apply_backward_fused_span(std::span<const T> saved_in, std::span<const T> tanh_sp,
                               std::span<const T> upstream, std::span<T> grad_out) {
  for (size_t i = 0; i < saved_in.size(); ++i) {
    double x = static_cast<double>(saved_in[i]);
    double t = static_cast<double>(tanh_sp[i]);
    double d = t + x * (1.0 - t * t) * sigmoid_stable(x);
    grad_out[i] = static_cast<T>(static_cast<double>(upstream[i]) * d);
  }
}

template void apply_forward_span<float>(const ActivationKind&, std::span<const float>,
                                        std::span<float>, std::span<float>);
template void apply_forward_span<double>(const ActivationKind&, std::span<const double>,
                                         std::span<double>, std::span<double>);
template void apply_backward_naive_span<float>(const ActivationKind&, std::span<const float>,
                                               std::span<const float>, std::span<float>);
template void apply_backward_naive_span<double>(const ActivationKind&, std::span<const double>,
                                                std::span<const double>, std::span<double>);
template void apply_backward_fused_span<float>(std::span<const float>, std::span<const float>,
                                               std::span<const float>, std::span<float>);
template void apply_backward_fused_span<double>(std::span<const double>, std::span<const double>,
                                                std::span<const double>, std::span<double>);

ActivationCache apply_forward(const ActivationKind& kind, const Buffer& input,
                              Buffer& output, KernelVariant variant, int workers) {
  check_same(input, output, "apply_forward");
  if (input.size() == 0)
    throw std::invalid_argument("apply_forward: empty buffer");
  if (variant == KernelVariant::fused && kind.tag != Activation::mish)
    throw std::invalid_argument("apply_forward: fused variant is defined for mish only");

  ActivationCache cache;
  cache.variant = variant;
  cache.saved_input = input;
  if (variant == KernelVariant::fused)
    cache.saved_tanh_sp.emplace(input.precision(), input.size());

  if (input.precision() == Precision::single_prec) {
    auto in = input.f32();
    auto out = output.f32();
    std::span<float> tsp =
        cache.saved_tanh_sp ? cache.saved_tanh_sp->f32() : std::span<float>();
    parallel_chunks(in.size(), workers, [&](size_t b, size_t e) {
      apply_forward_span<float>(kind, in.subspan(b, e - b), out.subspan(b, e - b),
                                tsp.empty() ? tsp : tsp.subspan(b, e - b));
    });
  } else {
    auto in = input.f64();
    auto out = output.f64();
    std::span<double> tsp =
        cache.saved_tanh_sp ? cache.saved_tanh_sp->f64() : std::span<double>();
    parallel_chunks(in.size(), workers, [&](size_t b, size_t e) {
      apply_forward_span<double>(kind, in.subspan(b, e - b), out.subspan(b, e - b),
                                 tsp.empty() ? tsp : tsp.subspan(b, e - b));
    });
  }
  return cache;
}

void apply_backward(const ActivationKind& kind, const ActivationCache& cache,
                    const Buffer& upstream, Buffer& grad_out, int workers) {
  check_same(cache.saved_input, upstream, "apply_backward");
  check_same(cache.saved_input, grad_out, "apply_backward");
  if (cache.variant == KernelVariant::fused && !cache.saved_tanh_sp)
    throw StateError("apply_backward: fused cache is missing saved tanh(softplus)");

  const size_t n = cache.saved_input.size();
  if (cache.saved_input.precision() == Precision::single_prec) {
    auto in = cache.saved_input.f32();
    auto up = upstream.f32();
    auto out = grad_out.f32();
    parallel_chunks(n, workers, [&](size_t b, size_t e) {
      if (cache.variant == KernelVariant::fused) {
        apply_backward_fused_span<float>(in.subspan(b, e - b),
                                         cache.saved_tanh_sp->f32().subspan(b, e - b),
                                         up.subspan(b, e - b), out.subspan(b, e - b));
      } else {
        apply_backward_naive_span<float>(kind, in.subspan(b, e - b),
                                         up.subspan(b, e - b), out.subspan(b, e - b));
      }
    });
  } else {
    auto in = cache.saved_input.f64();
    auto up = upstream.f64();
    auto out = grad_out.f64();
    parallel_chunks(n, workers, [&](size_t b, size_t e) {
      if (cache.variant == KernelVariant::fused) {
        apply_backward_fused_span<double>(in.subspan(b, e - b),
                                          cache.saved_tanh_sp->f64().subspan(b, e - b),
                                          up.subspan(b, e - b), out.subspan(b, e - b));
      } else {
        apply_backward_naive_span<double>(kind, in.subspan(b, e - b),
                                          up.subspan(b, e - b), out.subspan(b, e - b));
      }
    });
  }
}

void fill_uniform(Buffer& buf, uint64_t seed) {
  RandomEngine rng(seed);
  if (buf.precision() == Precision::single_prec) {
    for (auto& v : buf.f32()) v = static_cast<float>(rng.uniform(-3.0, 3.0));
  } else {
    for (auto& v : buf.f64()) v = rng.uniform(-3.0, 3.0);
  }
}

}  // namespace mish
