#pragma once

#include <optional>
#include <span>

#include "mish/activations.hpp"
#include "mish/buffer.hpp"

namespace mish {

// naive recomputes every derivative term in the backward pass from the saved
// input; fused additionally caches tanh(softplus(x)) during the forward pass
// and rebuilds the Mish derivative from it as t + x (1 - t^2) sigmoid(x),
// skipping the two transcendentals that dominate the backward cost.
enum class KernelVariant { naive, fused };

inline std::string variant_name(KernelVariant v) {
  return v == KernelVariant::naive ? "naive" : "fused";
}

struct ActivationCache {
  Buffer saved_input;
  std::optional<Buffer> saved_tanh_sp;  // fused only
  KernelVariant variant = KernelVariant::naive;
};

// Span cores. Single precision evaluates each element in double and rounds
// once, so both precisions follow one code path and the float result is the
// correctly rounded double result.
template <typename T>
void apply_forward_span(const ActivationKind& kind, std::span<const T> in,
                        std::span<T> out, std::span<T> tanh_sp_out = {});
template <typename T>
void apply_backward_naive_span(const ActivationKind& kind, std::span<const T> saved_in,
                               std::span<const T> upstream, std::span<T> grad_out);
// Mish only: derivative from the cached t = tanh(softplus(x)).
template <typename T>
void apply_backward_fused_span(std::span<const T> saved_in, std::span<const T> tanh_sp,
                               std::span<const T> upstream, std::span<T> grad_out);

// Buffer API. workers > 1 partitions the buffer into contiguous chunks;
// results are identical for any worker count.
ActivationCache apply_forward(const ActivationKind& kind, const Buffer& input,
                              Buffer& output, KernelVariant variant = KernelVariant::naive,
                              int workers = 1);
void apply_backward(const ActivationKind& kind, const ActivationCache& cache,
                    const Buffer& upstream, Buffer& grad_out, int workers = 1);

// Seeded test/benchmark fill, uniform in [-3, 3).
void fill_uniform(Buffer& buf, uint64_t seed);

}  // namespace mish
