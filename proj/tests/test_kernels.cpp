#include "mish/kernels.hpp"

#include <cmath>
#include <gtest/gtest.h>

#include "mish/errors.hpp"
#include "mish/rng.hpp"

namespace mish {
namespace {

constexpr double kMish1 = 0.86509838826731034611623344925631;
constexpr double kMishNeg1 = -0.30340146137410891807438927537837;

TEST(ApplyForward, MishKnownTriple) {
  Buffer in(std::vector<double>{0.0, 1.0, -1.0});
  Buffer out(Precision::double_prec, 3);
  apply_forward(ActivationKind::Mish(), in, out);
  EXPECT_EQ(out.f64()[0], 0.0);
  EXPECT_NEAR(out.f64()[1], kMish1, 1e-15);
  EXPECT_NEAR(out.f64()[2], kMishNeg1, 1e-15);
}

TEST(ApplyForward, ReluTriple) {
  Buffer in(std::vector<double>{-2.0, 0.0, 3.0});
  Buffer out(Precision::double_prec, 3);
  apply_forward(ActivationKind::ReLU(), in, out);
  EXPECT_EQ(out.f64()[0], 0.0);
  EXPECT_EQ(out.f64()[1], 0.0);
  EXPECT_EQ(out.f64()[2], 3.0);
}

TEST(ApplyForward, ErrorsOnMismatchAndEmpty) {
  Buffer in(Precision::double_prec, 4);
  Buffer shorter(Precision::double_prec, 3);
  Buffer wrong_prec(Precision::single_prec, 4);
  EXPECT_THROW(apply_forward(ActivationKind::Mish(), in, shorter), std::invalid_argument);
  EXPECT_THROW(apply_forward(ActivationKind::Mish(), in, wrong_prec), std::invalid_argument);
  Buffer empty(Precision::double_prec, 0);
  Buffer empty2(Precision::double_prec, 0);
  EXPECT_THROW(apply_forward(ActivationKind::Mish(), empty, empty2), std::invalid_argument);
  // Fused cache is a mish-only concept.
  EXPECT_THROW(apply_forward(ActivationKind::ReLU(), in, in, KernelVariant::fused),
               std::invalid_argument);
}

// Kernel output must equal the scalar path at every index, both precisions.
TEST(ApplyForward, ElementwiseFidelity) {
  for (size_t len : {size_t{1}, size_t{7}, size_t{1024}, size_t{1000000}}) {
    for (int ki : {0, 1, 2, 9, 14}) {  // mish, swish, relu, gelu, tanh_softplus
      const ActivationKind& kind = ActivationKind::all_default()[ki];
      Buffer in64(Precision::double_prec, len);
      fill_uniform(in64, 1000 + len);
      Buffer out64(Precision::double_prec, len);
      apply_forward(kind, in64, out64);
      auto in = in64.f64();
      auto out = out64.f64();
      for (size_t i = 0; i < len; i += std::max<size_t>(1, len / 4096)) {
        ASSERT_EQ(out[i], eval(kind, in[i])) << activation_name(kind) << " i=" << i;
      }

      Buffer in32(Precision::single_prec, len);
      fill_uniform(in32, 1000 + len);
      Buffer out32(Precision::single_prec, len);
      apply_forward(kind, in32, out32);
      auto in32s = in32.f32();
      auto out32s = out32.f32();
      for (size_t i = 0; i < len; i += std::max<size_t>(1, len / 4096)) {
        float want = static_cast<float>(eval(kind, static_cast<double>(in32s[i])));
        ASSERT_EQ(out32s[i], want) << activation_name(kind) << " i=" << i;
      }
    }
  }
}

TEST(ApplyForward, WorkerCountDoesNotChangeResult) {
  const size_t len = 100000;
  Buffer in(Precision::double_prec, len);
  fill_uniform(in, 5);
  Buffer out1(Precision::double_prec, len), out4(Precision::double_prec, len);
  apply_forward(ActivationKind::Mish(), in, out1, KernelVariant::naive, 1);
  apply_forward(ActivationKind::Mish(), in, out4, KernelVariant::naive, 4);
  for (size_t i = 0; i < len; ++i) ASSERT_EQ(out1.f64()[i], out4.f64()[i]);
}

TEST(ApplyBackward, MishAtZero) {
  Buffer in(std::vector<double>{0.0});
  Buffer out(Precision::double_prec, 1);
  ActivationCache cache = apply_forward(ActivationKind::Mish(), in, out);
  Buffer up(std::vector<double>{1.0});
  Buffer grad_out(Precision::double_prec, 1);
  apply_backward(ActivationKind::Mish(), cache, up, grad_out);
  EXPECT_NEAR(grad_out.f64()[0], 0.6, 1e-12);
}

TEST(ApplyBackward, ZeroUpstreamGivesZeroGrad) {
  const size_t len = 257;
  for (int ki : {0, 2, 9}) {
    const ActivationKind& kind = ActivationKind::all_default()[ki];
    Buffer in(Precision::double_prec, len);
    fill_uniform(in, 9);
    Buffer out(Precision::double_prec, len);
    ActivationCache cache = apply_forward(kind, in, out);
    Buffer up(Precision::double_prec, len);  // zeros
    Buffer grad_out(Precision::double_prec, len);
    apply_backward(kind, cache, up, grad_out);
    for (size_t i = 0; i < len; ++i) ASSERT_EQ(grad_out.f64()[i], 0.0);
  }
}

TEST(ApplyBackward, FusedMatchesNaive) {
  const size_t len = 100000;
  // double
  {
    Buffer in(Precision::double_prec, len);
    fill_uniform(in, 77);
    Buffer out(Precision::double_prec, len);
    Buffer up(Precision::double_prec, len);
    fill_uniform(up, 78);
    ActivationCache naive_cache = apply_forward(ActivationKind::Mish(), in, out);
    ActivationCache fused_cache =
        apply_forward(ActivationKind::Mish(), in, out, KernelVariant::fused);
    Buffer g_naive(Precision::double_prec, len), g_fused(Precision::double_prec, len);
    apply_backward(ActivationKind::Mish(), naive_cache, up, g_naive);
    apply_backward(ActivationKind::Mish(), fused_cache, up, g_fused);
    double max_diff = 0.0;
    for (size_t i = 0; i < len; ++i)
      max_diff = std::max(max_diff, std::abs(g_naive.f64()[i] - g_fused.f64()[i]));
    EXPECT_LE(max_diff, 1e-12);
  }
  // single
  {
    Buffer in(Precision::single_prec, len);
    fill_uniform(in, 79);
    Buffer out(Precision::single_prec, len);
    Buffer up(Precision::single_prec, len);
    fill_uniform(up, 80);
    ActivationCache naive_cache = apply_forward(ActivationKind::Mish(), in, out);
    ActivationCache fused_cache =
        apply_forward(ActivationKind::Mish(), in, out, KernelVariant::fused);
    Buffer g_naive(Precision::single_prec, len), g_fused(Precision::single_prec, len);
    apply_backward(ActivationKind::Mish(), naive_cache, up, g_naive);
    apply_backward(ActivationKind::Mish(), fused_cache, up, g_fused);
    double max_diff = 0.0;
    for (size_t i = 0; i < len; ++i)
      max_diff = std::max(
          max_diff, std::abs(static_cast<double>(g_naive.f32()[i]) - g_fused.f32()[i]));
    EXPECT_LE(max_diff, 1e-6);
  }
}

TEST(ApplyBackward, MissingFusedCacheIsStateError) {
  Buffer in(std::vector<double>{1.0, 2.0});
  Buffer out(Precision::double_prec, 2);
  ActivationCache cache = apply_forward(ActivationKind::Mish(), in, out);
  cache.variant = KernelVariant::fused;  // claims fused but has no cache
  Buffer up(std::vector<double>{1.0, 1.0});
  Buffer grad_out(Precision::double_prec, 2);
  EXPECT_THROW(apply_backward(ActivationKind::Mish(), cache, up, grad_out), StateError);
}

TEST(FusedForward, CachesTanhSoftplus) {
  Buffer in(std::vector<double>{-2.0, 0.5, 3.0});
  Buffer out(Precision::double_prec, 3);
  ActivationCache cache = apply_forward(ActivationKind::Mish(), in, out, KernelVariant::fused);
  ASSERT_TRUE(cache.saved_tanh_sp.has_value());
  for (int i = 0; i < 3; ++i) {
    double x = in.f64()[i];
    EXPECT_NEAR(cache.saved_tanh_sp->f64()[i], std::tanh(softplus_stable(x)), 1e-15);
    EXPECT_NEAR(out.f64()[i], eval(ActivationKind::Mish(), x), 1e-15);
  }
}

// Single-precision kernels stay finite over the whole stated input range.
TEST(Stability, NoNanInfSinglePrecisionWideRange) {
  const size_t len = 20000;
  Buffer in(Precision::single_prec, len);
  {
    RandomEngine rng(31);
    auto s = in.f32();
    for (size_t i = 0; i < len; ++i) s[i] = static_cast<float>(rng.uniform(-1e4, 1e4));
    s[0] = -1e4f;
    s[1] = 1e4f;
    s[2] = 0.0f;
  }
  Buffer out(Precision::single_prec, len);
  Buffer up(Precision::single_prec, len);
  fill_uniform(up, 4);
  Buffer grad_out(Precision::single_prec, len);
  for (int ki = 0; ki < kActivationCount; ++ki) {
    const ActivationKind& kind = ActivationKind::all_default()[ki];
    ActivationCache cache = apply_forward(kind, in, out);
    apply_backward(kind, cache, up, grad_out);
    for (size_t i = 0; i < len; ++i) {
      ASSERT_TRUE(std::isfinite(out.f32()[i])) << activation_name(kind) << " " << in.f32()[i];
      ASSERT_TRUE(std::isfinite(grad_out.f32()[i]))
          << activation_name(kind) << " " << in.f32()[i];
    }
  }
}

TEST(FillUniform, DeterministicUnderSeed) {
  Buffer a(Precision::single_prec, 1024), b(Precision::single_prec, 1024);
  fill_uniform(a, 123);
  fill_uniform(b, 123);
  for (size_t i = 0; i < 1024; ++i) ASSERT_EQ(a.f32()[i], b.f32()[i]);
  Buffer c(Precision::single_prec, 1024);
  fill_uniform(c, 124);
  bool any_diff = false;
  for (size_t i = 0; i < 1024; ++i) any_diff = any_diff || a.f32()[i] != c.f32()[i];
  EXPECT_TRUE(any_diff);
}

}  // namespace
}  // namespace mish
