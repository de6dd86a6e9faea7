#include "mish/bench.hpp"

#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

namespace mish {
namespace {

TEST(SummarizeSamples, ConstantVector) {
  std::vector<double> s(100, 5.0);
  BenchStats st = summarize_samples(s);
  EXPECT_EQ(st.n_total, 100u);
  EXPECT_EQ(st.n_kept, 100u);
  EXPECT_DOUBLE_EQ(st.mean, 5.0);
  EXPECT_DOUBLE_EQ(st.std_dev, 0.0);
}

// Hand application of the 1.5 IQR rule: ten 1.0s and a single 100.0.
TEST(SummarizeSamples, DiscardsSingleOutlier) {
  std::vector<double> s(10, 1.0);
  s.push_back(100.0);
  BenchStats st = summarize_samples(s);
  EXPECT_EQ(st.n_total, 11u);
  EXPECT_EQ(st.n_kept, 10u);
  EXPECT_DOUBLE_EQ(st.mean, 1.0);
  EXPECT_DOUBLE_EQ(st.std_dev, 0.0);
}

TEST(SummarizeSamples, KeepsMildSpread) {
  std::vector<double> s = {1.0, 2.0, 3.0, 4.0, 5.0};
  BenchStats st = summarize_samples(s);
  EXPECT_EQ(st.n_kept, 5u);
  EXPECT_DOUBLE_EQ(st.mean, 3.0);
  // Unbiased std of 1..5.
  EXPECT_NEAR(st.std_dev, std::sqrt(2.5), 1e-12);
}

TEST(SummarizeSamples, EmptyThrows) {
  EXPECT_THROW(summarize_samples({}), std::invalid_argument);
}

TEST(BenchmarkOp, ValidatesArguments) {
  EXPECT_THROW(benchmark_op(ActivationKind::ReLU(), KernelVariant::naive, Pass::forward,
                            Precision::single_prec, 0),
               std::invalid_argument);
  EXPECT_THROW(benchmark_op(ActivationKind::ReLU(), KernelVariant::naive, Pass::forward,
                            Precision::single_prec, 64, 5),
               std::invalid_argument);
}

TEST(BenchmarkOp, ReportFieldsAreDeterministic) {
  BenchReport a = benchmark_op(ActivationKind::ReLU(), KernelVariant::naive, Pass::forward,
                               Precision::single_prec, 4096, 12, 2);
  BenchReport b = benchmark_op(ActivationKind::ReLU(), KernelVariant::naive, Pass::forward,
                               Precision::single_prec, 4096, 12, 2);
  EXPECT_EQ(a.n_total, b.n_total);
  EXPECT_EQ(a.warmup, b.warmup);
  EXPECT_EQ(a.buffer_len, b.buffer_len);
  EXPECT_EQ(a.workers, 1);
  EXPECT_GT(a.mean_ns, 0.0);
}

TEST(SpeedProfile, SixteenRowsAndSchema) {
  // Tiny buffer: exercises the plumbing, not the timings.
  std::vector<BenchReport> reports = speed_profile(1024, 12, 2);
  ASSERT_EQ(reports.size(), 16u);

  std::ostringstream os;
  write_bench_csv(os, reports);
  std::istringstream is(os.str());
  std::string header;
  std::getline(is, header);
  EXPECT_EQ(header,
            "kind,variant,pass,precision,buffer_len,n_total,n_kept,mean_ns,std_ns,workers");
  int rows = 0;
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) ++rows;
  EXPECT_EQ(rows, 16);

  int fused = 0, naive = 0, fwd = 0, bwd = 0, single = 0, dbl = 0;
  for (const BenchReport& r : reports) {
    (r.variant == KernelVariant::fused ? fused : naive)++;
    (r.pass == Pass::forward ? fwd : bwd)++;
    (r.precision == Precision::single_prec ? single : dbl)++;
    EXPECT_LE(r.n_kept, r.n_total);
    EXPECT_GT(r.mean_ns, 0.0);
  }
  EXPECT_EQ(fused, 4);
  EXPECT_EQ(fwd, 8);
  EXPECT_EQ(single, 8);
}

TEST(TimerResolution, IsPositiveAndSane) {
  double res = timer_resolution_ns();
  EXPECT_GT(res, 0.0);
  EXPECT_LT(res, 1e7);  // anything past 10ms would be unusable
}

}  // namespace
}  // namespace mish
