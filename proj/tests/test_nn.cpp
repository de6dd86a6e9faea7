#include "mish/nn.hpp"

#include <cmath>
#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "mish/data.hpp"
#include "mish/errors.hpp"

namespace mish {
namespace {

// Max relative error of analytic vs central-difference gradients over every
// parameter, denominator floored so near-zero entries compare absolutely.
double gradcheck(Network<double>& net, const Tensor<double>& batch,
                 const std::vector<int>& labels, double h = 1e-5) {
  auto loss_fn = [&] {
    Tensor<double> logits = net.forward(batch, Mode::train);
    return softmax_cross_entropy<double>(logits, labels, nullptr);
  };
  net.zero_grad();
  Tensor<double> logits = net.forward(batch, Mode::train);
  Tensor<double> dlogits;
  softmax_cross_entropy<double>(logits, labels, &dlogits);
  net.backward(dlogits);

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

TEST(InitParams, GlorotUniformBound) {
  NetworkSpec spec;
  spec.seed = 42;
  spec.layers.push_back(LayerDesc::Dense(100, 100));
  Network<double> net = Network<double>::build(spec, {100});
  double bound = std::sqrt(6.0 / 200.0);
  auto params = net.parameters();
  double max_abs = 0.0;
  for (double v : params[0]->value) max_abs = std::max(max_abs, std::abs(v));
  EXPECT_LE(max_abs, bound);
  EXPECT_GT(max_abs, 0.5 * bound);  // actually fills the range
  for (double v : params[1]->value) EXPECT_EQ(v, 0.0);
}

TEST(InitParams, DeterministicUnderSeed) {
  NetworkSpec spec;
  spec.seed = 7;
  spec.layers.push_back(LayerDesc::Dense(50, 30));
  spec.layers.push_back(LayerDesc::Act(ActivationKind::Mish()));
  spec.layers.push_back(LayerDesc::Dense(30, 10));
  Network<double> a = Network<double>::build(spec, {50});
  Network<double> b = Network<double>::build(spec, {50});
  auto pa = a.parameters(), pb = b.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (size_t i = 0; i < pa.size(); ++i) {
    ASSERT_EQ(pa[i]->value.size(), pb[i]->value.size());
    for (size_t j = 0; j < pa[i]->value.size(); ++j)
      ASSERT_EQ(pa[i]->value[j], pb[i]->value[j]);
  }
}

TEST(InitParams, LeCunNormalStd) {
  NetworkSpec spec;
  spec.seed = 11;
  spec.initializer = Initializer::lecun_normal;
  spec.layers.push_back(LayerDesc::Dense(10000, 10));
  Network<double> net = Network<double>::build(spec, {10000});
  auto& w = net.parameters()[0]->value;
  double mean = 0.0;
  for (double v : w) mean += v;
  mean /= static_cast<double>(w.size());
  double ss = 0.0;
  for (double v : w) ss += (v - mean) * (v - mean);
  double sd = std::sqrt(ss / static_cast<double>(w.size() - 1));
  EXPECT_NEAR(sd, 0.01, 0.01 * 0.05);
}

TEST(InitParams, ActivationSwapKeepsDraws) {
  NetworkSpec a = build_mlp(2, 32, ActivationKind::ReLU(), 16, 10);
  NetworkSpec b = build_mlp(2, 32, ActivationKind::Mish(), 16, 10);
  a.seed = b.seed = 99;
  Network<double> na = Network<double>::build(a, {16});
  Network<double> nb = Network<double>::build(b, {16});
  auto pa = na.parameters(), pb = nb.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (size_t i = 0; i < pa.size(); ++i)
    for (size_t j = 0; j < pa[i]->value.size(); ++j)
      ASSERT_EQ(pa[i]->value[j], pb[i]->value[j]);
}

TEST(Forward, ZeroWeightsGiveUniformSoftmax) {
  NetworkSpec spec;
  spec.seed = 1;
  spec.layers.push_back(LayerDesc::Dense(8, 10));
  Network<double> net = Network<double>::build(spec, {8});
  for (auto* p : net.parameters()) std::fill(p->value.begin(), p->value.end(), 0.0);
  RandomEngine rng(2);
  Tensor<double> batch({4, 8});
  for (auto& v : batch.data) v = rng.uniform(-2.0, 2.0);
  Tensor<double> probs = softmax(net.forward(batch, Mode::eval));
  for (double p : probs.data) EXPECT_NEAR(p, 0.1, 1e-12);
}

TEST(Forward, DropoutRateZeroIsIdentity) {
  NetworkSpec spec;
  spec.seed = 3;
  spec.layers.push_back(LayerDesc::Dense(6, 12));
  spec.layers.push_back(LayerDesc::Dropout(0.0));
  spec.layers.push_back(LayerDesc::Dense(12, 4));
  Network<double> net = Network<double>::build(spec, {6});
  Tensor<double> batch({3, 6});
  RandomEngine rng(4);
  for (auto& v : batch.data) v = rng.uniform(-1.0, 1.0);
  Tensor<double> train_out = net.forward(batch, Mode::train);
  Tensor<double> eval_out = net.forward(batch, Mode::eval);
  for (size_t i = 0; i < train_out.size(); ++i)
    ASSERT_EQ(train_out.data[i], eval_out.data[i]);
}

TEST(Forward, BatchNormTrainStatistics) {
  NetworkSpec spec;
  spec.seed = 5;
  spec.layers.push_back(LayerDesc::BatchNorm(16));
  spec.layers.push_back(LayerDesc::Dense(16, 4));
  Network<double> net = Network<double>::build(spec, {16});
  RandomEngine rng(6);
  Tensor<double> batch({64, 16});
  for (auto& v : batch.data) v = rng.normal(3.0, 2.5);

  // Identity head to observe the normalized features directly.
  auto params = net.parameters();
  // params: gamma, beta, dense.w, dense.b -- use a bare BN net instead:
  NetworkSpec bn_only;
  bn_only.seed = 5;
  bn_only.layers.push_back(LayerDesc::BatchNorm(16));
  bn_only.layers.push_back(LayerDesc::Dense(16, 16));
  Network<double> bn_net = Network<double>::build(bn_only, {16});
  auto bp = bn_net.parameters();
  std::fill(bp[2]->value.begin(), bp[2]->value.end(), 0.0);
  for (int i = 0; i < 16; ++i) bp[2]->value[i * 16 + i] = 1.0;

  Tensor<double> out = bn_net.forward(batch, Mode::train);
  for (int j = 0; j < 16; ++j) {
    double mean = 0.0;
    for (int i = 0; i < 64; ++i) mean += out.data[i * 16 + j];
    mean /= 64.0;
    double var = 0.0;
    for (int i = 0; i < 64; ++i) {
      double d = out.data[i * 16 + j] - mean;
      var += d * d;
    }
    var /= 64.0;
    EXPECT_LE(std::abs(mean), 1e-6);
    EXPECT_NEAR(var, 1.0, 1e-4);
  }
}

TEST(Backward, SoftmaxCrossEntropyGradientIdentity) {
  Tensor<double> logits({1, 5}, {0.3, -1.2, 2.0, 0.0, 0.7});
  std::vector<int> labels = {2};
  Tensor<double> dlogits;
  softmax_cross_entropy<double>(logits, labels, &dlogits);
  Tensor<double> probs = softmax(logits);
  for (int j = 0; j < 5; ++j) {
    double want = probs.data[j] - (j == 2 ? 1.0 : 0.0);
    EXPECT_NEAR(dlogits.data[j], want, 1e-12);
  }
}

TEST(Backward, EmptyBatchRejected) {
  Tensor<double> logits({0, 5});
  std::vector<int> labels;
  EXPECT_THROW(softmax_cross_entropy<double>(logits, labels, nullptr), std::invalid_argument);
}

TEST(Backward, TwoLayerGradcheckPerActivation) {
  for (const char* name : {"mish", "swish", "relu", "gelu", "tanh_softplus"}) {
    NetworkSpec spec;
    spec.seed = 1234;
    spec.layers.push_back(LayerDesc::Dense(12, 16));
    spec.layers.push_back(LayerDesc::BatchNorm(16));
    spec.layers.push_back(LayerDesc::Act(parse_activation(name)));
    spec.layers.push_back(LayerDesc::Dense(16, 10));
    Network<double> net = Network<double>::build(spec, {12});
    ASSERT_LE(net.param_count(), 5000);

    RandomEngine rng(99);
    Tensor<double> batch({8, 12});
    for (auto& v : batch.data) v = rng.uniform(-1.5, 1.5);
    std::vector<int> labels(8);
    for (auto& l : labels) l = static_cast<int>(rng.uniform_index(10));

    double err = gradcheck(net, batch, labels);
    EXPECT_LE(err, 1e-5) << name;
  }
}

TEST(Backward, ConvNetGradcheck) {
  NetworkSpec spec;
  spec.seed = 321;
  spec.layers.push_back(LayerDesc::Conv2D(2, 3, 3, 1, 1));
  spec.layers.push_back(LayerDesc::Act(ActivationKind::Mish()));
  spec.layers.push_back(LayerDesc::MaxPool(2, 2));
  spec.layers.push_back(LayerDesc::Conv2D(3, 4, 3, 1, 1));
  spec.layers.push_back(LayerDesc::Act(ActivationKind::Swish()));
  spec.layers.push_back(LayerDesc::Flatten());
  spec.layers.push_back(LayerDesc::Dense(3 * 3 * 4, 5));
  Network<double> net = Network<double>::build(spec, {6, 6, 2});

  RandomEngine rng(55);
  Tensor<double> batch({4, 6, 6, 2});
  for (auto& v : batch.data) v = rng.uniform(-1.0, 1.0);
  std::vector<int> labels = {0, 2, 4, 1};

  double err = gradcheck(net, batch, labels);
  EXPECT_LE(err, 1e-4);
}

// Both convolution routes, forward and backward, against each other.
TEST(Conv, NaiveAndIm2colAgree) {
  RandomEngine rng(77);
  Tensor<double> x({3, 7, 7, 2});
  for (auto& v : x.data) v = rng.uniform(-1.0, 1.0);
  Tensor<double> w({5, 3, 3, 2});
  for (auto& v : w.data) v = rng.uniform(-0.5, 0.5);
  std::vector<double> bias(5);
  for (auto& v : bias) v = rng.uniform(-0.2, 0.2);

  Tensor<double> y_naive = conv2d_forward_naive<double>(x, w, bias, 1, 1);

  NetworkSpec spec;
  spec.seed = 0;
  const int64_t out_elems = 7 * 7 * 5;
  spec.layers.push_back(LayerDesc::Conv2D(2, 5, 3, 1, 1));
  spec.layers.push_back(LayerDesc::Flatten());
  spec.layers.push_back(LayerDesc::Dense(out_elems, out_elems));
  Network<double> net = Network<double>::build(spec, {7, 7, 2});
  auto params = net.parameters();
  params[0]->value = w.data;
  params[1]->value.assign(bias.begin(), bias.end());
  std::fill(params[2]->value.begin(), params[2]->value.end(), 0.0);
  for (int64_t i = 0; i < out_elems; ++i) params[2]->value[i * out_elems + i] = 1.0;

  Tensor<double> y_layer = net.forward(x, Mode::train);
  ASSERT_EQ(y_layer.size(), y_naive.size());
  for (size_t i = 0; i < y_naive.size(); ++i)
    ASSERT_NEAR(y_naive.data[i], y_layer.data[i], 1e-10);

  // Backward: push a random upstream through both routes. The identity head
  // hands dy through to the conv layer untouched.
  Tensor<double> dy({3, 7, 7, 5});
  for (auto& v : dy.data) v = rng.uniform(-1.0, 1.0);
  Tensor<double> dy_flat;
  dy_flat.shape = {3, out_elems};
  dy_flat.data = dy.data;
  net.zero_grad();
  net.backward(dy_flat);

  Tensor<double> dx_naive, dw_naive;
  std::vector<double> db_naive(5, 0.0);
  conv2d_backward_naive<double>(x, w, dy, 1, 1, dx_naive, dw_naive, db_naive);

  for (size_t i = 0; i < dw_naive.size(); ++i)
    ASSERT_NEAR(dw_naive.data[i], params[0]->grad[i], 1e-10);
  for (size_t i = 0; i < db_naive.size(); ++i)
    ASSERT_NEAR(db_naive[i], params[1]->grad[i], 1e-10);
}

TEST(Train, OverfitsTinySubset) {
  Dataset blobs = synth_blobs(8, 4, 16, 0.25, 42);  // 32 samples
  ASSERT_EQ(blobs.size(), 32);

  NetworkSpec spec;
  spec.seed = 10;
  spec.layers.push_back(LayerDesc::Dense(16, 32));
  spec.layers.push_back(LayerDesc::Act(ActivationKind::Mish()));
  spec.layers.push_back(LayerDesc::Dense(32, 4));

  TrainConfig tc;
  tc.optimizer = OptimizerConfig::SGD(0.05, 0.9);
  tc.batch_size = 32;
  tc.epochs = 200;
  tc.seed = 11;

  RunResult r = train<double>(spec, tc, blobs, blobs);
  EXPECT_FALSE(r.diverged);
  EXPECT_EQ(r.per_epoch.size(), 200u);
  EXPECT_EQ(r.final_test_acc, 1.0);
  EXPECT_LT(r.final_test_loss, 0.01);
}

TEST(Train, DeterministicReplay) {
  Dataset ds = synth_blobs(20, 3, 8, 0.3, 5);
  NetworkSpec spec;
  spec.seed = 20;
  spec.layers.push_back(LayerDesc::Dense(8, 16));
  spec.layers.push_back(LayerDesc::BatchNorm(16));
  spec.layers.push_back(LayerDesc::Act(ActivationKind::Mish()));
  spec.layers.push_back(LayerDesc::Dropout(0.25));
  spec.layers.push_back(LayerDesc::Dense(16, 3));
  TrainConfig tc;
  tc.optimizer = OptimizerConfig::Adam(1e-3);
  tc.batch_size = 16;
  tc.epochs = 5;
  tc.seed = 21;

  RunResult a = train<double>(spec, tc, ds, ds);
  RunResult b = train<double>(spec, tc, ds, ds);
  ASSERT_EQ(a.per_epoch.size(), b.per_epoch.size());
  for (size_t i = 0; i < a.per_epoch.size(); ++i) {
    ASSERT_EQ(a.per_epoch[i].train_loss, b.per_epoch[i].train_loss);
    ASSERT_EQ(a.per_epoch[i].test_loss, b.per_epoch[i].test_loss);
    ASSERT_EQ(a.per_epoch[i].test_acc, b.per_epoch[i].test_acc);
  }
}

TEST(Train, DivergenceIsReportedNotTrapped) {
  Dataset ds = synth_blobs(20, 3, 8, 0.3, 5);
  NetworkSpec spec;
  spec.seed = 30;
  spec.layers.push_back(LayerDesc::Dense(8, 16));
  spec.layers.push_back(LayerDesc::Act(ActivationKind::XLogTanhExp()));
  spec.layers.push_back(LayerDesc::Dense(16, 3));
  TrainConfig tc;
  tc.optimizer = OptimizerConfig::SGD(1e14, 0.0);  // guaranteed blow-up
  tc.batch_size = 16;
  tc.epochs = 5;
  tc.seed = 31;
  RunResult r = train<double>(spec, tc, ds, ds);
  EXPECT_TRUE(r.diverged);
  EXPECT_TRUE(std::isnan(r.final_test_acc));
}

TEST(BuildMlp, LayerArithmetic) {
  NetworkSpec one = build_mlp(1, 500, ActivationKind::Mish());
  EXPECT_EQ(one.layers.size(), 5u);  // 4 block layers + head
  NetworkSpec twenty = build_mlp(20, 500, ActivationKind::Mish());
  EXPECT_EQ(twenty.layers.size(), 4u * 20 + 1);
  // Composes against 784-dim input.
  Network<float> net = Network<float>::build(twenty, {784});
  EXPECT_GT(net.param_count(), 0);
  EXPECT_THROW(build_mlp(0, 500, ActivationKind::Mish()), SpecError);
}

TEST(BuildCnn6, ParameterCountInvariantAcrossActivations) {
  NetworkSpec m = build_cnn6(ActivationKind::Mish());
  NetworkSpec s = build_cnn6(ActivationKind::Swish());
  NetworkSpec r = build_cnn6(ActivationKind::ReLU());
  Network<float> nm = Network<float>::build(m, {32, 32, 3});
  Network<float> ns = Network<float>::build(s, {32, 32, 3});
  Network<float> nr = Network<float>::build(r, {32, 32, 3});
  EXPECT_EQ(nm.param_count(), ns.param_count());
  EXPECT_EQ(nm.param_count(), nr.param_count());
}

TEST(BuildCnn6, ForwardShape) {
  NetworkSpec spec = build_cnn6(ActivationKind::Mish(), 3, 32, 0.25);
  spec.seed = 3;
  Network<float> net = Network<float>::build(spec, {32, 32, 3});
  Tensor<float> batch({4, 32, 32, 3});
  RandomEngine rng(8);
  for (auto& v : batch.data) v = static_cast<float>(rng.uniform(0.0, 1.0));
  Tensor<float> logits = net.forward(batch, Mode::eval);
  ASSERT_EQ(logits.rank(), 2u);
  EXPECT_EQ(logits.dim(0), 4);
  EXPECT_EQ(logits.dim(1), 10);
}

TEST(AggregateRuns, HandArithmetic) {
  RunResult a, b;
  a.final_test_acc = 0.8;
  a.final_test_loss = 0.5;
  b.final_test_acc = 0.9;
  b.final_test_loss = 0.3;
  StatSummary s = aggregate_runs({a, b});
  EXPECT_NEAR(s.mean_acc, 0.85, 1e-15);
  EXPECT_NEAR(s.mean_loss, 0.4, 1e-15);
  EXPECT_NEAR(s.std_acc, 0.070710678118654752, 1e-12);

  StatSummary same = aggregate_runs({a, a, a});
  EXPECT_EQ(same.std_acc, 0.0);

  EXPECT_THROW(aggregate_runs({a}), std::invalid_argument);
}

TEST(Dropout, TrainAverageMatchesEvalOutput) {
  NetworkSpec spec;
  spec.seed = 40;
  spec.layers.push_back(LayerDesc::Dense(8, 16));
  spec.layers.push_back(LayerDesc::Dropout(0.25));
  spec.layers.push_back(LayerDesc::Dense(16, 6));
  Network<double> net = Network<double>::build(spec, {8});
  net.seed_dropout(41);
  // All-positive weights and inputs: every output is a sum of positive
  // contributions, so a scaling bug shows up as bias far above the
  // Monte-Carlo noise floor.
  for (auto* p : net.parameters())
    for (double& v : p->value) v = std::abs(v);

  RandomEngine rng(42);
  Tensor<double> batch({2, 8});
  for (auto& v : batch.data) v = rng.uniform(0.2, 1.0);

  Tensor<double> eval_out = net.forward(batch, Mode::eval);
  std::vector<double> acc(eval_out.size(), 0.0);
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    Tensor<double> out = net.forward(batch, Mode::train);
    for (size_t i = 0; i < out.size(); ++i) acc[i] += out.data[i];
  }
  for (size_t i = 0; i < acc.size(); ++i) {
    double mean = acc[i] / trials;
    EXPECT_NEAR(mean, eval_out.data[i], 0.02 * std::abs(eval_out.data[i])) << i;
  }
}

TEST(BatchNorm, EvalUsesRunningStats) {
  NetworkSpec spec;
  spec.seed = 50;
  spec.layers.push_back(LayerDesc::BatchNorm(4));
  spec.layers.push_back(LayerDesc::Dense(4, 2));
  Network<double> net = Network<double>::build(spec, {4});

  RandomEngine rng(51);
  Tensor<double> batch({32, 4});
  for (auto& v : batch.data) v = rng.normal(5.0, 2.0);
  // Many train passes move the running stats toward the batch stats.
  for (int i = 0; i < 200; ++i) net.forward(batch, Mode::train);
  Tensor<double> train_out = net.forward(batch, Mode::train);
  Tensor<double> eval_out = net.forward(batch, Mode::eval);
  double max_diff = 0.0;
  for (size_t i = 0; i < train_out.size(); ++i)
    max_diff = std::max(max_diff, std::abs(train_out.data[i] - eval_out.data[i]));
  EXPECT_LT(max_diff, 0.05);
}

TEST(Serialization, RunResultJsonAndCsv) {
  RunResult r;
  r.final_test_acc = 0.75;
  r.final_test_loss = 0.6;
  r.wall_seconds = 1.5;
  r.seed = 9;
  r.per_epoch = {{1.0, 0.9, 0.5}, {0.7, 0.6, 0.75}};
  std::string js = run_result_to_json(r);
  EXPECT_NE(js.find("\"final_test_acc\""), std::string::npos);
  EXPECT_NE(js.find("\"final_test_loss\""), std::string::npos);
  EXPECT_NE(js.find("\"per_epoch\""), std::string::npos);
  EXPECT_NE(js.find("\"wall_seconds\""), std::string::npos);
  EXPECT_NE(js.find("\"seed\""), std::string::npos);

  std::ostringstream os;
  run_result_to_csv(os, r);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "epoch,train_loss,test_loss,test_acc");
  int rows = 0;
  while (std::getline(is, line))
    if (!line.empty()) ++rows;
  EXPECT_EQ(rows, 2);

  StatSummary s{3, 0.9, 0.2, 0.01};
  std::string sj = stat_summary_to_json(s, "mish");
  EXPECT_NE(sj.find("\"n_runs\""), std::string::npos);
  EXPECT_NE(sj.find("\"mean_acc\""), std::string::npos);
  EXPECT_NE(sj.find("\"std_acc\""), std::string::npos);
}

TEST(Checkpoint, SaveLoadRoundTrip) {
  NetworkSpec spec;
  spec.seed = 60;
  spec.layers.push_back(LayerDesc::Dense(6, 12));
  spec.layers.push_back(LayerDesc::BatchNorm(12));
  spec.layers.push_back(LayerDesc::Act(ActivationKind::Mish()));
  spec.layers.push_back(LayerDesc::Dense(12, 3));
  Network<double> net = Network<double>::build(spec, {6});

  RandomEngine rng(61);
  Tensor<double> batch({5, 6});
  for (auto& v : batch.data) v = rng.uniform(-1.0, 1.0);
  net.forward(batch, Mode::train);  // move the running stats off their init

  std::string path = (std::filesystem::temp_directory_path() / "mish_ckpt_test.bin").string();
  save_network(net, path);
  Network<double> loaded = load_network<double>(path);

  Tensor<double> a = net.forward(batch, Mode::eval);
  Tensor<double> b = loaded.forward(batch, Mode::eval);
  ASSERT_EQ(a.size(), b.size());
  for (size_t i = 0; i < a.size(); ++i) ASSERT_EQ(a.data[i], b.data[i]);
  std::filesystem::remove(path);
}

TEST(NetworkSpecValidation, RejectsBadCompositions) {
  NetworkSpec spec;
  spec.layers.push_back(LayerDesc::Dense(10, 20));
  spec.layers.push_back(LayerDesc::Dense(30, 5));  // 20 != 30
  EXPECT_THROW(Network<double>::build(spec, {10}), SpecError);

  NetworkSpec no_head;
  no_head.layers.push_back(LayerDesc::Dense(10, 20));
  no_head.layers.push_back(LayerDesc::Act(ActivationKind::Mish()));
  EXPECT_THROW(Network<double>::build(no_head, {10}), SpecError);

  EXPECT_THROW(LayerDesc::Dropout(1.0), SpecError);
  EXPECT_THROW(LayerDesc::Dropout(-0.1), SpecError);
}

// Desk-scale oracle: a 5-block MLP on the synthetic digit corpus.
TEST(Train, FiveLayerMlpReachesHighAccuracy) {
  Dataset all = synth_digits(14000, 7);
  Dataset train_set = head(all, 12000);
  Dataset test_set;
  test_set.num_classes = 10;
  std::vector<int64_t> shape = all.images.shape;
  shape[0] = 2000;
  test_set.images = Tensor<float>(shape);
  std::copy(all.images.data.begin() + 12000 * all.sample_elems(), all.images.data.end(),
            test_set.images.data.begin());
  test_set.labels.assign(all.labels.begin() + 12000, all.labels.end());

  NetworkSpec spec = build_mlp(5, 128, ActivationKind::Mish(), train_set.sample_elems(), 10);
  spec.seed = 70;
  TrainConfig tc;
  tc.optimizer = OptimizerConfig::SGD(0.01, 0.9);
  tc.batch_size = 128;
  tc.epochs = 5;
  tc.seed = 71;
  RunResult r = train<float>(spec, tc, train_set, test_set);
  EXPECT_FALSE(r.diverged);
  EXPECT_GE(r.final_test_acc, 0.97);
}

}  // namespace
}  // namespace mish
