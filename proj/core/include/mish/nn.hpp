#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mish/activations.hpp"
#include "mish/rng.hpp"
#include "mish/tensor.hpp"

namespace mish {

enum class Initializer { glorot_uniform, lecun_normal, he_uniform };

std::string initializer_name(Initializer init);
Initializer parse_initializer(std::string_view name);

enum class Mode { train, eval };

// Declarative layer descriptor. Shapes compose left to right; validation
// happens when a Network is built against a concrete input shape.
struct LayerDesc {
  enum class Kind { dense, conv2d, batchnorm, dropout, maxpool, flatten, activation };
  Kind kind = Kind::dense;

  int64_t in = 0, out = 0;                       // dense
  int64_t in_ch = 0, out_ch = 0, k = 0;          // conv2d
  int64_t stride = 1, pad = 0;                   // conv2d
  int64_t features = 0;                          // batchnorm
  double eps = 1e-5, momentum = 0.9;             // batchnorm
  double rate = 0.0;                             // dropout
  int64_t pool_k = 2, pool_stride = 2;           // maxpool
  ActivationKind act;                            // activation

  static LayerDesc Dense(int64_t in, int64_t out);
  static LayerDesc Conv2D(int64_t in_ch, int64_t out_ch, int64_t k,
                          int64_t stride = 1, int64_t pad = 0);
  static LayerDesc BatchNorm(int64_t features, double eps = 1e-5, double momentum = 0.9);
  static LayerDesc Dropout(double rate);
  static LayerDesc MaxPool(int64_t k = 2, int64_t stride = 2);
  static LayerDesc Flatten();
  static LayerDesc Act(const ActivationKind& kind);
};

struct NetworkSpec {
  std::vector<LayerDesc> layers;
  Initializer initializer = Initializer::glorot_uniform;
  uint64_t seed = 0;
};

// One parameter tensor with its gradient slot. block_size is the contiguous
// stride of the unit used by filter-normalized direction draws (a dense row,
// a conv filter, or the whole tensor for vectors).
template <typename T>
struct ParamTensor {
  std::string name;
  std::vector<int64_t> shape;
  std::vector<T> value;
  std::vector<T> grad;
  int64_t block_size = 0;
  int64_t fan_in = 0, fan_out = 0;
  bool is_weight = false;  // false for biases and batchnorm scale/shift
};

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const = 0;
  // Train mode stores whatever backward needs; eval mode stores nothing.
  virtual Tensor<T> forward(const Tensor<T>& x, Mode mode, RandomEngine& rng) = 0;
  virtual Tensor<T> backward(const Tensor<T>& dy) = 0;
  virtual std::vector<ParamTensor<T>*> params() { return {}; }
  // Non-parameter persistent state (batchnorm running statistics).
  virtual std::vector<std::pair<std::string, std::vector<T>*>> state_buffers() { return {}; }
  virtual const LayerDesc& desc() const = 0;
};

template <typename T>
class Network {
 public:
  // Validates shape composition against input_shape (without the batch dim)
  // and initializes parameters from spec.seed. Throws SpecError.
  static Network build(const NetworkSpec& spec, std::vector<int64_t> input_shape);

  Tensor<T> forward(const Tensor<T>& batch, Mode mode);
  // Propagates d(loss)/d(logits); fills every ParamTensor::grad.
  void backward(const Tensor<T>& dlogits);

  std::vector<ParamTensor<T>*> parameters();
  std::vector<std::pair<std::string, std::vector<T>*>> state_buffers();
  int64_t param_count() const;
  void zero_grad();

  const NetworkSpec& spec() const { return spec_; }
  const std::vector<int64_t>& input_shape() const { return input_shape_; }

  // Dropout mask stream; reseed for reproducible training runs.
  void seed_dropout(uint64_t seed) { rng_.reseed(seed); }

 private:
  NetworkSpec spec_;
  std::vector<int64_t> input_shape_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
  RandomEngine rng_;
};

// Mean softmax cross-entropy over the batch. Returns the loss and writes
// d(loss)/d(logits) when dlogits is non-null. Empty batch throws.
template <typename T>
double softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels,
                             Tensor<T>* dlogits);
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits);

// Reference convolution paths, explicit loops. The layer's im2col fast path
// must agree with these to 1e-10 in double; used by tests.
template <typename T>
Tensor<T> conv2d_forward_naive(const Tensor<T>& x, const Tensor<T>& w,
                               std::span<const T> bias, int64_t stride, int64_t pad);
template <typename T>
void conv2d_backward_naive(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy,
                           int64_t stride, int64_t pad, Tensor<T>& dx, Tensor<T>& dw,
                           std::span<T> dbias);

struct OptimizerConfig {
  enum class Kind { sgd, rmsprop, adam };
  Kind kind = Kind::sgd;
  double lr = 0.01;
  double momentum = 0.9;   // sgd
  double rho = 0.9;        // rmsprop
  double beta1 = 0.9;      // adam
  double beta2 = 0.999;    // adam
  double eps = 1e-8;

  static OptimizerConfig SGD(double lr = 0.01, double momentum = 0.9);
  static OptimizerConfig RMSProp(double lr = 1e-3, double rho = 0.9, double eps = 1e-8);
  static OptimizerConfig Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                              double eps = 1e-8);
};

std::string optimizer_name(OptimizerConfig::Kind kind);

template <typename T>
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}
  void step(std::vector<ParamTensor<T>*> params);
  const OptimizerConfig& config() const { return cfg_; }

 private:
  struct Slot {
    std::vector<T> m1, m2;
  };
  OptimizerConfig cfg_;
  std::vector<Slot> slots_;
  int64_t t_ = 0;
};

struct TrainConfig {
  OptimizerConfig optimizer;
  int64_t batch_size = 128;
  int64_t epochs = 10;
  uint64_t seed = 0;
};

struct EpochMetrics {
  double train_loss = 0.0;
  double test_loss = 0.0;
  double test_acc = 0.0;
};

struct RunResult {
  double final_test_acc = 0.0;
  double final_test_loss = 0.0;
  std::vector<EpochMetrics> per_epoch;
  double wall_seconds = 0.0;
  uint64_t seed = 0;
  // Non-finite loss terminates the run early; recorded, never retried.
  bool diverged = false;
};

struct StatSummary {
  size_t n_runs = 0;
  double mean_acc = 0.0;
  double mean_loss = 0.0;
  double std_acc = 0.0;  // unbiased (n-1)
};

struct Dataset;  // data.hpp

// Seeded epoch loop: shuffle, minibatch SGD step, per-epoch test evaluation.
// Deterministic for fixed (spec.seed, config.seed) at worker count 1.
template <typename T>
RunResult train(const NetworkSpec& spec, const TrainConfig& config,
                const Dataset& train_set, const Dataset& test_set);
// Same loop, also hands back the trained network.
template <typename T>
std::pair<RunResult, Network<T>> train_with_net(const NetworkSpec& spec,
                                                const TrainConfig& config,
                                                const Dataset& train_set,
                                                const Dataset& test_set);

// Eval-mode mean loss and accuracy over a whole dataset.
template <typename T>
std::pair<double, double> evaluate(Network<T>& net, const Dataset& ds,
                                   int64_t batch_size = 256);

// Assembles samples [first, first+count) into a batch tensor; rank 2 when the
// first layer is dense, rank 4 otherwise.
template <typename T>
Tensor<T> make_batch(const Dataset& ds, std::span<const int64_t> indices,
                     bool flatten);

StatSummary aggregate_runs(const std::vector<RunResult>& results);

// depth blocks of [Dense(width) -> BatchNorm -> activation -> Dropout(0.25)]
// and a Dense(classes) head. 784-dim flat input by default.
NetworkSpec build_mlp(int64_t depth, int64_t width, const ActivationKind& activation,
                      int64_t input_dim = 784, int64_t classes = 10);

// Six 3x3 same-padded conv layers (32-32-pool-64-64-pool-128-128-pool at
// scale 1) with a Dense(128)+Dense(10) head. width_scale shrinks every
// channel count for desk-size runs; the plan itself is fixed.
NetworkSpec build_cnn6(const ActivationKind& activation, int64_t in_ch = 3,
                       int64_t img = 32, double width_scale = 1.0, int64_t classes = 10);

// JSON with the field names of RunResult / StatSummary as declared above.
std::string run_result_to_json(const RunResult& r);
std::string stat_summary_to_json(const StatSummary& s, const std::string& activation);
// CSV, one epoch per row: epoch,train_loss,test_loss,test_acc.
void run_result_to_csv(std::ostream& os, const RunResult& r);

// Network checkpoint (spec + double-precision parameters), binary.
template <typename T>
void save_network(const Network<T>& net, const std::string& path);
template <typename T>
Network<T> load_network(const std::string& path);

extern template class Network<float>;
extern template class Network<double>;
extern template class Optimizer<float>;
extern template class Optimizer<double>;

}  // namespace mish
