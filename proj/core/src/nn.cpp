#include "mish/nn.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "mish/data.hpp"
#include "mish/errors.hpp"
#include "mish/kernels.hpp"

#include "json.hpp"

namespace mish {

namespace {

template <typename T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

int64_t conv_out_dim(int64_t in, int64_t k, int64_t stride, int64_t pad) {
  return (in + 2 * pad - k) / stride + 1;
}

}  // namespace

// ---------------------------------------------------------------------------
// Layer descriptors

LayerDesc LayerDesc::Dense(int64_t in, int64_t out) {
  LayerDesc d;
  d.kind = Kind::dense;
  d.in = in;
  d.out = out;
  return d;
}

LayerDesc LayerDesc::Conv2D(int64_t in_ch, int64_t out_ch, int64_t k, int64_t stride,
                            int64_t pad) {
  LayerDesc d;
  d.kind = Kind::conv2d;
  d.in_ch = in_ch;
  d.out_ch = out_ch;
  d.k = k;
  d.stride = stride;
  d.pad = pad;
  return d;
}

LayerDesc LayerDesc::BatchNorm(int64_t features, double eps, double momentum) {
  LayerDesc d;
  d.kind = Kind::batchnorm;
  d.features = features;
  d.eps = eps;
  d.momentum = momentum;
  return d;
}

LayerDesc LayerDesc::Dropout(double rate) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw SpecError("dropout rate must be in [0, 1)");
  LayerDesc d;
  d.kind = Kind::dropout;
  d.rate = rate;
  return d;
}

LayerDesc LayerDesc::MaxPool(int64_t k, int64_t stride) {
  LayerDesc d;
  d.kind = Kind::maxpool;
  d.pool_k = k;
  d.pool_stride = stride;
  return d;
}

LayerDesc LayerDesc::Flatten() {
  LayerDesc d;
  d.kind = Kind::flatten;
  return d;
}

LayerDesc LayerDesc::Act(const ActivationKind& kind) {
  LayerDesc d;
  d.kind = Kind::activation;
  d.act = kind;
  return d;
}

std::string initializer_name(Initializer init) {
  switch (init) {
    case Initializer::glorot_uniform: return "glorot_uniform";
    case Initializer::lecun_normal: return "lecun_normal";
    case Initializer::he_uniform: return "he_uniform";
  }
  return "unknown";
}

Initializer parse_initializer(std::string_view name) {
  if (name == "glorot_uniform") return Initializer::glorot_uniform;
  if (name == "lecun_normal") return Initializer::lecun_normal;
  if (name == "he_uniform") return Initializer::he_uniform;
  throw std::invalid_argument("unknown initializer: " + std::string(name));
}

// ---------------------------------------------------------------------------
// Layers

namespace {

template <typename T>
class DenseLayer final : public Layer<T> {
 public:
  explicit DenseLayer(const LayerDesc& d, int index) : desc_(d) {
    w_.name = "dense" + std::to_string(index) + ".w";
    w_.shape = {d.out, d.in};
    w_.value.assign(static_cast<size_t>(d.out * d.in), T{});
    w_.grad = w_.value;
    w_.block_size = d.in;  // one row per output neuron
    w_.fan_in = d.in;
    w_.fan_out = d.out;
    w_.is_weight = true;
    b_.name = "dense" + std::to_string(index) + ".b";
    b_.shape = {d.out};
    b_.value.assign(static_cast<size_t>(d.out), T{});
    b_.grad = b_.value;
    b_.block_size = d.out;  // whole vector
    b_.fan_in = d.in;
    b_.fan_out = d.out;
  }

  std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override {
    if (in.size() != 1 || in[0] != desc_.in)
      throw SpecError("dense: expected flat input of dim " + std::to_string(desc_.in));
    return {desc_.out};
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode, RandomEngine&) override {
    const int64_t n = x.dim(0);
    Tensor<T> y({n, desc_.out});
    ConstMatMap<T> X(x.ptr(), n, desc_.in);
    ConstMatMap<T> W(w_.value.data(), desc_.out, desc_.in);
    MatMap<T> Y(y.ptr(), n, desc_.out);
    Y.noalias() = X * W.transpose();
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < desc_.out; ++j) y.data[i * desc_.out + j] += b_.value[j];
    if (mode == Mode::train) saved_x_ = x;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    const int64_t n = dy.dim(0);
    ConstMatMap<T> dY(dy.ptr(), n, desc_.out);
    ConstMatMap<T> X(saved_x_.ptr(), n, desc_.in);
    ConstMatMap<T> W(w_.value.data(), desc_.out, desc_.in);
    MatMap<T> dW(w_.grad.data(), desc_.out, desc_.in);
    dW.noalias() += dY.transpose() * X;
    for (int64_t j = 0; j < desc_.out; ++j) {
      T s{};
      for (int64_t i = 0; i < n; ++i) s += dy.data[i * desc_.out + j];
      b_.grad[j] += s;
    }
    Tensor<T> dx({n, desc_.in});
    MatMap<T> dX(dx.ptr(), n, desc_.in);
    dX.noalias() = dY * W;
    return dx;
  }

  std::vector<ParamTensor<T>*> params() override { return {&w_, &b_}; }
  const LayerDesc& desc() const override { return desc_; }

 private:
  LayerDesc desc_;
  ParamTensor<T> w_, b_;
  Tensor<T> saved_x_;
};

// im2col fast path; patch order is (ky, kx, ic) to match the weight layout
// (oc, ky, kx, ic).
template <typename T>
class Conv2DLayer final : public Layer<T> {
 public:
  explicit Conv2DLayer(const LayerDesc& d, int index) : desc_(d) {
    const int64_t patch = d.k * d.k * d.in_ch;
    w_.name = "conv" + std::to_string(index) + ".w";
    w_.shape = {d.out_ch, d.k, d.k, d.in_ch};
    w_.value.assign(static_cast<size_t>(d.out_ch * patch), T{});
    w_.grad = w_.value;
    w_.block_size = patch;  // one filter per output channel
    w_.fan_in = patch;
    w_.fan_out = d.k * d.k * d.out_ch;
    w_.is_weight = true;
    b_.name = "conv" + std::to_string(index) + ".b";
    b_.shape = {d.out_ch};
    b_.value.assign(static_cast<size_t>(d.out_ch), T{});
    b_.grad = b_.value;
    b_.block_size = d.out_ch;
    b_.fan_in = patch;
    b_.fan_out = d.out_ch;
  }

  std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override {
    if (in.size() != 3 || in[2] != desc_.in_ch)
      throw SpecError("conv2d: expected (H, W, " + std::to_string(desc_.in_ch) + ") input");
    int64_t oh = conv_out_dim(in[0], desc_.k, desc_.stride, desc_.pad);
    int64_t ow = conv_out_dim(in[1], desc_.k, desc_.stride, desc_.pad);
    if (oh < 1 || ow < 1) throw SpecError("conv2d: kernel does not fit input");
    return {oh, ow, desc_.out_ch};
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode, RandomEngine&) override {
    const int64_t n = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int64_t oh = conv_out_dim(h, desc_.k, desc_.stride, desc_.pad);
    const int64_t ow = conv_out_dim(w, desc_.k, desc_.stride, desc_.pad);
    const int64_t patch = desc_.k * desc_.k * desc_.in_ch;
    const int64_t rows = n * oh * ow;

    cols_ = Tensor<T>({rows, patch});
    im2col(x, cols_);

    Tensor<T> y({n, oh, ow, desc_.out_ch});
    ConstMatMap<T> C(cols_.ptr(), rows, patch);
    ConstMatMap<T> W(w_.value.data(), desc_.out_ch, patch);
    MatMap<T> Y(y.ptr(), rows, desc_.out_ch);
    Y.noalias() = C * W.transpose();
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t c = 0; c < desc_.out_ch; ++c) y.data[r * desc_.out_ch + c] += b_.value[c];

    if (mode == Mode::train) {
      saved_in_shape_ = x.shape;
    } else {
      cols_ = Tensor<T>();  // nothing retained in eval
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    const int64_t n = saved_in_shape_[0], h = saved_in_shape_[1], w = saved_in_shape_[2];
    const int64_t oh = dy.dim(1), ow = dy.dim(2);
    const int64_t patch = desc_.k * desc_.k * desc_.in_ch;
    const int64_t rows = n * oh * ow;

    ConstMatMap<T> dY(dy.ptr(), rows, desc_.out_ch);
    ConstMatMap<T> C(cols_.ptr(), rows, patch);
    MatMap<T> dW(w_.grad.data(), desc_.out_ch, patch);
    dW.noalias() += dY.transpose() * C;
    for (int64_t c = 0; c < desc_.out_ch; ++c) {
      T s{};
      for (int64_t r = 0; r < rows; ++r) s += dy.data[r * desc_.out_ch + c];
      b_.grad[c] += s;
    }

    // dCols = dY * W, then scatter-add back through the patch map.
    Tensor<T> dcols({rows, patch});
    MatMap<T> dC(dcols.ptr(), rows, patch);
    ConstMatMap<T> W(w_.value.data(), desc_.out_ch, patch);
    dC.noalias() = dY * W;

    Tensor<T> dx({n, h, w, desc_.in_ch});
    col2im(dcols, dx);
    return dx;
  }

  std::vector<ParamTensor<T>*> params() override { return {&w_, &b_}; }
  const LayerDesc& desc() const override { return desc_; }

 private:
  void im2col(const Tensor<T>& x, Tensor<T>& cols) const {
    const int64_t n = x.dim(0), h = x.dim(1), w = x.dim(2), c = desc_.in_ch;
    const int64_t oh = conv_out_dim(h, desc_.k, desc_.stride, desc_.pad);
    const int64_t ow = conv_out_dim(w, desc_.k, desc_.stride, desc_.pad);
    T* out = cols.ptr();
    for (int64_t i = 0; i < n; ++i) {
      const T* img = x.ptr() + i * h * w * c;
      for (int64_t oy = 0; oy < oh; ++oy) {
        for (int64_t ox = 0; ox < ow; ++ox) {
          for (int64_t ky = 0; ky < desc_.k; ++ky) {
            int64_t iy = oy * desc_.stride + ky - desc_.pad;
            for (int64_t kx = 0; kx < desc_.k; ++kx) {
              int64_t ix = ox * desc_.stride + kx - desc_.pad;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) {
                for (int64_t ic = 0; ic < c; ++ic) *out++ = T{};
              } else {
                const T* px = img + (iy * w + ix) * c;
                for (int64_t ic = 0; ic < c; ++ic) *out++ = px[ic];
              }
            }
          }
        }
      }
    }
  }

  void col2im(const Tensor<T>& dcols, Tensor<T>& dx) const {
    const int64_t n = dx.dim(0), h = dx.dim(1), w = dx.dim(2), c = desc_.in_ch;
    const int64_t oh = conv_out_dim(h, desc_.k, desc_.stride, desc_.pad);
    const int64_t ow = conv_out_dim(w, desc_.k, desc_.stride, desc_.pad);
    const T* in = dcols.ptr();
    for (int64_t i = 0; i < n; ++i) {
      T* img = dx.ptr() + i * h * w * c;
      for (int64_t oy = 0; oy < oh; ++oy) {
        for (int64_t ox = 0; ox < ow; ++ox) {
          for (int64_t ky = 0; ky < desc_.k; ++ky) {
            int64_t iy = oy * desc_.stride + ky - desc_.pad;
            for (int64_t kx = 0; kx < desc_.k; ++kx) {
              int64_t ix = ox * desc_.stride + kx - desc_.pad;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) {
                in += c;
              } else {
                T* px = img + (iy * w + ix) * c;
                for (int64_t ic = 0; ic < c; ++ic) px[ic] += *in++;
              }
            }
          }
        }
      }
    }
  }

  LayerDesc desc_;
  ParamTensor<T> w_, b_;
  Tensor<T> cols_;
  std::vector<int64_t> saved_in_shape_;
};

template <typename T>
class BatchNormLayer final : public Layer<T> {
 public:
  explicit BatchNormLayer(const LayerDesc& d, int index) : desc_(d) {
    gamma_.name = "bn" + std::to_string(index) + ".gamma";
    gamma_.shape = {d.features};
    gamma_.value.assign(static_cast<size_t>(d.features), T{1});
    gamma_.grad.assign(static_cast<size_t>(d.features), T{});
    gamma_.block_size = d.features;
    beta_.name = "bn" + std::to_string(index) + ".beta";
    beta_.shape = {d.features};
    beta_.value.assign(static_cast<size_t>(d.features), T{});
    beta_.grad = beta_.value;
    beta_.block_size = d.features;
    running_mean_.assign(static_cast<size_t>(d.features), T{});
    running_var_.assign(static_cast<size_t>(d.features), T{1});
  }

  std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override {
    if (in.size() != 1 || in[0] != desc_.features)
      throw SpecError("batchnorm: expected flat input of dim " +
                      std::to_string(desc_.features));
    return in;
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode, RandomEngine&) override {
    const int64_t n = x.dim(0), f = desc_.features;
    Tensor<T> y(x.shape);
    if (mode == Mode::eval) {
      for (int64_t j = 0; j < f; ++j) {
        T inv = T(1) / std::sqrt(running_var_[j] + T(desc_.eps));
        for (int64_t i = 0; i < n; ++i) {
          T xh = (x.data[i * f + j] - running_mean_[j]) * inv;
          y.data[i * f + j] = gamma_.value[j] * xh + beta_.value[j];
        }
      }
      return y;
    }

    xhat_ = Tensor<T>(x.shape);
    inv_std_.assign(static_cast<size_t>(f), T{});
    for (int64_t j = 0; j < f; ++j) {
      T mean{};
      for (int64_t i = 0; i < n; ++i) mean += x.data[i * f + j];
      mean /= static_cast<T>(n);
      T var{};
      for (int64_t i = 0; i < n; ++i) {
        T d = x.data[i * f + j] - mean;
        var += d * d;
      }
      var /= static_cast<T>(n);  // biased batch variance
      T inv = T(1) / std::sqrt(var + T(desc_.eps));
      inv_std_[j] = inv;
      for (int64_t i = 0; i < n; ++i) {
        T xh = (x.data[i * f + j] - mean) * inv;
        xhat_.data[i * f + j] = xh;
        y.data[i * f + j] = gamma_.value[j] * xh + beta_.value[j];
      }
      running_mean_[j] = T(desc_.momentum) * running_mean_[j] + T(1.0 - desc_.momentum) * mean;
      running_var_[j] = T(desc_.momentum) * running_var_[j] + T(1.0 - desc_.momentum) * var;
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    const int64_t n = dy.dim(0), f = desc_.features;
    Tensor<T> dx(dy.shape);
    for (int64_t j = 0; j < f; ++j) {
      T sum_dy{}, sum_dy_xh{};
      for (int64_t i = 0; i < n; ++i) {
        sum_dy += dy.data[i * f + j];
        sum_dy_xh += dy.data[i * f + j] * xhat_.data[i * f + j];
      }
      gamma_.grad[j] += sum_dy_xh;
      beta_.grad[j] += sum_dy;
      T scale = gamma_.value[j] * inv_std_[j] / static_cast<T>(n);
      for (int64_t i = 0; i < n; ++i) {
        dx.data[i * f + j] = scale * (static_cast<T>(n) * dy.data[i * f + j] - sum_dy -
                                      xhat_.data[i * f + j] * sum_dy_xh);
      }
    }
    return dx;
  }

  std::vector<ParamTensor<T>*> params() override { return {&gamma_, &beta_}; }
  std::vector<std::pair<std::string, std::vector<T>*>> state_buffers() override {
    return {{gamma_.name + ".running_mean", &running_mean_},
            {gamma_.name + ".running_var", &running_var_}};
  }
  const LayerDesc& desc() const override { return desc_; }

  std::vector<T>& running_mean() { return running_mean_; }
  std::vector<T>& running_var() { return running_var_; }

 private:
  LayerDesc desc_;
  ParamTensor<T> gamma_, beta_;
  std::vector<T> running_mean_, running_var_;
  Tensor<T> xhat_;
  std::vector<T> inv_std_;
};

// Inverted dropout: mask/keep scaling at train time, identity at eval.
template <typename T>
class DropoutLayer final : public Layer<T> {
 public:
  explicit DropoutLayer(const LayerDesc& d) : desc_(d) {}

  std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override {
    return in;
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode, RandomEngine& rng) override {
    if (mode == Mode::eval || desc_.rate == 0.0) {
      mask_.clear();
      return x;
    }
    const double keep = 1.0 - desc_.rate;
    const T scale = static_cast<T>(1.0 / keep);
    Tensor<T> y(x.shape);
    mask_.resize(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
      bool on = rng.uniform() < keep;
      mask_[i] = on;
      y.data[i] = on ? x.data[i] * scale : T{};
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    if (mask_.empty()) return dy;
    const T scale = static_cast<T>(1.0 / (1.0 - desc_.rate));
    Tensor<T> dx(dy.shape);
    for (size_t i = 0; i < dy.size(); ++i)
      dx.data[i] = mask_[i] ? dy.data[i] * scale : T{};
    return dx;
  }

  const LayerDesc& desc() const override { return desc_; }

 private:
  LayerDesc desc_;
  std::vector<uint8_t> mask_;
};

template <typename T>
class MaxPoolLayer final : public Layer<T> {
 public:
  explicit MaxPoolLayer(const LayerDesc& d) : desc_(d) {}

  std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override {
    if (in.size() != 3) throw SpecError("maxpool: expected (H, W, C) input");
    int64_t oh = (in[0] - desc_.pool_k) / desc_.pool_stride + 1;
    int64_t ow = (in[1] - desc_.pool_k) / desc_.pool_stride + 1;
    if (oh < 1 || ow < 1) throw SpecError("maxpool: window does not fit input");
    return {oh, ow, in[2]};
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode, RandomEngine&) override {
    const int64_t n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    const int64_t oh = (h - desc_.pool_k) / desc_.pool_stride + 1;
    const int64_t ow = (w - desc_.pool_k) / desc_.pool_stride + 1;
    Tensor<T> y({n, oh, ow, c});
    argmax_.resize(y.size());
    in_shape_ = x.shape;
    for (int64_t i = 0; i < n; ++i) {
      const T* img = x.ptr() + i * h * w * c;
      for (int64_t oy = 0; oy < oh; ++oy)
        for (int64_t ox = 0; ox < ow; ++ox)
          for (int64_t ch = 0; ch < c; ++ch) {
            T best = std::numeric_limits<T>::lowest();
            int64_t best_idx = 0;
            for (int64_t ky = 0; ky < desc_.pool_k; ++ky)
              for (int64_t kx = 0; kx < desc_.pool_k; ++kx) {
                int64_t iy = oy * desc_.pool_stride + ky;
                int64_t ix = ox * desc_.pool_stride + kx;
                int64_t idx = (iy * w + ix) * c + ch;
                if (img[idx] > best) {
                  best = img[idx];
                  best_idx = idx;
                }
              }
            int64_t out_idx = ((i * oh + oy) * ow + ox) * c + ch;
            y.data[out_idx] = best;
            argmax_[out_idx] = i * h * w * c + best_idx;
          }
    }
    if (mode == Mode::eval) argmax_.clear();
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    Tensor<T> dx(in_shape_);
    for (size_t o = 0; o < dy.size(); ++o) dx.data[argmax_[o]] += dy.data[o];
    return dx;
  }

  const LayerDesc& desc() const override { return desc_; }

 private:
  LayerDesc desc_;
  std::vector<int64_t> argmax_;
  std::vector<int64_t> in_shape_;
};

template <typename T>
class FlattenLayer final : public Layer<T> {
 public:
  explicit FlattenLayer(const LayerDesc& d) : desc_(d) {}

  std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override {
    int64_t n = 1;
    for (int64_t d : in) n *= d;
    return {n};
  }

  Tensor<T> forward(const Tensor<T>& x, Mode, RandomEngine&) override {
    in_shape_ = x.shape;
    Tensor<T> y;
    y.shape = {x.dim(0), static_cast<int64_t>(x.size()) / x.dim(0)};
    y.data = x.data;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    Tensor<T> dx;
    dx.shape = in_shape_;
    dx.data = dy.data;
    return dx;
  }

  const LayerDesc& desc() const override { return desc_; }

 private:
  LayerDesc desc_;
  std::vector<int64_t> in_shape_;
};

// Elementwise nonlinearity on the flattened view; all math goes through the
// kernel span cores. Mish uses the fused cache so backward reuses
// tanh(softplus(x)) from the forward pass.
template <typename T>
class ActivationLayer final : public Layer<T> {
 public:
  explicit ActivationLayer(const LayerDesc& d) : desc_(d) {}

  std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override {
    return in;
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode, RandomEngine&) override {
    Tensor<T> y(x.shape);
    const bool fused = desc_.act.tag == Activation::mish;
    if (mode == Mode::train && fused) {
      tanh_sp_.resize(x.size());
      apply_forward_span<T>(desc_.act, x.data, y.data, tanh_sp_);
    } else {
      apply_forward_span<T>(desc_.act, x.data, y.data);
      tanh_sp_.clear();
    }
    if (mode == Mode::train) saved_x_ = x;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    Tensor<T> dx(dy.shape);
    if (!tanh_sp_.empty()) {
      apply_backward_fused_span<T>(saved_x_.data, tanh_sp_, dy.data, dx.data);
    } else {
      apply_backward_naive_span<T>(desc_.act, saved_x_.data, dy.data, dx.data);
    }
    return dx;
  }

  const LayerDesc& desc() const override { return desc_; }

 private:
  LayerDesc desc_;
  Tensor<T> saved_x_;
  std::vector<T> tanh_sp_;
};

template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerDesc& d, int index) {
  using K = LayerDesc::Kind;
  switch (d.kind) {
    case K::dense: return std::make_unique<DenseLayer<T>>(d, index);
    case K::conv2d: return std::make_unique<Conv2DLayer<T>>(d, index);
    case K::batchnorm: return std::make_unique<BatchNormLayer<T>>(d, index);
    case K::dropout: return std::make_unique<DropoutLayer<T>>(d);
    case K::maxpool: return std::make_unique<MaxPoolLayer<T>>(d);
    case K::flatten: return std::make_unique<FlattenLayer<T>>(d);
    case K::activation: return std::make_unique<ActivationLayer<T>>(d);
  }
  throw SpecError("unknown layer kind");
}

template <typename T>
void init_param(ParamTensor<T>& p, Initializer init, RandomEngine& rng) {
  if (!p.is_weight) return;  // biases and batchnorm params keep their fill
  switch (init) {
    case Initializer::glorot_uniform: {
      double bound = std::sqrt(6.0 / static_cast<double>(p.fan_in + p.fan_out));
      for (auto& v : p.value) v = static_cast<T>(rng.uniform(-bound, bound));
      break;
    }
    case Initializer::lecun_normal: {
      double std_dev = 1.0 / std::sqrt(static_cast<double>(p.fan_in));
      for (auto& v : p.value) v = static_cast<T>(rng.normal(0.0, std_dev));
      break;
    }
    case Initializer::he_uniform: {
      double bound = std::sqrt(6.0 / static_cast<double>(p.fan_in));
      for (auto& v : p.value) v = static_cast<T>(rng.uniform(-bound, bound));
      break;
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Network

template <typename T>
Network<T> Network<T>::build(const NetworkSpec& spec, std::vector<int64_t> input_shape) {
  if (spec.layers.empty()) throw SpecError("network: empty layer list");
  if (spec.layers.back().kind != LayerDesc::Kind::dense)
    throw SpecError("network: terminal layer must be a dense classifier head");

  Network<T> net;
  net.spec_ = spec;
  net.input_shape_ = input_shape;
  std::vector<int64_t> shape = input_shape;
  int index = 0;
  for (const LayerDesc& d : spec.layers) {
    auto layer = make_layer<T>(d, index++);
    shape = layer->output_shape(shape);  // throws SpecError on mismatch
    net.layers_.push_back(std::move(layer));
  }

  RandomEngine init_rng(spec.seed);
  for (auto& layer : net.layers_)
    for (ParamTensor<T>* p : layer->params()) init_param(*p, spec.initializer, init_rng);
  net.rng_.reseed(mix_seed(spec.seed, 0x647270u));  // dropout stream
  return net;
}

template <typename T>
Tensor<T> Network<T>::forward(const Tensor<T>& batch, Mode mode) {
  if (batch.rank() < 2) throw std::invalid_argument("forward: batch must have a leading N dim");
  std::vector<int64_t> sample_shape(batch.shape.begin() + 1, batch.shape.end());
  if (sample_shape != input_shape_)
    throw std::invalid_argument("forward: batch shape does not match network input");
  Tensor<T> x = batch;
  for (auto& layer : layers_) x = layer->forward(x, mode, rng_);
  return x;
}

template <typename T>
void Network<T>::backward(const Tensor<T>& dlogits) {
  Tensor<T> g = dlogits;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
}

template <typename T>
std::vector<ParamTensor<T>*> Network<T>::parameters() {
  std::vector<ParamTensor<T>*> out;
  for (auto& layer : layers_)
    for (ParamTensor<T>* p : layer->params()) out.push_back(p);
  return out;
}

template <typename T>
std::vector<std::pair<std::string, std::vector<T>*>> Network<T>::state_buffers() {
  std::vector<std::pair<std::string, std::vector<T>*>> out;
  for (auto& layer : layers_)
    for (auto& b : layer->state_buffers()) out.push_back(b);
  return out;
}

template <typename T>
int64_t Network<T>::param_count() const {
  int64_t n = 0;
  for (const auto& layer : const_cast<Network<T>*>(this)->layers_)
    for (ParamTensor<T>* p : layer->params()) n += static_cast<int64_t>(p->value.size());
  return n;
}

template <typename T>
void Network<T>::zero_grad() {
  for (ParamTensor<T>* p : parameters()) std::fill(p->grad.begin(), p->grad.end(), T{});
}

template class Network<float>;
template class Network<double>;

// ---------------------------------------------------------------------------
// Loss

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
  const int64_t n = logits.dim(0), c = logits.dim(1);
  Tensor<T> out(logits.shape);
  for (int64_t i = 0; i < n; ++i) {
    const T* row = logits.ptr() + i * c;
    T* orow = out.ptr() + i * c;
    T mx = row[0];
    for (int64_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int64_t j = 0; j < c; ++j) {
      double e = std::exp(static_cast<double>(row[j] - mx));
      orow[j] = static_cast<T>(e);
      sum += e;
    }
    for (int64_t j = 0; j < c; ++j) orow[j] = static_cast<T>(static_cast<double>(orow[j]) / sum);
  }
  return out;
}

template <typename T>
double softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels,
                             Tensor<T>* dlogits) {
  const int64_t n = logits.dim(0), c = logits.dim(1);
  if (n == 0) throw std::invalid_argument("softmax_cross_entropy: empty batch");
  if (static_cast<int64_t>(labels.size()) != n)
    throw std::invalid_argument("softmax_cross_entropy: label count mismatch");

  if (dlogits) *dlogits = Tensor<T>(logits.shape);
  double loss = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const T* row = logits.ptr() + i * c;
    T mx = row[0];
    for (int64_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int64_t j = 0; j < c; ++j) sum += std::exp(static_cast<double>(row[j] - mx));
    double log_z = std::log(sum) + static_cast<double>(mx);
    int y = labels[i];
    if (y < 0 || y >= c) throw std::invalid_argument("softmax_cross_entropy: label out of range");
    loss += log_z - static_cast<double>(row[y]);
    if (dlogits) {
      for (int64_t j = 0; j < c; ++j) {
        double p = std::exp(static_cast<double>(row[j]) - log_z);
        double g = (p - (j == y ? 1.0 : 0.0)) / static_cast<double>(n);
        dlogits->data[i * c + j] = static_cast<T>(g);
      }
    }
  }
  return loss / static_cast<double>(n);
}

template Tensor<float> softmax<float>(const Tensor<float>&);
template Tensor<double> softmax<double>(const Tensor<double>&);
template double softmax_cross_entropy<float>(const Tensor<float>&, std::span<const int>,
                                             Tensor<float>*);
template double softmax_cross_entropy<double>(const Tensor<double>&, std::span<const int>,
                                              Tensor<double>*);

// ---------------------------------------------------------------------------
// Reference convolution

template <typename T>
Tensor<T> conv2d_forward_naive(const Tensor<T>& x, const Tensor<T>& w,
                               std::span<const T> bias, int64_t stride, int64_t pad) {
  const int64_t n = x.dim(0), h = x.dim(1), ww = x.dim(2), c = x.dim(3);
  const int64_t oc = w.dim(0), k = w.dim(1);
  const int64_t oh = conv_out_dim(h, k, stride, pad);
  const int64_t ow = conv_out_dim(ww, k, stride, pad);
  Tensor<T> y({n, oh, ow, oc});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t oy = 0; oy < oh; ++oy)
      for (int64_t ox = 0; ox < ow; ++ox)
        for (int64_t f = 0; f < oc; ++f) {
          T acc = bias.empty() ? T{} : bias[f];
          for (int64_t ky = 0; ky < k; ++ky) {
            int64_t iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= h) continue;
            for (int64_t kx = 0; kx < k; ++kx) {
              int64_t ix = ox * stride + kx - pad;
              if (ix < 0 || ix >= ww) continue;
              for (int64_t ic = 0; ic < c; ++ic) {
                acc += x.data[((i * h + iy) * ww + ix) * c + ic] *
                       w.data[((f * k + ky) * k + kx) * c + ic];
              }
            }
          }
          y.data[((i * oh + oy) * ow + ox) * oc + f] = acc;
        }
  return y;
}

template <typename T>
void conv2d_backward_naive(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy,
                           int64_t stride, int64_t pad, Tensor<T>& dx, Tensor<T>& dw,
                           std::span<T> dbias) {
  const int64_t n = x.dim(0), h = x.dim(1), ww = x.dim(2), c = x.dim(3);
  const int64_t oc = w.dim(0), k = w.dim(1);
  const int64_t oh = dy.dim(1), ow = dy.dim(2);
  dx = Tensor<T>(x.shape);
  dw = Tensor<T>(w.shape);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t oy = 0; oy < oh; ++oy)
      for (int64_t ox = 0; ox < ow; ++ox)
        for (int64_t f = 0; f < oc; ++f) {
          T g = dy.data[((i * oh + oy) * ow + ox) * oc + f];
          if (!dbias.empty()) dbias[f] += g;
          for (int64_t ky = 0; ky < k; ++ky) {
            int64_t iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= h) continue;
            for (int64_t kx = 0; kx < k; ++kx) {
              int64_t ix = ox * stride + kx - pad;
              if (ix < 0 || ix >= ww) continue;
              for (int64_t ic = 0; ic < c; ++ic) {
                dw.data[((f * k + ky) * k + kx) * c + ic] +=
                    g * x.data[((i * h + iy) * ww + ix) * c + ic];
                dx.data[((i * h + iy) * ww + ix) * c + ic] +=
                    g * w.data[((f * k + ky) * k + kx) * c + ic];
              }
            }
          }
        }
}

template Tensor<double> conv2d_forward_naive<double>(const Tensor<double>&, const Tensor<double>&,
                                                     std::span<const double>, int64_t, int64_t);
template void conv2d_backward_naive<double>(const Tensor<double>&, const Tensor<double>&,
                                            const Tensor<double>&, int64_t, int64_t,
                                            Tensor<double>&, Tensor<double>&, std::span<double>);
template Tensor<float> conv2d_forward_naive<float>(const Tensor<float>&, const Tensor<float>&,
                                                   std::span<const float>, int64_t, int64_t);
template void conv2d_backward_naive<float>(const Tensor<float>&, const Tensor<float>&,
                                           const Tensor<float>&, int64_t, int64_t,
                                           Tensor<float>&, Tensor<float>&, std::span<float>);

// ---------------------------------------------------------------------------
// Optimizers

OptimizerConfig OptimizerConfig::SGD(double lr, double momentum) {
  if (!(lr > 0.0)) throw std::invalid_argument("sgd: lr must be > 0");
  OptimizerConfig c;
  c.kind = Kind::sgd;
  c.lr = lr;
  c.momentum = momentum;
  return c;
}

OptimizerConfig OptimizerConfig::RMSProp(double lr, double rho, double eps) {
  if (!(lr > 0.0)) throw std::invalid_argument("rmsprop: lr must be > 0");
  OptimizerConfig c;
  c.kind = Kind::rmsprop;
  c.lr = lr;
  c.rho = rho;
  c.eps = eps;
  return c;
}

OptimizerConfig OptimizerConfig::Adam(double lr, double beta1, double beta2, double eps) {
  if (!(lr > 0.0)) throw std::invalid_argument("adam: lr must be > 0");
  OptimizerConfig c;
  c.kind = Kind::adam;
  c.lr = lr;
  c.beta1 = beta1;
  c.beta2 = beta2;
  c.eps = eps;
  return c;
}

std::string optimizer_name(OptimizerConfig::Kind kind) {
  switch (kind) {
    case OptimizerConfig::Kind::sgd: return "sgd";
    case OptimizerConfig::Kind::rmsprop: return "rmsprop";
    case OptimizerConfig::Kind::adam: return "adam";
  }
  return "unknown";
}

template <typename T>
void Optimizer<T>::step(std::vector<ParamTensor<T>*> params) {
  if (slots_.empty()) {
    slots_.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      slots_[i].m1.assign(params[i]->value.size(), T{});
      if (cfg_.kind != OptimizerConfig::Kind::sgd)
        slots_[i].m2.assign(params[i]->value.size(), T{});
    }
  }
  ++t_;
  for (size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    auto& s = slots_[i];
    switch (cfg_.kind) {
      case OptimizerConfig::Kind::sgd:
        for (size_t j = 0; j < p.value.size(); ++j) {
          s.m1[j] = static_cast<T>(cfg_.momentum) * s.m1[j] + p.grad[j];
          p.value[j] -= static_cast<T>(cfg_.lr) * s.m1[j];
        }
        break;
      case OptimizerConfig::Kind::rmsprop:
        for (size_t j = 0; j < p.value.size(); ++j) {
          s.m2[j] = static_cast<T>(cfg_.rho) * s.m2[j] +
                    static_cast<T>(1.0 - cfg_.rho) * p.grad[j] * p.grad[j];
          p.value[j] -= static_cast<T>(cfg_.lr) * p.grad[j] /
                        (std::sqrt(s.m2[j]) + static_cast<T>(cfg_.eps));
        }
        break;
      case OptimizerConfig::Kind::adam: {
        double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (size_t j = 0; j < p.value.size(); ++j) {
          s.m1[j] = static_cast<T>(cfg_.beta1) * s.m1[j] +
                    static_cast<T>(1.0 - cfg_.beta1) * p.grad[j];
          s.m2[j] = static_cast<T>(cfg_.beta2) * s.m2[j] +
                    static_cast<T>(1.0 - cfg_.beta2) * p.grad[j] * p.grad[j];
          double m_hat = static_cast<double>(s.m1[j]) / bc1;
          double v_hat = static_cast<double>(s.m2[j]) / bc2;
          p.value[j] -= static_cast<T>(cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps));
        }
        break;
      }
    }
  }
}

template class Optimizer<float>;
template class Optimizer<double>;

// ---------------------------------------------------------------------------
// Training

template <typename T>
Tensor<T> make_batch(const Dataset& ds, std::span<const int64_t> indices, bool flatten) {
  const int64_t per = ds.sample_elems();
  const int64_t n = static_cast<int64_t>(indices.size());
  std::vector<int64_t> shape;
  if (flatten) {
    shape = {n, per};
  } else {
    shape = {n, ds.images.dim(1), ds.images.dim(2), ds.images.dim(3)};
  }
  Tensor<T> out(shape);
  for (int64_t i = 0; i < n; ++i) {
    const float* src = ds.images.ptr() + indices[i] * per;
    T* dst = out.ptr() + i * per;
    for (int64_t j = 0; j < per; ++j) dst[j] = static_cast<T>(src[j]);
  }
  return out;
}

template Tensor<float> make_batch<float>(const Dataset&, std::span<const int64_t>, bool);
template Tensor<double> make_batch<double>(const Dataset&, std::span<const int64_t>, bool);

template <typename T>
std::pair<double, double> evaluate(Network<T>& net, const Dataset& ds, int64_t batch_size) {
  const bool flatten = net.input_shape().size() == 1;
  const int64_t n = ds.size();
  double loss_sum = 0.0;
  int64_t correct = 0;
  for (int64_t start = 0; start < n; start += batch_size) {
    int64_t cnt = std::min(batch_size, n - start);
    std::vector<int64_t> idx(cnt);
    for (int64_t i = 0; i < cnt; ++i) idx[i] = start + i;
    Tensor<T> batch = make_batch<T>(ds, idx, flatten);
    Tensor<T> logits = net.forward(batch, Mode::eval);
    std::span<const int> labels(ds.labels.data() + start, static_cast<size_t>(cnt));
    loss_sum += softmax_cross_entropy<T>(logits, labels, nullptr) * static_cast<double>(cnt);
    const int64_t c = logits.dim(1);
    for (int64_t i = 0; i < cnt; ++i) {
      const T* row = logits.ptr() + i * c;
      int64_t arg = 0;
      for (int64_t j = 1; j < c; ++j)
        if (row[j] > row[arg]) arg = j;
      if (static_cast<int>(arg) == ds.labels[start + i]) ++correct;
    }
  }
  return {loss_sum / static_cast<double>(n), static_cast<double>(correct) / static_cast<double>(n)};
}

template std::pair<double, double> evaluate<float>(Network<float>&, const Dataset&, int64_t);
template std::pair<double, double> evaluate<double>(Network<double>&, const Dataset&, int64_t);

template <typename T>
std::pair<RunResult, Network<T>> train_with_net(const NetworkSpec& spec,
                                                const TrainConfig& config,
                                                const Dataset& train_set,
                                                const Dataset& test_set) {
  if (train_set.size() == 0 || test_set.size() == 0)
    throw std::invalid_argument("train: empty dataset");
  if (config.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");

  auto t0 = std::chrono::steady_clock::now();

  std::vector<int64_t> input_shape;
  const bool flatten = spec.layers.front().kind == LayerDesc::Kind::dense;
  if (flatten) {
    input_shape = {train_set.sample_elems()};
  } else {
    input_shape = {train_set.images.dim(1), train_set.images.dim(2), train_set.images.dim(3)};
  }

  Network<T> net = Network<T>::build(spec, input_shape);
  net.seed_dropout(mix_seed(config.seed, 0xd0d0u));
  Optimizer<T> opt(config.optimizer);
  RandomEngine shuffle_rng(mix_seed(config.seed, 0x5f5fu));

  RunResult result;
  result.seed = config.seed;

  std::vector<int64_t> order(static_cast<size_t>(train_set.size()));
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int64_t>(i);

  for (int64_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order.begin(), order.end());
    double loss_sum = 0.0;
    int64_t seen = 0;
    for (int64_t start = 0; start < train_set.size(); start += config.batch_size) {
      int64_t cnt = std::min<int64_t>(config.batch_size, train_set.size() - start);
      std::span<const int64_t> idx(order.data() + start, static_cast<size_t>(cnt));
      Tensor<T> batch = make_batch<T>(train_set, idx, flatten);
      std::vector<int> labels(static_cast<size_t>(cnt));
      for (int64_t i = 0; i < cnt; ++i) labels[i] = train_set.labels[idx[i]];

      Tensor<T> logits = net.forward(batch, Mode::train);
      Tensor<T> dlogits;
      double loss = softmax_cross_entropy<T>(logits, labels, &dlogits);
      if (!std::isfinite(loss)) {
        result.diverged = true;
        break;
      }
      loss_sum += loss * static_cast<double>(cnt);
      seen += cnt;
      net.zero_grad();
      net.backward(dlogits);
      opt.step(net.parameters());
    }
    if (result.diverged) break;

    auto [test_loss, test_acc] = evaluate<T>(net, test_set);
    EpochMetrics em;
    em.train_loss = loss_sum / static_cast<double>(seen);
    em.test_loss = test_loss;
    em.test_acc = test_acc;
    result.per_epoch.push_back(em);
    if (!std::isfinite(test_loss)) {
      result.diverged = true;
      break;
    }
  }

  if (!result.per_epoch.empty()) {
    result.final_test_acc = result.per_epoch.back().test_acc;
    result.final_test_loss = result.per_epoch.back().test_loss;
  } else {
    result.final_test_acc = std::numeric_limits<double>::quiet_NaN();
    result.final_test_loss = std::numeric_limits<double>::quiet_NaN();
  }
  if (result.diverged) {
    result.final_test_acc = std::numeric_limits<double>::quiet_NaN();
    result.final_test_loss = std::numeric_limits<double>::quiet_NaN();
  }
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(result), std::move(net)};
}

template <typename T>
RunResult train(const NetworkSpec& spec, const TrainConfig& config, const Dataset& train_set,
                const Dataset& test_set) {
  return train_with_net<T>(spec, config, train_set, test_set).first;
}

template RunResult train<float>(const NetworkSpec&, const TrainConfig&, const Dataset&,
                                const Dataset&);
template RunResult train<double>(const NetworkSpec&, const TrainConfig&, const Dataset&,
                                 const Dataset&);
template std::pair<RunResult, Network<float>> train_with_net<float>(const NetworkSpec&,
                                                                    const TrainConfig&,
                                                                    const Dataset&,
                                                                    const Dataset&);
template std::pair<RunResult, Network<double>> train_with_net<double>(const NetworkSpec&,
                                                                      const TrainConfig&,
                                                                      const Dataset&,
                                                                      const Dataset&);

StatSummary aggregate_runs(const std::vector<RunResult>& results) {
  if (results.size() < 2)
    throw std::invalid_argument("aggregate_runs: need at least 2 runs for std");
  StatSummary s;
  s.n_runs = results.size();
  for (const RunResult& r : results) {
    s.mean_acc += r.final_test_acc;
    s.mean_loss += r.final_test_loss;
  }
  s.mean_acc /= static_cast<double>(s.n_runs);
  s.mean_loss /= static_cast<double>(s.n_runs);
  bool all_equal = true;
  for (const RunResult& r : results)
    all_equal = all_equal && r.final_test_acc == results.front().final_test_acc;
  if (all_equal) {
    s.std_acc = 0.0;  // exact, no accumulation residue
    return s;
  }
  double ss = 0.0;
  for (const RunResult& r : results) {
    double d = r.final_test_acc - s.mean_acc;
    ss += d * d;
  }
  s.std_acc = std::sqrt(ss / static_cast<double>(s.n_runs - 1));
  return s;
}

// ---------------------------------------------------------------------------
// Builders

NetworkSpec build_mlp(int64_t depth, int64_t width, const ActivationKind& activation,
                      int64_t input_dim, int64_t classes) {
  if (depth < 1) throw SpecError("build_mlp: depth must be >= 1");
  NetworkSpec spec;
  int64_t in = input_dim;
  for (int64_t i = 0; i < depth; ++i) {
    spec.layers.push_back(LayerDesc::Dense(in, width));
    spec.layers.push_back(LayerDesc::BatchNorm(width));
    spec.layers.push_back(LayerDesc::Act(activation));
    spec.layers.push_back(LayerDesc::Dropout(0.25));
    in = width;
  }
  spec.layers.push_back(LayerDesc::Dense(in, classes));
  return spec;
}

NetworkSpec build_cnn6(const ActivationKind& activation, int64_t in_ch, int64_t img,
                       double width_scale, int64_t classes) {
  auto scaled = [&](int64_t base) {
    return std::max<int64_t>(1, static_cast<int64_t>(std::llround(base * width_scale)));
  };
  const int64_t c1 = scaled(32), c2 = scaled(64), c3 = scaled(128), fc = scaled(128);
  NetworkSpec spec;
  auto block = [&](int64_t ic, int64_t oc) {
    spec.layers.push_back(LayerDesc::Conv2D(ic, oc, 3, 1, 1));
    spec.layers.push_back(LayerDesc::Act(activation));
  };
  block(in_ch, c1);
  block(c1, c1);
  spec.layers.push_back(LayerDesc::MaxPool());
  block(c1, c2);
  block(c2, c2);
  spec.layers.push_back(LayerDesc::MaxPool());
  block(c2, c3);
  block(c3, c3);
  spec.layers.push_back(LayerDesc::MaxPool());
  spec.layers.push_back(LayerDesc::Flatten());
  int64_t side = img / 8;  // three 2x2 pools
  spec.layers.push_back(LayerDesc::Dense(side * side * c3, fc));
  spec.layers.push_back(LayerDesc::Act(activation));
  spec.layers.push_back(LayerDesc::Dense(fc, classes));
  return spec;
}

// ---------------------------------------------------------------------------
// Serialization

std::string run_result_to_json(const RunResult& r) {
  nlohmann::json j;
  j["final_test_acc"] = r.final_test_acc;
  j["final_test_loss"] = r.final_test_loss;
  j["wall_seconds"] = r.wall_seconds;
  j["seed"] = r.seed;
  j["diverged"] = r.diverged;
  nlohmann::json epochs = nlohmann::json::array();
  for (const EpochMetrics& e : r.per_epoch)
    epochs.push_back({{"train_loss", e.train_loss},
                      {"test_loss", e.test_loss},
                      {"test_acc", e.test_acc}});
  j["per_epoch"] = epochs;
  return j.dump(2);
}

std::string stat_summary_to_json(const StatSummary& s, const std::string& activation) {
  nlohmann::json j;
  j["activation"] = activation;
  j["n_runs"] = s.n_runs;
  j["mean_acc"] = s.mean_acc;
  j["mean_loss"] = s.mean_loss;
  j["std_acc"] = s.std_acc;
  return j.dump(2);
}

void run_result_to_csv(std::ostream& os, const RunResult& r) {
  os << "epoch,train_loss,test_loss,test_acc\n";
  for (size_t i = 0; i < r.per_epoch.size(); ++i) {
    const EpochMetrics& e = r.per_epoch[i];
    os << i << ',' << e.train_loss << ',' << e.test_loss << ',' << e.test_acc << '\n';
  }
}

// ---------------------------------------------------------------------------
// Checkpoints: MISHNET1 magic, JSON spec header, raw little-endian doubles.

namespace {

nlohmann::json desc_to_json(const LayerDesc& d) {
  using K = LayerDesc::Kind;
  nlohmann::json j;
  switch (d.kind) {
    case K::dense: j["kind"] = "dense"; j["in"] = d.in; j["out"] = d.out; break;
    case K::conv2d:
      j["kind"] = "conv2d";
      j["in_ch"] = d.in_ch;
      j["out_ch"] = d.out_ch;
      j["k"] = d.k;
      j["stride"] = d.stride;
      j["pad"] = d.pad;
      break;
    case K::batchnorm:
      j["kind"] = "batchnorm";
      j["features"] = d.features;
      j["eps"] = d.eps;
      j["momentum"] = d.momentum;
      break;
    case K::dropout: j["kind"] = "dropout"; j["rate"] = d.rate; break;
    case K::maxpool: j["kind"] = "maxpool"; j["k"] = d.pool_k; j["stride"] = d.pool_stride; break;
    case K::flatten: j["kind"] = "flatten"; break;
    case K::activation: j["kind"] = "activation"; j["act"] = activation_name(d.act); break;
  }
  return j;
}

LayerDesc desc_from_json(const nlohmann::json& j) {
  std::string kind = j.at("kind");
  if (kind == "dense") return LayerDesc::Dense(j.at("in"), j.at("out"));
  if (kind == "conv2d")
    return LayerDesc::Conv2D(j.at("in_ch"), j.at("out_ch"), j.at("k"), j.at("stride"),
                             j.at("pad"));
  if (kind == "batchnorm")
    return LayerDesc::BatchNorm(j.at("features"), j.at("eps"), j.at("momentum"));
  if (kind == "dropout") return LayerDesc::Dropout(j.at("rate"));
  if (kind == "maxpool") return LayerDesc::MaxPool(j.at("k"), j.at("stride"));
  if (kind == "flatten") return LayerDesc::Flatten();
  if (kind == "activation") return LayerDesc::Act(parse_activation(j.at("act").get<std::string>()));
  throw FormatError("checkpoint: unknown layer kind " + kind);
}

}  // namespace

template <typename T>
void save_network(const Network<T>& net, const std::string& path) {
  auto& mut = const_cast<Network<T>&>(net);
  nlohmann::json header;
  header["initializer"] = initializer_name(net.spec().initializer);
  header["seed"] = net.spec().seed;
  header["input_shape"] = net.input_shape();
  nlohmann::json layers = nlohmann::json::array();
  for (const LayerDesc& d : net.spec().layers) layers.push_back(desc_to_json(d));
  header["layers"] = layers;

  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for write: " + path);
  std::string hs = header.dump();
  uint64_t hlen = hs.size();
  os.write("MISHNET1", 8);
  os.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  // Parameter tensors in network order, then batchnorm running stats.
  for (ParamTensor<T>* p : mut.parameters()) {
    for (T v : p->value) {
      double d = static_cast<double>(v);
      os.write(reinterpret_cast<const char*>(&d), sizeof(d));
    }
  }
  for (const auto& buf : mut.state_buffers()) {
    for (T v : *buf.second) {
      double d = static_cast<double>(v);
      os.write(reinterpret_cast<const char*>(&d), sizeof(d));
    }
  }
  if (!os) throw IoError("write failed: " + path);
}

template <typename T>
Network<T> load_network(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, "MISHNET1", 8) != 0)
    throw FormatError("checkpoint: bad magic in " + path);
  uint64_t hlen = 0;
  is.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string hs(hlen, '\0');
  is.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!is) throw LengthError("checkpoint: truncated header in " + path);
  nlohmann::json header = nlohmann::json::parse(hs);

  NetworkSpec spec;
  spec.initializer = parse_initializer(header.at("initializer").get<std::string>());
  spec.seed = header.at("seed").get<uint64_t>();
  for (const auto& lj : header.at("layers")) spec.layers.push_back(desc_from_json(lj));
  std::vector<int64_t> input_shape = header.at("input_shape").get<std::vector<int64_t>>();

  Network<T> net = Network<T>::build(spec, input_shape);
  auto read_into = [&](std::vector<T>& vec) {
    for (T& v : vec) {
      double d = 0.0;
      is.read(reinterpret_cast<char*>(&d), sizeof(d));
      v = static_cast<T>(d);
    }
  };
  for (ParamTensor<T>* p : net.parameters()) read_into(p->value);
  for (auto& buf : net.state_buffers()) read_into(*buf.second);
  if (!is) throw LengthError("checkpoint: truncated parameters in " + path);
  return net;
}

template void save_network<float>(const Network<float>&, const std::string&);
template void save_network<double>(const Network<double>&, const std::string&);
template Network<float> load_network<float>(const std::string&);
template Network<double> load_network<double>(const std::string&);

}  // namespace mish
