#include "mish/activations.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mish {

namespace {

constexpr double kSeluAlpha = 1.6732632423543772848170429916717;
constexpr double kSeluLambda = 1.0507009873554804934193349852946;
constexpr double kInvSqrt2 = 0.70710678118654752440084436210485;
constexpr double kInvSqrt2Pi = 0.39894228040143267793994605993438;
constexpr double kLn2 = 0.69314718055994530941723212145818;

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// 1 / (e^x + e^-x): the stable form of e^x / (1 + e^{2x}).
double half_sech(double x) {
  double e = std::exp(-std::abs(x));
  return e / (1.0 + e * e);
}

}  // namespace

ActivationKind ActivationKind::Mish() { return {Activation::mish}; }

ActivationKind ActivationKind::Swish(double beta) {
  require(beta > 0.0, "swish: beta must be > 0");
  ActivationKind k{Activation::swish};
  k.beta = beta;
  return k;
}

ActivationKind ActivationKind::ReLU() { return {Activation::relu}; }

ActivationKind ActivationKind::LeakyReLU(double alpha) {
  require(alpha > 0.0, "leaky_relu: alpha must be > 0");
  ActivationKind k{Activation::leaky_relu};
  k.alpha = alpha;
  return k;
}

ActivationKind ActivationKind::ELU(double alpha) {
  require(alpha > 0.0, "elu: alpha must be > 0");
  ActivationKind k{Activation::elu};
  k.alpha = alpha;
  return k;
}

ActivationKind ActivationKind::SELU() { return {Activation::selu}; }
ActivationKind ActivationKind::SoftPlus() { return {Activation::softplus}; }
ActivationKind ActivationKind::TanH() { return {Activation::tanh}; }
ActivationKind ActivationKind::Sigmoid() { return {Activation::sigmoid}; }
ActivationKind ActivationKind::GELU() { return {Activation::gelu}; }

ActivationKind ActivationKind::SReLUFixed(double t_neg, double a_neg,
                                          double t_pos, double a_pos) {
  require(t_neg <= t_pos, "srelu: thresholds must be ordered");
  ActivationKind k{Activation::srelu};
  k.t_neg = t_neg;
  k.a_neg = a_neg;
  k.t_pos = t_pos;
  k.a_pos = a_pos;
  return k;
}

ActivationKind ActivationKind::ISRU(double alpha) {
  require(alpha > 0.0, "isru: alpha must be > 0");
  ActivationKind k{Activation::isru};
  k.alpha = alpha;
  return k;
}

ActivationKind ActivationKind::RReLUFixed(double lower, double upper) {
  require(lower > 0.0 && lower <= upper && upper < 1.0,
          "rrelu: need 0 < lower <= upper < 1");
  ActivationKind k{Activation::rrelu};
  k.lower = lower;
  k.upper = upper;
  return k;
}

ActivationKind ActivationKind::ArctanSoftplus() { return {Activation::arctan_softplus}; }
ActivationKind ActivationKind::TanhSoftplus() { return {Activation::tanh_softplus}; }
ActivationKind ActivationKind::XLogArctanExp() { return {Activation::xlog_arctan_exp}; }
ActivationKind ActivationKind::XLogTanhExp() { return {Activation::xlog_tanh_exp}; }

const ActivationKind* ActivationKind::all_default() {
  static const std::array<ActivationKind, kActivationCount> kinds = {
      Mish(),      Swish(),   ReLU(),     LeakyReLU(),      ELU(),
      SELU(),      SoftPlus(), TanH(),    Sigmoid(),        GELU(),
      SReLUFixed(), ISRU(),   RReLUFixed(), ArctanSoftplus(), TanhSoftplus(),
      XLogArctanExp(), XLogTanhExp()};
  return kinds.data();
}

std::string activation_name(Activation tag) {
  switch (tag) {
    case Activation::mish: return "mish";
    case Activation::swish: return "swish";
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::elu: return "elu";
    case Activation::selu: return "selu";
    case Activation::softplus: return "softplus";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    case Activation::gelu: return "gelu";
    case Activation::srelu: return "srelu";
    case Activation::isru: return "isru";
    case Activation::rrelu: return "rrelu";
    case Activation::arctan_softplus: return "arctan_softplus";
    case Activation::tanh_softplus: return "tanh_softplus";
    case Activation::xlog_arctan_exp: return "xlog_arctan_exp";
    case Activation::xlog_tanh_exp: return "xlog_tanh_exp";
  }
  return "unknown";
}

std::string activation_name(const ActivationKind& kind) {
  return activation_name(kind.tag);
}

ActivationKind parse_activation(std::string_view name) {
  for (int i = 0; i < kActivationCount; ++i) {
    const ActivationKind& k = ActivationKind::all_default()[i];
    if (activation_name(k) == name) return k;
  }
  throw std::invalid_argument("unknown activation: " + std::string(name));
}

double softplus_stable(double x) {
  if (std::isnan(x)) return x;
  if (x >= 20.0) return x;
  if (x <= -20.0) return std::exp(x);
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid_stable(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double sech2_stable(double y) {
  double e = std::exp(-2.0 * std::abs(y));
  double d = 1.0 + e;
  return 4.0 * e / (d * d);
}

double eval(const ActivationKind& kind, double x) {
  if (std::isnan(x)) return x;
  switch (kind.tag) {
    case Activation::mish:
      if (x >= 20.0) return x;  // tanh(softplus) saturates to 1
      return x * std::tanh(softplus_stable(x));
    case Activation::swish:
      return x * sigmoid_stable(kind.beta * x);
    case Activation::relu:
      return x > 0.0 ? x : 0.0;
    case Activation::leaky_relu:
      return x > 0.0 ? x : kind.alpha * x;
    case Activation::elu:
      return x > 0.0 ? x : kind.alpha * std::expm1(x);
    case Activation::selu:
      return kSeluLambda * (x > 0.0 ? x : kSeluAlpha * std::expm1(x));
    case Activation::softplus:
      return softplus_stable(x);
    case Activation::tanh:
      return std::tanh(x);
    case Activation::sigmoid:
      return sigmoid_stable(x);
    case Activation::gelu:
      return x * 0.5 * std::erfc(-x * kInvSqrt2);
    case Activation::srelu:
      if (x <= kind.t_neg) return kind.t_neg + kind.a_neg * (x - kind.t_neg);
      if (x >= kind.t_pos) return kind.t_pos + kind.a_pos * (x - kind.t_pos);
      return x;
    case Activation::isru:
      return x / std::sqrt(1.0 + kind.alpha * x * x);
    case Activation::rrelu:
      return x > 0.0 ? x : kind.rrelu_slope() * x;
    case Activation::arctan_softplus:
      return std::atan(x) * softplus_stable(x);
    case Activation::tanh_softplus:
      return std::tanh(x) * softplus_stable(x);
    case Activation::xlog_arctan_exp:
      // atan(e^x) -> pi/2 as e^x overflows; the log stays finite.
      return x * std::log1p(std::atan(std::exp(x)));
    case Activation::xlog_tanh_exp:
      return x * std::log1p(std::tanh(std::exp(x)));
  }
  return std::numeric_limits<double>::quiet_NaN();
}

MishDerivativeParts mish_grad_decomposed(double x) {
  MishDerivativeParts p;
  if (std::isnan(x)) {
    p.delta = p.swish_val = p.ratio = p.total = x;
    return p;
  }
  if (x == 0.0) {
    // sech^2(ln 2) and tanh(ln 2) are exactly 16/25 and 3/5.
    p.delta = 0.64;
    p.swish_val = 0.0;
    p.ratio = 0.6;
    p.total = 0.6;
    return p;
  }
  double s = softplus_stable(x);
  p.delta = sech2_stable(s);
  // The exact value is strictly inside (0, 1); keep the open bound when the
  // nearest double would round up to 1 (softplus(x) below ~1e-8).
  if (p.delta >= 1.0) p.delta = std::nextafter(1.0, 0.0);
  p.swish_val = x * sigmoid_stable(x);
  p.ratio = std::tanh(s);  // f(x)/x == tanh(softplus(x)) for x != 0
  p.total = p.delta * p.swish_val + p.ratio;
  return p;
}

double mish_grad_rational(double x) {
  if (std::isnan(x)) return x;
  if (x <= 20.0) {
    double e1 = std::exp(x);
    double e2 = std::exp(2.0 * x);
    double e3 = std::exp(3.0 * x);
    double omega = 4.0 * (x + 1.0) + 4.0 * e2 + e3 + e1 * (4.0 * x + 6.0);
    double delta = 2.0 * e1 + e2 + 2.0;
    return e1 * omega / (delta * delta);
  }
  // Same ratio with numerator and denominator divided by e^{4x}.
  double m1 = std::exp(-x);
  double m2 = std::exp(-2.0 * x);
  double m3 = std::exp(-3.0 * x);
  double num = 1.0 + 4.0 * m1 + (4.0 * x + 6.0) * m2 + 4.0 * (x + 1.0) * m3;
  double den = 1.0 + 2.0 * m1 + 2.0 * m2;
  return num / (den * den);
}

double grad(const ActivationKind& kind, double x) {
  if (std::isnan(x)) return x;
  switch (kind.tag) {
    case Activation::mish:
      if (x >= 20.0) return 1.0;
      if (x <= -20.0) return std::exp(x) * (1.0 + x);  // leading tail term
      return mish_grad_decomposed(x).total;
    case Activation::swish: {
      double s = sigmoid_stable(kind.beta * x);
      return s + kind.beta * x * s * (1.0 - s);
    }
    case Activation::relu:
      return x >= 0.0 ? 1.0 : 0.0;
    case Activation::leaky_relu:
      return x >= 0.0 ? 1.0 : kind.alpha;
    case Activation::elu:
      return x >= 0.0 ? 1.0 : kind.alpha * std::exp(x);
    case Activation::selu:
      return kSeluLambda * (x >= 0.0 ? 1.0 : kSeluAlpha * std::exp(x));
    case Activation::softplus:
      return sigmoid_stable(x);
    case Activation::tanh:
      return sech2_stable(x);
    case Activation::sigmoid: {
      double s = sigmoid_stable(x);
      return s * (1.0 - s);
    }
    case Activation::gelu:
      return 0.5 * std::erfc(-x * kInvSqrt2) +
             x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
    case Activation::srelu:
      if (x <= kind.t_neg) return kind.a_neg;
      if (x >= kind.t_pos) return kind.a_pos;
      return 1.0;
    case Activation::isru: {
      double u = 1.0 + kind.alpha * x * x;
      return 1.0 / (u * std::sqrt(u));
    }
    case Activation::rrelu:
      return x >= 0.0 ? 1.0 : kind.rrelu_slope();
    case Activation::arctan_softplus:
      return softplus_stable(x) / (1.0 + x * x) +
             std::atan(x) * sigmoid_stable(x);
    case Activation::tanh_softplus:
      return sech2_stable(x) * softplus_stable(x) +
             std::tanh(x) * sigmoid_stable(x);
    case Activation::xlog_arctan_exp: {
      double a = std::atan(std::exp(x));
      return std::log1p(a) + x * half_sech(x) / (1.0 + a);
    }
    case Activation::xlog_tanh_exp: {
      double y = std::exp(x);
      if (y >= 30.0) return kLn2;  // correction term is < 1e-24 past here
      double t = std::tanh(y);
      return std::log1p(t) + x * y * sech2_stable(y) / (1.0 + t);
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double grad2(const ActivationKind& kind, double x) {
  if (std::isnan(x)) return x;
  switch (kind.tag) {
    case Activation::mish: {
      // f'' = sech^2(s) sig(x) (2 + x (1 - sig - 2 t sig)), s = softplus(x).
      double s = softplus_stable(x);
      double t = std::tanh(s);
      double sig = sigmoid_stable(x);
      return sech2_stable(s) * sig * (2.0 + x * (1.0 - sig - 2.0 * t * sig));
    }
    case Activation::swish: {
      double b = kind.beta;
      double s = sigmoid_stable(b * x);
      double s1 = s * (1.0 - s);
      double s2 = s1 * (1.0 - 2.0 * s);
      return 2.0 * b * s1 + x * b * b * s2;
    }
    default:
      throw std::domain_error("grad2: second derivative only defined for mish and swish, got " +
                              activation_name(kind));
  }
}

double finite_diff(const ActivationKind& kind, double x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff: h must be > 0");
  return (eval(kind, x + h) - eval(kind, x - h)) / (2.0 * h);
}

Minimum minimum_of(const ActivationKind& kind) {
  switch (kind.tag) {
    case Activation::mish:
    case Activation::swish:
    case Activation::gelu:
      break;
    default:
      throw std::domain_error("minimum_of: " + activation_name(kind) +
                              " has no unique interior minimum");
  }
  // The derivative is positive near 0- and negative far out; bracket the sign
  // change, then bisect.
  double hi = -1e-3;
  double lo = -0.5;
  while (grad(kind, lo) > 0.0) {
    lo *= 2.0;
    if (lo < -64.0) throw std::domain_error("minimum_of: no sign change found");
  }
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if (grad(kind, mid) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-15) break;
  }
  Minimum m;
  m.x_min = 0.5 * (lo + hi);
  m.f_min = eval(kind, m.x_min);
  return m;
}

}  // namespace mish
