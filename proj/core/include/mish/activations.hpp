#pragma once

#include <string>
#include <string_view>

namespace mish {

enum class Activation {
  mish,
  swish,
  relu,
  leaky_relu,
  elu,
  selu,
  softplus,
  tanh,
  sigmoid,
  gelu,
  srelu,
  isru,
  rrelu,
  arctan_softplus,
  tanh_softplus,
  xlog_arctan_exp,
  xlog_tanh_exp,
};

inline constexpr int kActivationCount = 17;

// Tag plus the fixed hyperparameters of the parametric families. Use the
// factory functions; they validate the parameter ranges.
struct ActivationKind {
  Activation tag = Activation::mish;
  double beta = 1.0;    // swish gate sharpness, > 0
  double alpha = 1.0;   // leaky_relu / elu / isru scale, > 0
  double t_neg = -1.0;  // srelu lower threshold
  double a_neg = 0.1;   // srelu lower slope
  double t_pos = 1.0;   // srelu upper threshold
  double a_pos = 0.1;   // srelu upper slope
  double lower = 0.125; // rrelu slope interval, 0 < lower <= upper < 1
  double upper = 1.0 / 3.0;

  double rrelu_slope() const { return 0.5 * (lower + upper); }

  static ActivationKind Mish();
  static ActivationKind Swish(double beta = 1.0);
  static ActivationKind ReLU();
  static ActivationKind LeakyReLU(double alpha = 0.01);
  static ActivationKind ELU(double alpha = 1.0);
  static ActivationKind SELU();
  static ActivationKind SoftPlus();
  static ActivationKind TanH();
  static ActivationKind Sigmoid();
  static ActivationKind GELU();
  static ActivationKind SReLUFixed(double t_neg = -1.0, double a_neg = 0.1,
                                   double t_pos = 1.0, double a_pos = 0.1);
  static ActivationKind ISRU(double alpha = 1.0);
  static ActivationKind RReLUFixed(double lower = 0.125, double upper = 1.0 / 3.0);
  static ActivationKind ArctanSoftplus();
  static ActivationKind TanhSoftplus();
  static ActivationKind XLogArctanExp();
  static ActivationKind XLogTanhExp();

  // All kinds at their default parameters, in enum order.
  static const ActivationKind* all_default();
};

std::string activation_name(const ActivationKind& kind);
std::string activation_name(Activation tag);
// Accepts the names produced by activation_name(); throws std::invalid_argument.
ActivationKind parse_activation(std::string_view name);

// ln(1 + e^x) without overflow: x for x >= 20, e^x for x <= -20,
// log1p otherwise.
double softplus_stable(double x);

// 1 / (1 + e^-x) without overflow on either tail.
double sigmoid_stable(double x);

// sech^2(y) via e^{-2|y|}; exact for large |y| where cosh overflows.
double sech2_stable(double y);

// Forward value. NaN propagates for every kind.
double eval(const ActivationKind& kind, double x);

// Closed-form first derivative. Piecewise kinds return the right-derivative
// at their kinks (ReLU'(0) = 1).
double grad(const ActivationKind& kind, double x);

// Analytic second derivative; defined for Mish and Swish only, anything else
// throws std::domain_error.
double grad2(const ActivationKind& kind, double x);

// The factored form of the Mish derivative:
//   f'(x) = delta(x) * swish(x) + f(x)/x
// with delta = sech^2(softplus(x)) and the x -> 0 hole of f(x)/x filled with
// tanh(ln 2) = 3/5.
struct MishDerivativeParts {
  double delta = 0.0;
  double swish_val = 0.0;
  double ratio = 0.0;
  double total = 0.0;
};
MishDerivativeParts mish_grad_decomposed(double x);

// Rational form of the Mish derivative, e^x * omega / delta^2 with
//   omega = 4(x+1) + 4e^{2x} + e^{3x} + e^x(4x+6)
//   delta = 2e^x + e^{2x} + 2.
// Kept as an independent cross-check route against mish_grad_decomposed;
// rewritten over e^{4x} on the positive tail where the raw form overflows.
double mish_grad_rational(double x);

// Central difference (f(x+h) - f(x-h)) / 2h; h <= 0 throws
// std::invalid_argument.
double finite_diff(const ActivationKind& kind, double x, double h);

struct Minimum {
  double x_min = 0.0;
  double f_min = 0.0;
};

// Location and value of the interior minimum on the negative half-line.
// Defined for the bounded-below kinds with a unique dip (Mish, Swish, GELU);
// anything else throws std::domain_error.
Minimum minimum_of(const ActivationKind& kind);

}  // namespace mish
