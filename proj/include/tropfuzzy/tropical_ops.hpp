#pragma once

// Smooth piecewise-linear primitives used by every layer of the network.
//
// Each operator is parametrized by a smoothness value eps in (0,1). As eps
// tends to 0 the operators collapse onto their tropical (min / max / ramp)
// limits; as eps tends to 1 they become the classical product / sum.
// Every operator comes with an analytic partial-derivative routine so that
// the network can run a hand-written backward pass.

#include <array>
#include <span>
#include <vector>

namespace tropfuzzy {

// Lower clamp applied to T-norm inputs before raising them to negative powers.
inline constexpr double kClampFloor = 1e-6;
// Minimum spacing enforced between the outer membership knots.
inline constexpr double kKnotGap = 1e-3;

class Smoothness {
 public:
  // Throws DomainError unless 0 < value < 1.
  explicit Smoothness(double value);

  double value() const { return value_; }

 private:
  double value_;
};

double logistic(double x);

// eps * log(1 + exp(x / eps)), exact linear / zero branches for |x/eps| > 30.
// eps may be any positive value here (the constraint maps use eps = 1).
double softplus_eps(double x, double eps);
// d/dx softplus_eps(x, eps) = logistic(x / eps).
double softplus_eps_grad(double x, double eps);
// Inverse of softplus_eps(., 1) on y > 0.
double softplus_inv(double y);

// g(x) = eps/(1-eps) * (1 - x^((eps-1)/eps)), x > 0.
double tnorm_generator(double x, Smoothness eps);
// g^-1(z) = (1 - (1-eps)/eps * z)^(eps/(eps-1)).
double tnorm_generator_inv(double z, Smoothness eps);

// Weighted n-ary T-norm:
//   (sum_i x_i^(w_i (eps-1)/eps) - n + 1)^(eps/(eps-1))
// Inputs are clamped to [kClampFloor, 1]. Empty input returns 1.
double tnorm_n(std::span<const double> xs, std::span<const double> weights,
               Smoothness eps);

// Same as tnorm_n, additionally writing dT/dx_i and dT/dw_i. The input
// derivative is zero for inputs that were clamped.
double tnorm_n_grad(std::span<const double> xs,
                    std::span<const double> weights, Smoothness eps,
                    std::span<double> d_inputs, std::span<double> d_weights);

// n-ary T-conorm (sum_i x_i^(1/eps))^eps over non-negative inputs.
double tconorm_n(std::span<const double> xs, Smoothness eps);
double tconorm_n_grad(std::span<const double> xs, Smoothness eps,
                      std::span<double> d_inputs);

// Ordered membership knots a1 < a2 <= a3 < a4, derived from four
// unconstrained raw values:
//   a1 = raw1
//   a2 = a1 + kKnotGap + softplus(raw2)
//   a3 = a2 + softplus(raw3)
//   a4 = a3 + kKnotGap + softplus(raw4)
struct MembershipKnots {
  std::array<double, 4> a{};

  // Validates ordering; throws DomainError otherwise.
  static MembershipKnots from_values(const std::array<double, 4>& values);
  static MembershipKnots from_raw(const std::array<double, 4>& raw);
  // Inverse of from_raw. Gaps below the minimum are widened to it first.
  static std::array<double, 4> to_raw(const std::array<double, 4>& values);
  // d a_j / d raw_m, lower triangular.
  static std::array<std::array<double, 4>, 4> jacobian(
      const std::array<double, 4>& raw);
};

struct Membership {
  double low = 0.0;
  double medium = 0.0;
  double high = 0.0;
};

Membership encode_membership(double x, const MembershipKnots& knots,
                             Smoothness eps);

// d(low, medium, high) / d(a1..a4).
using MembershipKnotGrad = std::array<std::array<double, 4>, 3>;
Membership encode_membership_grad(double x, const MembershipKnots& knots,
                                  Smoothness eps, MembershipKnotGrad& grad);

std::vector<double> softmax_stable(std::span<const double> scores);
// log-sum-exp over a non-empty span.
double log_sum_exp(std::span<const double> values);

}  // namespace tropfuzzy
