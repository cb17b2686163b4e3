#include "tropfuzzy/tropical_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tropfuzzy/errors.hpp"

namespace tropfuzzy {

namespace {

constexpr double kSoftplusCutoff = 30.0;

double clamp_unit(double x) { return std::clamp(x, kClampFloor, 1.0); }

void check_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw ContractError(std::string(what) + ": length mismatch (" +
                        std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

// One softplus term of the membership formulas:
//   coef * f(sign * (x - a[anchor]) / (a[hi] - a[lo]))
struct KernelTerm {
  int output;
  double coef;
  double sign;
  int anchor;
  int lo;
  int hi;
};

constexpr KernelTerm kMembershipTerms[] = {
    // low
    {0, +1.0, -1.0, 1, 0, 1},
    {0, -1.0, -1.0, 0, 0, 1},
    // medium (plus a constant -1)
    {1, +1.0, +1.0, 0, 0, 1},
    {1, -1.0, +1.0, 1, 0, 1},
    {1, -1.0, -1.0, 2, 2, 3},
    {1, +1.0, -1.0, 3, 2, 3},
    // high
    {2, +1.0, +1.0, 2, 2, 3},
    {2, -1.0, +1.0, 3, 2, 3},
};

template <bool kWithGrad>
Membership membership_impl(double x, const MembershipKnots& knots,
                           Smoothness eps, MembershipKnotGrad* grad) {
  const auto& a = knots.a;
  std::array<double, 3> out{0.0, -1.0, 0.0};
  if constexpr (kWithGrad) {
    for (auto& row : *grad) row.fill(0.0);
  }
  for (const auto& t : kMembershipTerms) {
    const double den = a[t.hi] - a[t.lo];
    const double u = t.sign * (x - a[t.anchor]) / den;
    out[t.output] += t.coef * softplus_eps(u, eps.value());
    if constexpr (kWithGrad) {
      const double df = t.coef * softplus_eps_grad(u, eps.value());
      auto& g = (*grad)[t.output];
      g[t.anchor] += df * (-t.sign / den);
      g[t.hi] += df * (-u / den);
      g[t.lo] += df * (u / den);
    }
  }
  return {out[0], out[1], out[2]};
}

}  // namespace

Smoothness::Smoothness(double value) : value_(value) {
  if (!(value > 0.0 && value < 1.0)) {
    throw DomainError("smoothness must lie in (0,1), got " +
                      std::to_string(value));
  }
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_eps(double x, double eps) {
  const double z = x / eps;
  if (z > kSoftplusCutoff) return x;
  if (z < -kSoftplusCutoff) return 0.0;
  return eps * std::log1p(std::exp(z));
}

double softplus_eps_grad(double x, double eps) {
  const double z = x / eps;
  if (z > kSoftplusCutoff) return 1.0;
  if (z < -kSoftplusCutoff) return 0.0;
  return logistic(z);
}

double softplus_inv(double y) {
  if (!(y > 0.0)) throw DomainError("softplus_inv requires y > 0");
  if (y > kSoftplusCutoff) return y;
  return y + std::log(-std::expm1(-y));
}

double tnorm_generator(double x, Smoothness eps) {
  if (!(x > 0.0)) throw DomainError("tnorm_generator requires x > 0");
  const double e = eps.value();
  return e / (1.0 - e) * (1.0 - std::pow(x, (e - 1.0) / e));
}

double tnorm_generator_inv(double z, Smoothness eps) {
  const double e = eps.value();
  const double base = 1.0 - (1.0 - e) / e * z;
  if (!(base > 0.0)) {
    throw DomainError("tnorm_generator_inv: base must be positive");
  }
  return std::exp(std::log(base) * e / (e - 1.0));
}

double tnorm_n(std::span<const double> xs, std::span<const double> weights,
               Smoothness eps) {
  check_lengths(xs.size(), weights.size(), "tnorm_n");
  if (xs.empty()) return 1.0;
  std::vector<double> scratch(2 * xs.size());
  return tnorm_n_grad(xs, weights, eps,
                      std::span(scratch).first(xs.size()),
                      std::span(scratch).last(xs.size()));
}

double tnorm_n_grad(std::span<const double> xs,
                    std::span<const double> weights, Smoothness eps,
                    std::span<double> d_inputs, std::span<double> d_weights) {
  const std::size_t n = xs.size();
  check_lengths(n, weights.size(), "tnorm_n");
  check_lengths(n, d_inputs.size(), "tnorm_n d_inputs");
  check_lengths(n, d_weights.size(), "tnorm_n d_weights");
  if (n == 0) return 1.0;

  const double e = eps.value();
  const double alpha = (e - 1.0) / e;  // negative

  // Exponents e_i = w_i * alpha * log(x_i) >= 0, so every summand
  // t_i = exp(e_i) >= 1. With S = sum t_i - n + 1 we have
  // S = t_max + sum_{j != max} (t_j - 1), evaluated in the log domain.
  double e_max = -std::numeric_limits<double>::infinity();
  std::size_t j_max = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = clamp_unit(xs[i]);
    const double ei = weights[i] * alpha * std::log(x);
    d_weights[i] = ei;  // stash exponent
    if (ei > e_max) {
      e_max = ei;
      j_max = i;
    }
  }
  const double scale = std::exp(-e_max);
  double rest = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == j_max) continue;
    const double ei = d_weights[i];
    rest += ei > kSoftplusCutoff ? std::exp(ei - e_max) - scale
                                 : scale * std::expm1(ei);
  }
  const double log_s = e_max + std::log1p(rest);
  const double r = std::exp(log_s / alpha);

  for (std::size_t i = 0; i < n; ++i) {
    const double share = std::exp(d_weights[i] - log_s);  // t_i / S
    const double x = clamp_unit(xs[i]);
    const bool clamped = xs[i] < kClampFloor || xs[i] > 1.0;
    d_inputs[i] = clamped ? 0.0 : r * share * weights[i] / x;
    d_weights[i] = r * share * std::log(x);
  }
  return r;
}

double tconorm_n(std::span<const double> xs, Smoothness eps) {
  std::vector<double> scratch(xs.size());
  return tconorm_n_grad(xs, eps, scratch);
}

double tconorm_n_grad(std::span<const double> xs, Smoothness eps,
                      std::span<double> d_inputs) {
  check_lengths(xs.size(), d_inputs.size(), "tconorm_n d_inputs");
  const double e = eps.value();
  double l_max = -std::numeric_limits<double>::infinity();
  for (double x : xs) {
    if (x < 0.0 || std::isnan(x)) {
      throw DomainError("tconorm_n requires non-negative inputs");
    }
    if (x > 0.0) l_max = std::max(l_max, std::log(x) / e);
  }
  if (!std::isfinite(l_max)) {
    std::fill(d_inputs.begin(), d_inputs.end(), 0.0);
    return 0.0;
  }
  double acc = 0.0;
  for (double x : xs) {
    if (x > 0.0) acc += std::exp(std::log(x) / e - l_max);
  }
  const double log_o = e * (l_max + std::log(acc));
  const double power = 1.0 / e - 1.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    d_inputs[i] =
        xs[i] > 0.0 ? std::exp(power * (std::log(xs[i]) - log_o)) : 0.0;
  }
  return std::exp(log_o);
}

MembershipKnots MembershipKnots::from_values(
    const std::array<double, 4>& values) {
  const auto& a = values;
  if (!(a[0] < a[1] && a[1] <= a[2] && a[2] < a[3])) {
    throw DomainError("membership knots must satisfy a1 < a2 <= a3 < a4");
  }
  return MembershipKnots{values};
}

MembershipKnots MembershipKnots::from_raw(const std::array<double, 4>& raw) {
  MembershipKnots k;
  k.a[0] = raw[0];
  k.a[1] = k.a[0] + kKnotGap + softplus_eps(raw[1], 1.0);
  k.a[2] = k.a[1] + softplus_eps(raw[2], 1.0);
  k.a[3] = k.a[2] + kKnotGap + softplus_eps(raw[3], 1.0);
  return k;
}

std::array<double, 4> MembershipKnots::to_raw(
    const std::array<double, 4>& values) {
  // The softplus image is (0, inf); keep a tiny positive gap to stay
  // invertible.
  constexpr double kMinSoftplus = 1e-9;
  std::array<double, 4> raw{};
  raw[0] = values[0];
  raw[1] = softplus_inv(std::max(values[1] - values[0] - kKnotGap, kMinSoftplus));
  raw[2] = softplus_inv(std::max(values[2] - values[1], kMinSoftplus));
  raw[3] = softplus_inv(std::max(values[3] - values[2] - kKnotGap, kMinSoftplus));
  return raw;
}

std::array<std::array<double, 4>, 4> MembershipKnots::jacobian(
    const std::array<double, 4>& raw) {
  std::array<std::array<double, 4>, 4> jac{};
  const double s1 = softplus_eps_grad(raw[1], 1.0);
  const double s2 = softplus_eps_grad(raw[2], 1.0);
  const double s3 = softplus_eps_grad(raw[3], 1.0);
  for (int j = 0; j < 4; ++j) jac[j][0] = 1.0;
  jac[1][1] = jac[2][1] = jac[3][1] = s1;
  jac[2][2] = jac[3][2] = s2;
  jac[3][3] = s3;
  return jac;
}

Membership encode_membership(double x, const MembershipKnots& knots,
                             Smoothness eps) {
  return membership_impl<false>(x, knots, eps, nullptr);
}

Membership encode_membership_grad(double x, const MembershipKnots& knots,
                                  Smoothness eps, MembershipKnotGrad& grad) {
  return membership_impl<true>(x, knots, eps, &grad);
}

double log_sum_exp(std::span<const double> values) {
  const double m = *std::max_element(values.begin(), values.end());
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - m);
  return m + std::log(acc);
}

std::vector<double> softmax_stable(std::span<const double> scores) {
  if (scores.empty()) throw ContractError("softmax_stable: empty input");
  const double m = *std::max_element(scores.begin(), scores.end());
  std::vector<double> p(scores.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    p[i] = std::exp(scores[i] - m);
    acc += p[i];
  }
  for (double& v : p) v /= acc;
  return p;
}

}  // namespace tropfuzzy
