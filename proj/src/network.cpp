#include "tropfuzzy/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tropfuzzy/errors.hpp"

namespace tropfuzzy {

double constrain01(double raw) { return 0.5 * (1.0 + std::tanh(raw)); }

double constrain01_grad(double raw) {
  const double t = std::tanh(raw);
  return 0.5 * (1.0 - t * t);
}

double constrain01_inv(double value) {
  if (!(value > 0.0 && value < 1.0)) {
    throw DomainError("constrain01_inv requires a value in (0,1)");
  }
  return std::atanh(2.0 * value - 1.0);
}

double constrain_pos(double raw) { return softplus_eps(raw, 1.0); }
double constrain_pos_grad(double raw) { return softplus_eps_grad(raw, 1.0); }
double constrain_pos_inv(double value) { return softplus_inv(value); }

NetworkParams NetworkParams::zeros(FeatureSchema schema, std::size_t rules,
                                   std::size_t classes) {
  NetworkParams p;
  p.rules = rules;
  p.classes = classes;
  p.knot_raw.assign(schema.continuous_count(),
                    MembershipKnots::to_raw({-1.5, -0.5, 0.5, 1.5}));
  p.attention_raw = Matrix(schema.concept_rows(), rules);
  p.connection_raw = Matrix(schema.size(), rules);
  p.inference_raw = Matrix(rules, classes);
  p.schema = std::move(schema);
  p.validate();
  return p;
}

void NetworkParams::validate() const {
  auto fail = [](const std::string& what) {
    throw ContractError("network parameters: " + what);
  };
  if (rules < 1) fail("need at least one rule");
  if (classes < 2) fail("need at least two classes");
  if (knot_raw.size() != schema.continuous_count()) fail("knot count");
  if (attention_raw.rows() != schema.concept_rows() ||
      attention_raw.cols() != rules) {
    fail("attention matrix must be concept_rows x rules");
  }
  if (connection_raw.rows() != schema.size() || connection_raw.cols() != rules) {
    fail("connection matrix must be variables x rules");
  }
  if (inference_raw.rows() != rules || inference_raw.cols() != classes) {
    fail("inference matrix must be rules x classes");
  }
}

double NetworkParams::inference(std::size_t rule, std::size_t cls) const {
  if (masks_negative() && cls == 0) return 0.0;
  return constrain_pos(inference_raw(rule, cls));
}

bool NetworkParams::operator==(const NetworkParams& other) const {
  return schema == other.schema && rules == other.rules &&
         classes == other.classes && knot_raw == other.knot_raw &&
         attention_raw == other.attention_raw &&
         connection_raw == other.connection_raw &&
         inference_raw == other.inference_raw &&
         negative_bias == other.negative_bias &&
         eps.value() == other.eps.value();
}

NetworkView::NetworkView(const NetworkParams& p) : params(&p) {
  p.validate();
  for (const auto& raw : p.knot_raw) {
    knots.push_back(MembershipKnots::from_raw(raw));
    knot_jacobian.push_back(MembershipKnots::jacobian(raw));
  }
  auto map = [](const Matrix& raw, Matrix& value, Matrix& grad, auto f,
                auto df) {
    value = Matrix(raw.rows(), raw.cols());
    grad = Matrix(raw.rows(), raw.cols());
    for (std::size_t i = 0; i < raw.data().size(); ++i) {
      value.data()[i] = f(raw.data()[i]);
      grad.data()[i] = df(raw.data()[i]);
    }
  };
  map(p.attention_raw, attention, attention_grad, constrain01, constrain01_grad);
  map(p.connection_raw, connection, connection_grad, constrain01,
      constrain01_grad);
  map(p.inference_raw, inference, inference_grad, constrain_pos,
      constrain_pos_grad);
  if (p.masks_negative()) {
    for (std::size_t k = 0; k < p.rules; ++k) {
      inference(k, 0) = 0.0;
      inference_grad(k, 0) = 0.0;
    }
  }
}

NetworkGrad::NetworkGrad(const NetworkParams& p)
    : knot_raw(p.knot_raw.size(), std::array<double, 4>{}),
      attention_raw(p.attention_raw.rows(), p.attention_raw.cols()),
      connection_raw(p.connection_raw.rows(), p.connection_raw.cols()),
      inference_raw(p.inference_raw.rows(), p.inference_raw.cols()) {}

void NetworkGrad::clear() {
  for (auto& k : knot_raw) k.fill(0.0);
  attention_raw.fill(0.0);
  connection_raw.fill(0.0);
  inference_raw.fill(0.0);
  negative_bias = 0.0;
}

std::vector<double> encode_sample(std::span<const double> x,
                                  const NetworkView& view) {
  const auto& schema = view.params->schema;
  if (x.size() != schema.size()) {
    throw InputError("sample has " + std::to_string(x.size()) +
                     " values, schema expects " + std::to_string(schema.size()));
  }
  std::vector<double> mem(schema.concept_rows(), 0.0);
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const auto& var = schema[i];
    const std::size_t off = schema.row_offset(i);
    if (var.is_continuous()) {
      const Membership m = encode_membership(
          x[i], view.knots[schema.continuous_slot(i)], view.params->eps);
      mem[off] = m.low;
      mem[off + 1] = m.medium;
      mem[off + 2] = m.high;
    } else {
      const double v = x[i];
      if (!(v >= 0.0) || v != std::floor(v) ||
          v >= static_cast<double>(var.levels.size())) {
        throw InputError("variable '" + var.name + "': unknown level index " +
                         std::to_string(v));
      }
      mem[off + static_cast<std::size_t>(v)] = 1.0;
    }
  }
  return mem;
}

void attended_concepts(std::span<const double> memberships,
                       const NetworkView& view, Matrix& attended,
                       Matrix& attended_unclamped) {
  const auto& p = *view.params;
  const auto& schema = p.schema;
  attended = Matrix(schema.size(), p.rules);
  attended_unclamped = Matrix(schema.size(), p.rules);
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const std::size_t off = schema.row_offset(i);
    const std::size_t n = schema[i].concept_count();
    for (std::size_t k = 0; k < p.rules; ++k) {
      double acc = 0.0;
      for (std::size_t d = 0; d < n; ++d) {
        acc += view.attention(off + d, k) * memberships[off + d];
      }
      attended_unclamped(i, k) = acc;
      attended(i, k) = std::clamp(acc, kClampFloor, 1.0);
    }
  }
}

std::vector<double> rule_strengths(const Matrix& attended,
                                   const NetworkView& view) {
  const auto& p = *view.params;
  const std::size_t h = p.schema.size();
  std::vector<double> r(p.rules);
  std::vector<double> xs(h), ws(h), d_in(h), d_w(h);
  for (std::size_t k = 0; k < p.rules; ++k) {
    for (std::size_t i = 0; i < h; ++i) {
      xs[i] = attended(i, k);
      ws[i] = view.connection(i, k);
    }
    r[k] = tnorm_n_grad(xs, ws, p.eps, d_in, d_w);
  }
  return r;
}

void class_scores(std::span<const double> rule_strength,
                  const NetworkView& view, std::vector<double>& scores,
                  std::vector<double>& probabilities) {
  const auto& p = *view.params;
  scores.assign(p.classes, 0.0);
  std::vector<double> ys(p.rules), d(p.rules);
  for (std::size_t c = 0; c < p.classes; ++c) {
    if (p.masks_negative() && c == 0) {
      scores[c] = p.negative_bias;
      continue;
    }
    for (std::size_t k = 0; k < p.rules; ++k) {
      ys[k] = view.inference(k, c) * rule_strength[k];
    }
    scores[c] = tconorm_n(ys, p.eps);
  }
  probabilities = softmax_stable(scores);
}

ForwardTrace forward(std::span<const double> x, const NetworkView& view) {
  ForwardTrace t;
  t.memberships = encode_sample(x, view);
  attended_concepts(t.memberships, view, t.attended, t.attended_unclamped);
  t.rule_strength = rule_strengths(t.attended, view);
  class_scores(t.rule_strength, view, t.class_score, t.probability);
  return t;
}

ForwardTrace forward(std::span<const double> x, const NetworkParams& params) {
  return forward(x, NetworkView(params));
}

std::size_t argmax_class(std::span<const double> probabilities) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < probabilities.size(); ++c) {
    if (probabilities[c] > probabilities[best]) best = c;
  }
  return best;
}

std::size_t predict(std::span<const double> x, const NetworkParams& params) {
  return argmax_class(forward(x, params).probability);
}

void backward(std::span<const double> x, const ForwardTrace& trace,
              const NetworkView& view, std::span<const double> d_scores,
              NetworkGrad& grad) {
  const auto& p = *view.params;
  const auto& schema = p.schema;
  const std::size_t h = schema.size();

  // Inference layer.
  std::vector<double> d_rule(p.rules, 0.0);
  std::vector<double> ys(p.rules), dq(p.rules);
  for (std::size_t c = 0; c < p.classes; ++c) {
    const double g = d_scores[c];
    if (p.masks_negative() && c == 0) {
      grad.negative_bias += g;
      continue;
    }
    if (g == 0.0) continue;
    for (std::size_t k = 0; k < p.rules; ++k) {
      ys[k] = view.inference(k, c) * trace.rule_strength[k];
    }
    tconorm_n_grad(ys, p.eps, dq);
    for (std::size_t k = 0; k < p.rules; ++k) {
      grad.inference_raw(k, c) +=
          g * dq[k] * trace.rule_strength[k] * view.inference_grad(k, c);
      d_rule[k] += g * dq[k] * view.inference(k, c);
    }
  }

  // Rule layer.
  Matrix d_attended(h, p.rules);
  std::vector<double> xs(h), ws(h), d_in(h), d_w(h);
  for (std::size_t k = 0; k < p.rules; ++k) {
    if (d_rule[k] == 0.0) continue;
    for (std::size_t i = 0; i < h; ++i) {
      xs[i] = trace.attended(i, k);
      ws[i] = view.connection(i, k);
    }
    tnorm_n_grad(xs, ws, p.eps, d_in, d_w);
    for (std::size_t i = 0; i < h; ++i) {
      grad.connection_raw(i, k) += d_rule[k] * d_w[i] * view.connection_grad(i, k);
      const double u = trace.attended_unclamped(i, k);
      if (u >= kClampFloor && u <= 1.0) d_attended(i, k) = d_rule[k] * d_in[i];
    }
  }

  // Attention layer and membership knots.
  std::vector<double> d_mem(schema.concept_rows(), 0.0);
  for (std::size_t i = 0; i < h; ++i) {
    const std::size_t off = schema.row_offset(i);
    const std::size_t n = schema[i].concept_count();
    for (std::size_t k = 0; k < p.rules; ++k) {
      const double g = d_attended(i, k);
      if (g == 0.0) continue;
      for (std::size_t d = 0; d < n; ++d) {
        grad.attention_raw(off + d, k) +=
            g * trace.memberships[off + d] * view.attention_grad(off + d, k);
        d_mem[off + d] += g * view.attention(off + d, k);
      }
    }
    if (!schema[i].is_continuous()) continue;
    const std::size_t slot = schema.continuous_slot(i);
    MembershipKnotGrad mg;
    encode_membership_grad(x[i], view.knots[slot], p.eps, mg);
    std::array<double, 4> d_knot{};
    for (int c = 0; c < 3; ++c) {
      for (int j = 0; j < 4; ++j) d_knot[j] += d_mem[off + c] * mg[c][j];
    }
    const auto& jac = view.knot_jacobian[slot];
    for (int m = 0; m < 4; ++m) {
      double acc = 0.0;
      for (int j = 0; j < 4; ++j) acc += d_knot[j] * jac[j][m];
      grad.knot_raw[slot][m] += acc;
    }
  }
}

namespace {

// Visits every trainable slot in pack order as (block, i, j).
template <typename Fn>
void for_each_slot(const NetworkParams& p, Fn&& fn) {
  for (std::size_t s = 0; s < p.knot_raw.size(); ++s) {
    for (std::size_t m = 0; m < 4; ++m) fn(0, s, m);
  }
  for (std::size_t r = 0; r < p.attention_raw.rows(); ++r) {
    for (std::size_t k = 0; k < p.rules; ++k) fn(1, r, k);
  }
  for (std::size_t i = 0; i < p.connection_raw.rows(); ++i) {
    for (std::size_t k = 0; k < p.rules; ++k) fn(2, i, k);
  }
  for (std::size_t k = 0; k < p.rules; ++k) {
    for (std::size_t c = p.masks_negative() ? 1 : 0; c < p.classes; ++c) {
      fn(3, k, c);
    }
  }
  if (p.masks_negative()) fn(4, 0, 0);
}

// Works for both NetworkParams and NetworkGrad (const or not).
template <typename T>
auto& slot_ref(T& t, int block, std::size_t i, std::size_t j) {
  switch (block) {
    case 0: return t.knot_raw[i][j];
    case 1: return t.attention_raw.data()[i * t.attention_raw.cols() + j];
    case 2: return t.connection_raw.data()[i * t.connection_raw.cols() + j];
    case 3: return t.inference_raw.data()[i * t.inference_raw.cols() + j];
    default: return t.negative_bias;
  }
}

}  // namespace

std::vector<double> pack_params(const NetworkParams& params) {
  std::vector<double> flat;
  for_each_slot(params, [&](int block, std::size_t i, std::size_t j) {
    flat.push_back(slot_ref(params, block, i, j));
  });
  return flat;
}

void unpack_params(std::span<const double> flat, NetworkParams& p) {
  std::size_t n = 0;
  for_each_slot(p, [&](int, std::size_t, std::size_t) { ++n; });
  if (n != flat.size()) {
    throw ContractError("unpack_params: expected " + std::to_string(n) +
                        " values, got " + std::to_string(flat.size()));
  }
  std::size_t idx = 0;
  for_each_slot(p, [&](int block, std::size_t i, std::size_t j) {
    slot_ref(p, block, i, j) = flat[idx++];
  });
}

std::vector<double> pack_grad(const NetworkGrad& grad,
                              const NetworkParams& params) {
  std::vector<double> flat;
  for_each_slot(params, [&](int block, std::size_t i, std::size_t j) {
    flat.push_back(slot_ref(grad, block, i, j));
  });
  return flat;
}

std::vector<std::string> param_names(const NetworkParams& p) {
  std::vector<std::string> names;
  std::vector<std::size_t> continuous;
  for (std::size_t i = 0; i < p.schema.size(); ++i) {
    if (p.schema[i].is_continuous()) continuous.push_back(i);
  }
  for_each_slot(p, [&](int block, std::size_t i, std::size_t j) {
    const auto si = std::to_string(i);
    const auto sj = std::to_string(j);
    switch (block) {
      case 0:
        names.push_back("knot[" + p.schema[continuous[i]].name + "," + sj + "]");
        break;
      case 1:
        names.push_back("A[" + p.schema.row_label(i) + "," + sj + "]");
        break;
      case 2:
        names.push_back("M[" + p.schema[i].name + "," + sj + "]");
        break;
      case 3: names.push_back("W[" + si + "," + sj + "]"); break;
      default: names.push_back("negative_bias"); break;
    }
  });
  return names;
}

void initialize_random(NetworkParams& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> sparse(-2.5, -1.5);
  std::uniform_real_distribution<double> weight(-1.0, 0.0);
  for (double& v : p.attention_raw.data()) v = sparse(rng);
  for (double& v : p.connection_raw.data()) v = sparse(rng);
  for (double& v : p.inference_raw.data()) v = weight(rng);
  if (p.masks_negative()) {
    for (std::size_t k = 0; k < p.rules; ++k) p.inference_raw(k, 0) = 0.0;
  }
  p.negative_bias = 0.0;
}

namespace {

double quantile(std::vector<double> sorted_values, double q) {
  const double pos = q * static_cast<double>(sorted_values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted_values.size() - 1);
  const double t = pos - static_cast<double>(lo);
  return sorted_values[lo] * (1.0 - t) + sorted_values[hi] * t;
}

}  // namespace

void initialize_knots(NetworkParams& p,
                      std::span<const std::vector<double>> rows) {
  if (rows.empty()) throw InputError("initialize_knots: no training rows");
  for (std::size_t i = 0; i < p.schema.size(); ++i) {
    if (!p.schema[i].is_continuous()) continue;
    std::vector<double> col;
    col.reserve(rows.size());
    for (const auto& r : rows) col.push_back(r[i]);
    std::sort(col.begin(), col.end());
    const std::array<double, 4> values{quantile(col, 0.05), quantile(col, 0.35),
                                       quantile(col, 0.65), quantile(col, 0.95)};
    p.knot_raw[p.schema.continuous_slot(i)] = MembershipKnots::to_raw(values);
  }
}

}  // namespace tropfuzzy
