#pragma once

// The three-stage classifier: membership encoding, rule layer (attention
// matrix A, connection matrix M, weighted T-norm) and inference layer
// (inference matrix W, T-conorm, softmax).
//
// All trainable values are stored unconstrained ("raw"); the constrained
// views used by the forward pass are
//   A, M in (0,1)  via constrain01
//   W   >= 0       via constrain_pos
// For binary tasks the class-0 column of W is frozen at zero so that rules
// only describe the positive class. The class-0 score is then a single
// trainable baseline instead of a T-conorm.

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tropfuzzy/schema.hpp"
#include "tropfuzzy/tropical_ops.hpp"

namespace tropfuzzy {

double constrain01(double raw);
double constrain01_grad(double raw);
double constrain01_inv(double value);
double constrain_pos(double raw);
double constrain_pos_grad(double raw);
double constrain_pos_inv(double value);

struct NetworkParams {
  FeatureSchema schema;
  std::size_t rules = 0;
  std::size_t classes = 2;
  std::vector<std::array<double, 4>> knot_raw;  // one per continuous variable
  Matrix attention_raw;                          // concept_rows x rules
  Matrix connection_raw;                         // variables x rules
  Matrix inference_raw;                          // rules x classes
  double negative_bias = 0.0;                    // class-0 score when masked
  Smoothness eps{0.99};

  // All-zero raw parameters with unit-spaced knots.
  static NetworkParams zeros(FeatureSchema schema, std::size_t rules,
                             std::size_t classes = 2);

  bool masks_negative() const { return classes == 2; }
  // Throws ContractError on any dimensional inconsistency.
  void validate() const;
  MembershipKnots knots(std::size_t continuous_slot) const {
    return MembershipKnots::from_raw(knot_raw[continuous_slot]);
  }
  double attention(std::size_t row, std::size_t rule) const {
    return constrain01(attention_raw(row, rule));
  }
  double connection(std::size_t variable, std::size_t rule) const {
    return constrain01(connection_raw(variable, rule));
  }
  double inference(std::size_t rule, std::size_t cls) const;

  bool operator==(const NetworkParams& other) const;
};

// Constrained parameters (and their derivatives w.r.t. raw) evaluated once
// so that a batch of forward/backward passes can share them.
struct NetworkView {
  explicit NetworkView(const NetworkParams& params);

  const NetworkParams* params;
  std::vector<MembershipKnots> knots;
  std::vector<std::array<std::array<double, 4>, 4>> knot_jacobian;
  Matrix attention, attention_grad;
  Matrix connection, connection_grad;
  Matrix inference, inference_grad;
};

struct ForwardTrace {
  std::vector<double> memberships;  // concept_rows
  Matrix attended;                  // variables x rules, clamped to [floor, 1]
  Matrix attended_unclamped;
  std::vector<double> rule_strength;  // rules
  std::vector<double> class_score;    // classes
  std::vector<double> probability;    // classes
};

// Gradient with the same layout as the raw parameters.
struct NetworkGrad {
  explicit NetworkGrad(const NetworkParams& params);
  void clear();

  std::vector<std::array<double, 4>> knot_raw;
  Matrix attention_raw;
  Matrix connection_raw;
  Matrix inference_raw;
  double negative_bias = 0.0;
};

// Memberships of one (standardized) sample. Categorical values are level
// indices; anything else raises InputError naming the variable and value.
std::vector<double> encode_sample(std::span<const double> x,
                                  const NetworkView& view);

void attended_concepts(std::span<const double> memberships,
                       const NetworkView& view, Matrix& attended,
                       Matrix& attended_unclamped);
std::vector<double> rule_strengths(const Matrix& attended,
                                   const NetworkView& view);
// Fills class scores and probabilities.
void class_scores(std::span<const double> rule_strength,
                  const NetworkView& view, std::vector<double>& scores,
                  std::vector<double>& probabilities);

ForwardTrace forward(std::span<const double> x, const NetworkView& view);
ForwardTrace forward(std::span<const double> x, const NetworkParams& params);
// argmax of the probabilities, ties towards the lower class index.
std::size_t predict(std::span<const double> x, const NetworkParams& params);
std::size_t argmax_class(std::span<const double> probabilities);

// Adds d(loss)/d(raw) for one sample given d(loss)/d(class scores).
void backward(std::span<const double> x, const ForwardTrace& trace,
              const NetworkView& view, std::span<const double> d_scores,
              NetworkGrad& grad);

// Flat trainable vector: knots, A, M, W (masked column skipped), baseline.
std::vector<double> pack_params(const NetworkParams& params);
void unpack_params(std::span<const double> flat, NetworkParams& params);
std::vector<double> pack_grad(const NetworkGrad& grad,
                              const NetworkParams& params);
std::vector<std::string> param_names(const NetworkParams& params);

// Raw A, M ~ U(-2.5, -1.5), raw W ~ U(-1, 0), baseline 0. Knots untouched.
void initialize_random(NetworkParams& params, std::mt19937_64& rng);
// Knots at the 5/35/65/95% quantiles of each standardized continuous column.
void initialize_knots(NetworkParams& params,
                      std::span<const std::vector<double>> rows);

}  // namespace tropfuzzy
