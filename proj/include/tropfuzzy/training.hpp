#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "tropfuzzy/data.hpp"
#include "tropfuzzy/network.hpp"

namespace tropfuzzy {

inline constexpr double kInitialEps = 0.99;

struct TrainConfig {
  double learning_rate = 0.02;
  std::size_t batch_size = 32;
  double lambda1 = 1e-4;
  double lambda2 = 1e-4;
  double eps_min = 0.2;
  double gamma = 0.99;
  int max_epochs = 1000;
  int patience = 50;
  std::uint64_t seed = 0;
  // Hold eps at eps_min for the whole run instead of annealing from 0.99.
  bool fixed_eps = false;
  std::size_t rules = 10;

  // Throws InputError on out-of-range values.
  void validate() const;
};

struct AdamState {
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
};

struct LossBreakdown {
  double ce = 0.0;
  double l1 = 0.0;
  double corr = 0.0;
  double total = 0.0;
};

// Mean cross-entropy over the rows plus
//   lambda1 * (sum A + sum M)  and  lambda2 * sum_{k<k'} <S_k, S_k'>
// on the constrained views.
LossBreakdown loss_total(const Dataset& batch, const NetworkParams& params,
                         double lambda1, double lambda2);
LossBreakdown loss_total(const Dataset& data, std::span<const std::size_t> rows,
                         const NetworkParams& params, double lambda1,
                         double lambda2);
// Loss and gradient w.r.t. every raw parameter.
LossBreakdown loss_and_grad(const Dataset& data,
                            std::span<const std::size_t> rows,
                            const NetworkParams& params, double lambda1,
                            double lambda2, NetworkGrad& grad);

// max(eps_min, 0.99 * gamma^epoch), or eps_min in fixed mode.
Smoothness epsilon_at(int epoch, const TrainConfig& cfg);

// Adam with beta1 = 0.9, beta2 = 0.999, floor 1e-8 and bias correction.
void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state, double learning_rate);

struct EpochRecord {
  int epoch = 0;
  LossBreakdown loss;  // mean over the epoch's minibatches
  double val_auc = 0.0;
  double val_ce = 0.0;
  double eps = 0.0;
};

struct TrainResult {
  NetworkParams best;
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_val_auc = 0.0;
};

// Mean cross-entropy and AUC of the positive-class probability.
struct Evaluation {
  double auc = 0.0;
  double ce = 0.0;
};
Evaluation evaluate(const Dataset& data, const NetworkParams& params);
std::vector<double> positive_probabilities(const Dataset& data,
                                           const NetworkParams& params);

// Sets the class-0 baseline so that the mean positive score over `data`
// sits at the log prior odds of the positive class.
void calibrate_negative_bias(NetworkParams& params, const Dataset& data);

// Minibatch Adam with per-epoch eps annealing. The negative bias is first
// reset with calibrate_negative_bias on the training set. Keeps the epoch with the
// highest validation AUC (ties go to the lower validation cross-entropy)
// and stops after `patience` epochs without improvement.
TrainResult train(const Dataset& train_set, const Dataset& val_set,
                  NetworkParams params, const TrainConfig& cfg);

void write_history_csv(const std::vector<EpochRecord>& history,
                       const std::filesystem::path& path);

// Random initial parameters for a dataset: knots from quantiles of the
// (standardized) rows, A/M/W from the "init" stream of `seed`.
NetworkParams initial_params(const Dataset& train_set, std::size_t rules,
                             std::uint64_t seed);

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  double lambda1 = 1e-3;
  double lambda2 = 1e-3;
  // Rows whose attended values sit within this distance of a clamp
  // boundary are dropped (the clamp is not differentiable there).
  double kink_margin = 1e-3;
  // Negative control: flip the sign of the analytic dL/dW.
  bool corrupt_inference_sign = false;
};

struct GradCheckEntry {
  std::string name;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t rows_used = 0;
  std::size_t rows_skipped = 0;
  std::vector<GradCheckEntry> offenders;
  bool passed() const { return offenders.empty(); }
};

// Central finite differences against the analytic backward pass. The
// relative error is |a - n| / max(|a|, |n|, 1e-6).
GradCheckReport gradient_check(const NetworkParams& params,
                               const Dataset& batch,
                               const GradCheckOptions& options = {});

// Randomized small networks (two continuous variables and one three-level
// categorical one, 2 to 4 rules, random raw parameters and an 8-row batch)
// checked at every eps value.
struct GradCheckSuite {
  std::vector<GradCheckReport> reports;  // network-major, eps-minor
  std::vector<double> eps_values;
  std::size_t networks = 0;
  double max_rel_error = 0.0;
  std::size_t failures = 0;  // reports with offenders or no usable rows
  bool passed() const { return failures == 0; }
};
GradCheckSuite gradient_check_suite(std::uint64_t seed, std::size_t networks,
                                    const std::vector<double>& eps_values,
                                    const GradCheckOptions& options = {});

struct SearchOptions {
  int max_epochs = 1000;
  int patience = 50;
  bool fixed_eps = false;
  // When set, every trial uses this eps_min instead of sampling it.
  double eps_min_override = 0.0;
  unsigned threads = 1;
  // Applied to every trial's random initial parameters (knowledge injection).
  std::function<void(NetworkParams&)> prepare;
};

struct TrialResult {
  TrainConfig config;
  double val_auc = 0.0;
  double val_ce = 0.0;
  int best_epoch = 0;
};

struct SearchResult {
  TrainConfig best_config;
  NetworkParams best_params;
  double best_val_auc = 0.0;
  std::vector<TrialResult> trials;
  std::size_t best_trial = 0;
};

inline constexpr std::size_t kMinSearchRules = 5;

// Samples n_trials configurations:
//   lr ~ log-U[1e-3, 1e-1], batch in {16, 32, 64},
//   lambda1, lambda2 ~ log-U[1e-5, 1e-2], eps_min in {0.1, 0.2, 0.4, 0.8},
//   rules in {5, 10, 20}
// trains each and returns the one with the best validation AUC.
std::vector<TrainConfig> sample_configs(std::size_t n_trials,
                                        std::uint64_t seed,
                                        const SearchOptions& options);
SearchResult random_search(const Dataset& train_set, const Dataset& val_set,
                           std::size_t n_trials, std::uint64_t seed,
                           const SearchOptions& options = {});

}  // namespace tropfuzzy
