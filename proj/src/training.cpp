#include "tropfuzzy/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include "tropfuzzy/errors.hpp"
#include "tropfuzzy/metrics.hpp"
#include "tropfuzzy/rng.hpp"

namespace tropfuzzy {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamFloor = 1e-8;
constexpr double kTieTolerance = 1e-12;

struct Regularization {
  double l1 = 0.0;
  double corr = 0.0;
};

// l1 and rule-correlation terms on the constrained A and M. Adds their
// scaled gradients to `grad` when given.
Regularization regularization(const NetworkView& view, double lambda1,
                              double lambda2, NetworkGrad* grad) {
  const auto& p = *view.params;
  const auto& schema = p.schema;
  Regularization reg;
  for (double a : view.attention.data()) reg.l1 += a;
  for (double m : view.connection.data()) reg.l1 += m;

  for (std::size_t row = 0; row < schema.concept_rows(); ++row) {
    const std::size_t v = schema.variable_of_row(row);
    double row_sum = 0.0, row_sq = 0.0;
    for (std::size_t k = 0; k < p.rules; ++k) {
      const double s = view.attention(row, k) * view.connection(v, k);
      row_sum += s;
      row_sq += s * s;
    }
    reg.corr += 0.5 * (row_sum * row_sum - row_sq);
    if (!grad) continue;
    for (std::size_t k = 0; k < p.rules; ++k) {
      const double a = view.attention(row, k);
      const double m = view.connection(v, k);
      const double d_s = lambda2 * (row_sum - a * m);
      grad->attention_raw(row, k) +=
          (lambda1 + d_s * m) * view.attention_grad(row, k);
      grad->connection_raw(v, k) += d_s * a * view.connection_grad(v, k);
    }
  }
  if (grad) {
    for (std::size_t v = 0; v < schema.size(); ++v) {
      for (std::size_t k = 0; k < p.rules; ++k) {
        grad->connection_raw(v, k) += lambda1 * view.connection_grad(v, k);
      }
    }
  }
  return reg;
}

LossBreakdown combine(double ce, const Regularization& reg, double lambda1,
                      double lambda2) {
  return {ce, reg.l1, reg.corr, ce + lambda1 * reg.l1 + lambda2 * reg.corr};
}

double sample_ce(const ForwardTrace& t, int label) {
  return log_sum_exp(t.class_score) -
         t.class_score[static_cast<std::size_t>(label)];
}

std::vector<std::size_t> all_rows(const Dataset& d) {
  std::vector<std::size_t> idx(d.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

bool better(double auc, double ce, double best_auc, double best_ce) {
  if (auc > best_auc + kTieTolerance) return true;
  return auc >= best_auc - kTieTolerance && ce < best_ce;
}

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) {
    throw InputError("train config: " + what);
  };
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (batch_size == 0) fail("batch_size must be positive");
  if (lambda1 < 0.0 || lambda2 < 0.0) fail("lambdas must be non-negative");
  if (!(eps_min > 0.0 && eps_min < 0.99)) fail("eps_min must lie in (0, 0.99)");
  if (!(gamma > 0.0 && gamma <= 1.0)) fail("gamma must lie in (0, 1]");
  if (max_epochs < 1) fail("max_epochs must be at least 1");
  if (patience < 0 || patience > max_epochs) fail("patience must lie in [0, max_epochs]");
  if (rules == 0) fail("rules must be positive");
}

LossBreakdown loss_total(const Dataset& batch, const NetworkParams& params,
                         double lambda1, double lambda2) {
  const auto rows = all_rows(batch);
  return loss_total(batch, rows, params, lambda1, lambda2);
}

LossBreakdown loss_total(const Dataset& data, std::span<const std::size_t> rows,
                         const NetworkParams& params, double lambda1,
                         double lambda2) {
  if (rows.empty()) throw InputError("loss_total: empty batch");
  const NetworkView view(params);
  double ce = 0.0;
  for (std::size_t r : rows) {
    ce += sample_ce(forward(data.rows[r], view), data.labels[r]);
  }
  ce /= static_cast<double>(rows.size());
  return combine(ce, regularization(view, lambda1, lambda2, nullptr), lambda1,
                 lambda2);
}

LossBreakdown loss_and_grad(const Dataset& data,
                            std::span<const std::size_t> rows,
                            const NetworkParams& params, double lambda1,
                            double lambda2, NetworkGrad& grad) {
  if (rows.empty()) throw InputError("loss_and_grad: empty batch");
  grad.clear();
  const NetworkView view(params);
  const double inv_n = 1.0 / static_cast<double>(rows.size());
  std::vector<double> d_scores(params.classes);
  double ce = 0.0;
  for (std::size_t r : rows) {
    const auto trace = forward(data.rows[r], view);
    const int y = data.labels[r];
    ce += sample_ce(trace, y);
    for (std::size_t c = 0; c < params.classes; ++c) {
      d_scores[c] = (trace.probability[c] - (static_cast<int>(c) == y ? 1.0 : 0.0)) * inv_n;
    }
    backward(data.rows[r], trace, view, d_scores, grad);
  }
  return combine(ce * inv_n, regularization(view, lambda1, lambda2, &grad),
                 lambda1, lambda2);
}

Smoothness epsilon_at(int epoch, const TrainConfig& cfg) {
  if (cfg.fixed_eps) return Smoothness(cfg.eps_min);
  const double decayed = kInitialEps * std::pow(cfg.gamma, std::max(epoch, 0));
  return Smoothness(std::max(cfg.eps_min, decayed));
}

void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state, double learning_rate) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw ContractError("adam_step: parameter, gradient and state sizes differ");
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = kAdamBeta1 * state.m[i] + (1.0 - kAdamBeta1) * g;
    state.v[i] = kAdamBeta2 * state.v[i] + (1.0 - kAdamBeta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + kAdamFloor);
  }
}

std::vector<double> positive_probabilities(const Dataset& data,
                                           const NetworkParams& params) {
  const NetworkView view(params);
  std::vector<double> p(data.size());
  for (std::size_t r = 0; r < data.size(); ++r) {
    p[r] = forward(data.rows[r], view).probability.back();
  }
  return p;
}

Evaluation evaluate(const Dataset& data, const NetworkParams& params) {
  const NetworkView view(params);
  std::vector<double> p(data.size());
  double ce = 0.0;
  for (std::size_t r = 0; r < data.size(); ++r) {
    const auto t = forward(data.rows[r], view);
    p[r] = t.probability.back();
    ce += sample_ce(t, data.labels[r]);
  }
  return {auc(data.labels, p), ce / static_cast<double>(data.size())};
}

NetworkParams initial_params(const Dataset& train_set, std::size_t rules,
                             std::uint64_t seed) {
  auto params = NetworkParams::zeros(train_set.schema, rules, 2);
  initialize_knots(params, train_set.rows);
  auto rng = make_stream(seed, "init");
  initialize_random(params, rng);
  return params;
}

void calibrate_negative_bias(NetworkParams& params, const Dataset& data) {
  if (!params.masks_negative()) throw ContractError("negative bias needs a masked class-0 column");
  if (data.size() == 0) throw InputError("calibrate_negative_bias: empty dataset");
  params.negative_bias = 0.0;
  double o1 = 0.0;
  for (const auto& x : data.rows) o1 += forward(x, params).class_score[1];
  o1 /= static_cast<double>(data.size());
  const double prev = std::clamp(data.prevalence(), 0.01, 0.99);
  params.negative_bias = o1 - std::log(prev / (1.0 - prev));
}

TrainResult train(const Dataset& train_set, const Dataset& val_set,
                  NetworkParams params, const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.size() == 0) throw InputError("train: empty training set");
  if (val_set.size() == 0) throw InputError("train: empty validation set");
  params.validate();

  params.eps = epsilon_at(0, cfg);
  if (params.masks_negative()) calibrate_negative_bias(params, train_set);

  auto shuffle_rng = make_stream(cfg.seed, "shuffle");
  std::vector<std::size_t> order = all_rows(train_set);
  std::vector<double> flat = pack_params(params);
  AdamState adam(flat.size());
  NetworkGrad grad(params);

  TrainResult result;
  double best_ce = std::numeric_limits<double>::infinity();
  result.best_val_auc = -1.0;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    params.eps = epsilon_at(epoch, cfg);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    LossBreakdown sum;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> batch(order.data() + start, end - start);
      const auto loss = loss_and_grad(train_set, batch, params, cfg.lambda1,
                                      cfg.lambda2, grad);
      const auto g = pack_grad(grad, params);
      adam_step(flat, g, adam, cfg.learning_rate);
      unpack_params(flat, params);
      sum.ce += loss.ce;
      sum.l1 += loss.l1;
      sum.corr += loss.corr;
      sum.total += loss.total;
      ++batches;
    }
    const double nb = static_cast<double>(batches);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = {sum.ce / nb, sum.l1 / nb, sum.corr / nb, sum.total / nb};
    const auto val = evaluate(val_set, params);
    rec.val_auc = val.auc;
    rec.val_ce = val.ce;
    rec.eps = params.eps.value();
    result.history.push_back(rec);

    if (better(val.auc, val.ce, result.best_val_auc, best_ce)) {
      result.best = params;
      result.best_epoch = epoch;
      result.best_val_auc = val.auc;
      best_ce = val.ce;
    }
    if (epoch - result.best_epoch >= cfg.patience) break;
  }
  return result;
}

void write_history_csv(const std::vector<EpochRecord>& history,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << "epoch,ce,l1,corr,total,val_auc,eps\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << format_double(r.loss.ce) << ','
        << format_double(r.loss.l1) << ',' << format_double(r.loss.corr) << ','
        << format_double(r.loss.total) << ',' << format_double(r.val_auc) << ','
        << format_double(r.eps) << '\n';
  }
}

GradCheckReport gradient_check(const NetworkParams& params,
                               const Dataset& batch,
                               const GradCheckOptions& options) {
  GradCheckReport report;
  const NetworkView view(params);
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const auto t = forward(batch.rows[r], view);
    bool near_kink = false;
    for (double u : t.attended_unclamped.data()) {
      if (std::abs(u - 1.0) < options.kink_margin ||
          std::abs(u - kClampFloor) < options.kink_margin) {
        near_kink = true;
      }
    }
    if (near_kink) ++report.rows_skipped;
    else rows.push_back(r);
  }
  report.rows_used = rows.size();
  if (rows.empty()) return report;

  NetworkGrad grad(params);
  loss_and_grad(batch, rows, params, options.lambda1, options.lambda2, grad);
  auto analytic = pack_grad(grad, params);
  const auto names = param_names(params);
  if (options.corrupt_inference_sign) {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i].starts_with("W[")) analytic[i] = -analytic[i];
    }
  }

  NetworkParams probe = params;
  auto flat = pack_params(params);
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double saved = flat[i];
    flat[i] = saved + options.step;
    unpack_params(flat, probe);
    const double up = loss_total(batch, rows, probe, options.lambda1, options.lambda2).total;
    flat[i] = saved - options.step;
    unpack_params(flat, probe);
    const double down = loss_total(batch, rows, probe, options.lambda1, options.lambda2).total;
    flat[i] = saved;
    const double numeric = (up - down) / (2.0 * options.step);
    const double denom =
        std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
    const double rel = std::abs(analytic[i] - numeric) / denom;
    ++report.checked;
    report.max_rel_error = std::max(report.max_rel_error, rel);
    if (rel >= options.tolerance) {
      report.offenders.push_back({names[i], analytic[i], numeric, rel});
    }
  }
  return report;
}

GradCheckSuite gradient_check_suite(std::uint64_t seed, std::size_t networks,
                                    const std::vector<double>& eps_values,
                                    const GradCheckOptions& options) {
  GradCheckSuite suite;
  suite.eps_values = eps_values;
  suite.networks = networks;
  const FeatureSchema schema({VariableSchema::continuous("u"),
                              VariableSchema::categorical("c", {"a", "b", "c"}),
                              VariableSchema::continuous("v")});
  for (std::size_t n = 0; n < networks; ++n) {
    auto rng = make_stream(seed, "gradcheck", n);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::normal_distribution<double> z(0.0, 1.0);
    const std::size_t rules = 2 + rng() % 3;
    auto params = NetworkParams::zeros(schema, rules, 2);
    for (auto& k : params.knot_raw) {
      k = {-1.0 + 0.5 * u(rng), 0.3 * u(rng), 0.3 * u(rng), 0.3 * u(rng)};
    }
    for (double& a : params.attention_raw.data()) a = 2.0 * u(rng);
    for (double& m : params.connection_raw.data()) m = 2.0 * u(rng);
    for (std::size_t k = 0; k < rules; ++k) params.inference_raw(k, 1) = u(rng);
    params.negative_bias = u(rng);

    Dataset batch;
    batch.schema = schema;
    for (int r = 0; r < 8; ++r) {
      batch.rows.push_back({z(rng), static_cast<double>(rng() % 3), z(rng)});
      batch.labels.push_back(r % 2);
    }
    for (double eps : eps_values) {
      params.eps = Smoothness(eps);
      auto report = gradient_check(params, batch, options);
      suite.max_rel_error = std::max(suite.max_rel_error, report.max_rel_error);
      if (!report.passed() || report.rows_used == 0) ++suite.failures;
      suite.reports.push_back(std::move(report));
    }
  }
  return suite;
}

std::vector<TrainConfig> sample_configs(std::size_t n_trials,
                                        std::uint64_t seed,
                                        const SearchOptions& options) {
  auto rng = make_stream(seed, "search");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto log_uniform = [&](double lo, double hi) {
    return std::exp(std::log(lo) + unit(rng) * (std::log(hi) - std::log(lo)));
  };
  auto pick = [&](auto const& choices) {
    return choices[std::uniform_int_distribution<std::size_t>(
        0, std::size(choices) - 1)(rng)];
  };
  static constexpr std::size_t kBatches[] = {16, 32, 64};
  static constexpr double kEpsMins[] = {0.1, 0.2, 0.4, 0.8};
  static constexpr std::size_t kRules[] = {kMinSearchRules, 10, 20};
  std::vector<TrainConfig> configs;
  for (std::size_t t = 0; t < n_trials; ++t) {
    TrainConfig c;
    c.learning_rate = log_uniform(1e-3, 1e-1);
    c.batch_size = pick(kBatches);
    c.lambda1 = log_uniform(1e-5, 1e-2);
    c.lambda2 = log_uniform(1e-5, 1e-2);
    c.eps_min = pick(kEpsMins);
    c.rules = pick(kRules);
    if (options.eps_min_override > 0.0) c.eps_min = options.eps_min_override;
    c.fixed_eps = options.fixed_eps;
    c.max_epochs = options.max_epochs;
    c.patience = std::min(options.patience, options.max_epochs);
    c.seed = seed * 1000003ULL + t;
    configs.push_back(c);
  }
  return configs;
}

SearchResult random_search(const Dataset& train_set, const Dataset& val_set,
                           std::size_t n_trials, std::uint64_t seed,
                           const SearchOptions& options) {
  if (n_trials == 0) throw InputError("random_search: need at least one trial");
  const auto configs = sample_configs(n_trials, seed, options);
  std::vector<TrainResult> results(n_trials);

  auto run = [&](std::size_t t) {
    const auto& cfg = configs[t];
    auto init = initial_params(train_set, cfg.rules, cfg.seed);
    if (options.prepare) options.prepare(init);
    results[t] = train(train_set, val_set, std::move(init), cfg);
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(options.threads, n_trials));
  if (workers == 1) {
    for (std::size_t t = 0; t < n_trials; ++t) run(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t t = next++; t < n_trials; t = next++) run(t);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  SearchResult out;
  double best_ce = std::numeric_limits<double>::infinity();
  out.best_val_auc = -1.0;
  for (std::size_t t = 0; t < n_trials; ++t) {
    const auto& r = results[t];
    const double ce = r.history[static_cast<std::size_t>(r.best_epoch)].val_ce;
    out.trials.push_back({configs[t], r.best_val_auc, ce, r.best_epoch});
    if (better(r.best_val_auc, ce, out.best_val_auc, best_ce)) {
      out.best_val_auc = r.best_val_auc;
      best_ce = ce;
      out.best_trial = t;
    }
  }
  out.best_config = configs[out.best_trial];
  out.best_params = results[out.best_trial].best;
  return out;
}

}  // namespace tropfuzzy
