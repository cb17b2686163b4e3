// tropfuzzy: generate data, train, cross-validate, extract rules, check
// gradients.
//
// exit codes: 0 ok, 1 runtime failure, 2 bad input

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tropfuzzy/cross_validate.hpp"
#include "tropfuzzy/data.hpp"
#include "tropfuzzy/errors.hpp"
#include "tropfuzzy/metrics.hpp"
#include "tropfuzzy/model_io.hpp"
#include "tropfuzzy/rules.hpp"
#include "tropfuzzy/training.hpp"

namespace fs = std::filesystem;
using namespace tropfuzzy;
using Json = nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kDefaultSeed = 20210923;

struct Common {
  std::uint64_t seed = kDefaultSeed;
  std::string out;
  unsigned threads = 1;
};

void add_common(CLI::App* cmd, Common& c, bool out_required = true) {
  cmd->add_option("--seed", c.seed, "random seed")->capture_default_str();
  auto* o = cmd->add_option("--out", c.out, "output directory");
  if (out_required) o->required();
  cmd->add_option("--threads", c.threads, "worker threads")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
}

void need_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) {
    throw InputError(std::string(what) + " '" + path + "' not found");
  }
}

fs::path make_out_dir(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) {
    throw InputError("cannot create output directory '" + out + "'");
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw std::runtime_error("failed writing '" + path.string() + "'");
}

Json metrics_json(const MetricsReport& m) {
  return {{"accuracy", m.accuracy}, {"recall", m.recall},
          {"precision", m.precision}, {"f1", m.f1}, {"auc", m.auc},
          {"positives", m.positives}, {"negatives", m.negatives},
          {"threshold", m.threshold}};
}

Json config_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
          {"lambda1", c.lambda1},             {"lambda2", c.lambda2},
          {"eps_min", c.eps_min},             {"gamma", c.gamma},
          {"max_epochs", c.max_epochs},       {"patience", c.patience},
          {"fixed_eps", c.fixed_eps},         {"rules", c.rules},
          {"seed", c.seed}};
}

// generate -------------------------------------------------------------

struct GenerateArgs {
  Common common;
  std::string kind = "synth1";
  std::size_t n = 400;
  std::string reading = "auto";
};

int run_generate(const GenerateArgs& a) {
  if (a.n == 0) throw InputError("n must be positive");
  GaussianReading reading = calibrate_gaussian_reading().chosen;
  if (a.reading == "std") reading = GaussianReading::kStdDev;
  if (a.reading == "variance") reading = GaussianReading::kVariance;
  const auto out = make_out_dir(a.common.out);
  const auto result = a.kind == "synth1"
                          ? generate_synthetic1(a.n, a.common.seed, reading)
                          : generate_synthetic2(a.n, a.common.seed, reading);
  write_csv(result.data, out / "data.csv");
  write_schema(result.data, out / "schema.json");
  Json m;
  m["kind"] = a.kind;
  m["n"] = a.n;
  m["seed"] = a.common.seed;
  m["gaussian_reading"] = to_string(reading);
  m["prevalence"] = result.data.prevalence();
  if (a.kind == "synth1") {
    Json rates;
    const char* names[] = {"A", "B", "C", "D", "E"};
    for (int i = 0; i < 5; ++i) rates[names[i]] = result.rule_rates[i];
    m["rule_rates"] = rates;
  }
  write_text(out / "manifest.json", m.dump(2) + "\n");
  std::cout << "wrote " << a.n << " rows to " << (out / "data.csv").string()
            << " (prevalence " << result.data.prevalence() << ")\n";
  return 0;
}

// train ------------------------------------------------------------------

struct TrainArgs {
  Common common;
  std::string data, schema, rule_spec;
  TrainConfig cfg;
  std::vector<double> ratios{0.64, 0.16, 0.20};
};

int run_train(TrainArgs a) {
  need_file(a.data, "data file");
  need_file(a.schema, "schema file");
  if (!a.rule_spec.empty()) need_file(a.rule_spec, "rule spec");
  if (a.ratios.size() != 3) throw InputError("--split needs three ratios");
  a.cfg.seed = a.common.seed;
  a.cfg.validate();

  auto loaded = load_csv(a.data, a.schema);
  std::vector<RuleSpec> spec;
  if (!a.rule_spec.empty()) {
    spec = load_rule_spec(a.rule_spec);
    // validate before any work
    for (const auto& r : spec) concept_set(r, loaded.data.schema);
    if (spec.size() > a.cfg.rules) {
      throw InputError("rule spec has more rules than --rules");
    }
  }
  const auto out = make_out_dir(a.common.out);

  const auto parts = split(loaded.data, SplitSpec::ratio(a.ratios[0], a.ratios[1],
                                                         a.ratios[2], a.common.seed));
  const auto& part = parts.front();
  const auto st = standardize(loaded.data, part.train);
  for (const auto& c : st.constant_columns) {
    std::cerr << "warning: column '" << c << "' is constant in the training split\n";
  }
  const auto train_set = subset(st.data, part.train);
  const auto val_set = subset(st.data, part.val);
  const auto test_set = subset(st.data, part.test);

  auto params = initial_params(train_set, a.cfg.rules, a.common.seed);
  if (!spec.empty()) inject_knowledge(params, spec);
  const auto result = train(train_set, val_set, params, a.cfg);

  Model model{result.best, st.data.stats, loaded.data.label_name};
  save_model(model, out / "model.json");
  write_history_csv(result.history, out / "history.csv");
  const auto p = positive_probabilities(test_set, result.best);
  const auto test = evaluate_scores(test_set.labels, p);
  Json m;
  m["rows"] = {{"train", part.train.size()}, {"val", part.val.size()},
               {"test", part.test.size()}};
  m["missing_imputed"] = loaded.missing_continuous;
  m["config"] = config_json(a.cfg);
  m["injected_rules"] = spec.size();
  m["best_epoch"] = result.best_epoch;
  m["epochs_run"] = result.history.size();
  m["val_auc"] = result.best_val_auc;
  m["test"] = metrics_json(test);
  write_text(out / "metrics.json", m.dump(2) + "\n");
  std::cout << "best epoch " << result.best_epoch << ", val auc "
            << result.best_val_auc << ", test accuracy " << test.accuracy
            << ", test auc " << test.auc << "\n";
  return 0;
}

// cv ------------------------------------------------------------------------

struct CvArgs {
  Common common;
  std::string data, schema, rule_spec;
  CrossValidateOptions opts;
};

int run_cv(CvArgs a) {
  need_file(a.data, "data file");
  need_file(a.schema, "schema file");
  if (a.opts.k < 2) throw InputError("k must be at least 2");
  if (a.opts.search.eps_min_override != 0.0 &&
      !(a.opts.search.eps_min_override > 0.0 && a.opts.search.eps_min_override < 0.99)) {
    throw InputError("--eps-min must lie in (0, 0.99)");
  }
  if (a.opts.search.fixed_eps && a.opts.search.eps_min_override == 0.0) {
    std::cerr << "note: --fixed-eps without --eps-min holds each trial at its sampled eps_min\n";
  }
  if (!a.rule_spec.empty()) need_file(a.rule_spec, "rule spec");
  a.opts.seed = a.common.seed;
  a.opts.search.threads = a.common.threads;
  const auto loaded = load_csv(a.data, a.schema);
  if (!a.rule_spec.empty()) {
    a.opts.inject = load_rule_spec(a.rule_spec);
    for (const auto& r : a.opts.inject) concept_set(r, loaded.data.schema);
    if (a.opts.inject.size() > kMinSearchRules) {
      throw InputError("rule spec has more rules than the smallest searched rule count");
    }
  }
  const auto out = make_out_dir(a.common.out);
  const auto result = cross_validate(loaded.data, a.opts);
  write_text(out / "cv_summary.json", cv_summary_json(result, a.opts));
  const auto& s = result.summary;
  std::cout << "accuracy " << s.accuracy.mean << " (" << s.accuracy.std << "), auc "
            << s.auc.mean << " (" << s.auc.std << ")\n";
  return 0;
}

// extract-rules -------------------------------------------------------------

struct ExtractArgs {
  Common common;
  std::string model;
  ExtractOptions opts;
  std::size_t grid = 101;
};

int run_extract(const ExtractArgs& a) {
  need_file(a.model, "model file");
  const auto model = load_model(a.model);
  const auto rules = extract_rules(model.params, a.opts);
  if (a.grid < 2) throw InputError("--grid must be at least 2");
  const auto out = make_out_dir(a.common.out);
  for (const auto& w : rules.warnings) std::cerr << "warning: " << w << "\n";
  const auto report = render_rules(rules, model.params, model.stats);
  write_text(out / "rules.txt", report.text);
  write_text(out / "heatmap.csv", report.heatmap_csv);
  write_text(out / "membership_curves.csv",
             export_membership_curves(model.params, a.grid, model.stats));
  std::cout << report.text;
  return 0;
}

// gradcheck -----------------------------------------------------------------

struct GradcheckArgs {
  Common common;
  std::size_t networks = 20;
  std::vector<double> eps{0.1, 0.3, 0.5, 0.7, 0.9};
  GradCheckOptions opts;
};

int run_gradcheck(const GradcheckArgs& a) {
  for (double e : a.eps) {
    if (!(e > 0.0 && e < 1.0)) throw InputError("--eps values must lie in (0, 1)");
  }
  const auto suite = gradient_check_suite(a.common.seed, a.networks, a.eps, a.opts);
  std::ostringstream report;
  report << "networks " << suite.networks << " x eps values " << suite.eps_values.size()
         << "\nmax relative error " << suite.max_rel_error << "\nfailures "
         << suite.failures << "\n";
  for (std::size_t i = 0; i < suite.reports.size(); ++i) {
    const auto& r = suite.reports[i];
    for (const auto& o : r.offenders) {
      report << "  network " << i / suite.eps_values.size() << " eps "
             << suite.eps_values[i % suite.eps_values.size()] << " " << o.name
             << " analytic " << o.analytic << " numeric " << o.numeric
             << " rel " << o.rel_error << "\n";
    }
  }
  report << (suite.passed() ? "PASS" : "FAIL") << "\n";
  std::cout << report.str();
  if (!a.common.out.empty()) write_text(a.common.out, report.str());
  return suite.passed() ? 0 : 1;
}

void add_train_config(CLI::App* cmd, TrainConfig& c) {
  cmd->add_option("--lr", c.learning_rate, "learning rate")->capture_default_str();
  cmd->add_option("--batch", c.batch_size, "minibatch size")->capture_default_str();
  cmd->add_option("--lambda1", c.lambda1, "l1 weight")->capture_default_str();
  cmd->add_option("--lambda2", c.lambda2, "rule correlation weight")->capture_default_str();
  cmd->add_option("--eps-min", c.eps_min, "eps floor")->capture_default_str();
  cmd->add_option("--gamma", c.gamma, "eps decay per epoch")->capture_default_str();
  cmd->add_option("--max-epochs", c.max_epochs)->capture_default_str();
  cmd->add_option("--patience", c.patience)->capture_default_str();
  cmd->add_option("--rules", c.rules, "rule columns K")->capture_default_str();
  cmd->add_flag("--fixed-eps", c.fixed_eps, "hold eps at eps-min");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fuzzy rule network trainer"};
  app.set_config("--config", "", "read options from a TOML/INI file");
  app.require_subcommand(1);
  app.fallthrough();

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "write a synthetic dataset");
  add_common(g, gen.common);
  g->add_option("--kind", gen.kind)->check(CLI::IsMember({"synth1", "synth2"}))->capture_default_str();
  g->add_option("--n", gen.n, "rows")->capture_default_str();
  g->add_option("--reading", gen.reading, "N(mu, s): s as std or variance")
      ->check(CLI::IsMember({"auto", "std", "variance"}))
      ->capture_default_str();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train one model on a 64/16/20 split");
  add_common(t, tr.common);
  t->add_option("--data", tr.data, "CSV file")->required();
  t->add_option("--schema", tr.schema, "schema JSON")->required();
  t->add_option("--rule-spec", tr.rule_spec, "rules to inject before training");
  t->add_option("--split", tr.ratios, "train val test ratios")->expected(3);
  add_train_config(t, tr.cfg);

  CvArgs cv;
  auto* c = app.add_subcommand("cv", "k-fold cross-validation with random search");
  add_common(c, cv.common);
  c->add_option("--data", cv.data, "CSV file")->required();
  c->add_option("--schema", cv.schema, "schema JSON")->required();
  c->add_option("--k", cv.opts.k, "folds")->capture_default_str();
  c->add_option("--rule-spec", cv.rule_spec, "rules injected into every search trial");
  c->add_option("--trials", cv.opts.trials, "search trials per fold")->capture_default_str();
  c->add_option("--max-epochs", cv.opts.search.max_epochs)->capture_default_str();
  c->add_option("--patience", cv.opts.search.patience)->capture_default_str();
  c->add_option("--eps-min", cv.opts.search.eps_min_override, "fix eps_min for every trial");
  c->add_flag("--fixed-eps", cv.opts.search.fixed_eps, "no eps annealing");
  c->add_flag("--sample-std", cv.opts.sample_std, "sample instead of population std");

  ExtractArgs ex;
  auto* e = app.add_subcommand("extract-rules", "rule report, heatmap and membership curves");
  add_common(e, ex.common);
  e->add_option("--model", ex.model, "model JSON")->required();
  e->add_option("--keep", ex.opts.keep_threshold, "keep concepts above this fraction of max S")
      ->capture_default_str();
  e->add_option("--merge", ex.opts.merge_threshold, "merge rules above this cosine")
      ->capture_default_str();
  e->add_option("--grid", ex.grid, "membership curve points")->capture_default_str();

  GradcheckArgs gc;
  auto* gk = app.add_subcommand("gradcheck", "finite-difference check of the backward pass");
  add_common(gk, gc.common, false);
  gk->add_option("--networks", gc.networks)->capture_default_str();
  gk->add_option("--eps", gc.eps, "eps values")->capture_default_str();
  gk->add_option("--tol", gc.opts.tolerance)->capture_default_str();
  gk->add_flag("--corrupt-inference-sign", gc.opts.corrupt_inference_sign)
      ->group("");  // test-only negative control

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*g) return run_generate(gen);
    if (*t) return run_train(tr);
    if (*c) return run_cv(cv);
    if (*e) return run_extract(ex);
    if (*gk) return run_gradcheck(gc);
  } catch (const InputError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  } catch (const DomainError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "failure: " << err.what() << "\n";
    return 1;
  }
  return 1;
}
