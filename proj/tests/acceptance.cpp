// End-to-end acceptance run. One PASS/FAIL line per criterion; exits non-zero
// if any criterion fails. Criterion numbers given on the command line
// restrict the run to those.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "tropfuzzy/cross_validate.hpp"
#include "tropfuzzy/data.hpp"
#include "tropfuzzy/rules.hpp"
#include "tropfuzzy/training.hpp"
#include "tropfuzzy/tropical_ops.hpp"

using namespace tropfuzzy;

namespace {

const std::filesystem::path kFixtures = FIXTURE_DIR;

constexpr std::uint64_t kDataSeed = 1;
constexpr std::uint64_t kCvSeed = 11;

unsigned worker_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;
std::set<int> selected;

void report(int id, const std::string& title, const std::function<Outcome()>& body) {
  if (!selected.empty() && !selected.count(id)) return;
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  char buf[64];
  std::snprintf(buf, sizeof buf, " [%.1fs]", secs);
  std::cout << "criterion " << id << " " << (o.pass ? "PASS" : "FAIL") << ": " << title << " | "
            << o.detail << buf << std::endl;
}

std::string fixed(double v, int digits = 3) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

CrossValidationResult run_cv(const Dataset& data, bool fixed_eps, double eps_min_override,
                             const std::vector<RuleSpec>& inject = {}) {
  CrossValidateOptions o;
  o.inject = inject;
  o.k = 10;
  o.trials = 20;
  o.seed = kCvSeed;
  o.search.fixed_eps = fixed_eps;
  o.search.eps_min_override = eps_min_override;
  o.search.threads = worker_threads();
  return cross_validate(data, o);
}

std::vector<ConceptSet> truth_sets(const std::vector<RuleSpec>& spec, const FeatureSchema& schema) {
  std::vector<ConceptSet> out;
  for (const auto& r : spec) out.push_back(concept_set(r, schema));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  std::cout << "threads: " << worker_threads() << "\n";
  const auto synth1 = generate_synthetic1(400, kDataSeed).data;
  const auto synth1_spec = load_rule_spec(kFixtures / "synth1_rules.json");
  CrossValidationResult cv1;

  report(1, "synthetic-1 10-fold CV accuracy >= 0.92 and AUC >= 0.96", [&] {
    cv1 = run_cv(synth1, false, 0.0);
    const auto& s = cv1.summary;
    return Outcome{s.accuracy.mean >= 0.92 && s.auc.mean >= 0.96,
                   "accuracy " + fixed(s.accuracy.mean) + " (" + fixed(s.accuracy.std) + "), auc " +
                       fixed(s.auc.mean) + " (" + fixed(s.auc.std) + ")"};
  });

  report(2, "scheduled eps beats fixed eps = 0.2 by >= 0.10 accuracy", [&] {
    const auto sched = run_cv(synth1, false, 0.2);
    const auto fix = run_cv(synth1, true, 0.2);
    const double gap = sched.summary.accuracy.mean - fix.summary.accuracy.mean;
    return Outcome{gap >= 0.10, "scheduled " + fixed(sched.summary.accuracy.mean) + ", fixed " +
                                    fixed(fix.summary.accuracy.mean) + ", gap " + fixed(gap)};
  });

  report(3, ">= 7 folds recover >= 3 rules at Jaccard >= 0.6 with no x7/x8", [&] {
    if (cv1.folds.empty()) cv1 = run_cv(synth1, false, 0.0);
    const auto truth = truth_sets(synth1_spec, synth1.schema);
    int good = 0;
    std::ostringstream per_fold;
    for (const auto& f : cv1.folds) {
      const auto rs = extract_rules(f.params);
      std::vector<ConceptSet> got;
      bool noise = false;
      for (const auto& r : rs.rules) {
        got.push_back(concept_set(r, f.params.schema));
        for (const auto& c : r.concepts) {
          const auto& name = f.params.schema[c.variable].name;
          noise |= name == "x7" || name == "x8";
        }
      }
      int recovered = 0;
      for (const auto& m : greedy_match(got, truth)) recovered += m.jaccard >= 0.6;
      const bool ok = recovered >= 3 && !noise;
      good += ok;
      per_fold << " " << recovered << (noise ? "n" : "");
    }
    return Outcome{good >= 7, std::to_string(good) + "/10 folds; recovered per fold (n = noise var):" +
                                  per_fold.str()};
  });

  report(4, "injection at N=50, 10-fold: Rule E AUC and Rule H accuracy >= random init", [&] {
    // same 10-fold search protocol as criterion 1, on one N=50 draw
    const auto d = generate_synthetic1(50, kDataSeed).data;
    const auto none = run_cv(d, false, 0.0).summary;
    const double e_auc = run_cv(d, false, 0.0, load_rule_spec(kFixtures / "rule_e.json")).summary.auc.mean;
    const double h_acc =
        run_cv(d, false, 0.0, load_rule_spec(kFixtures / "rule_h.json")).summary.accuracy.mean;
    const double none_auc = none.auc.mean, none_acc = none.accuracy.mean;
    return Outcome{e_auc >= none_auc && h_acc >= none_acc,
                   "auc none " + fixed(none_auc) + " vs rule E " + fixed(e_auc) + "; accuracy none " +
                       fixed(none_acc) + " vs rule H " + fixed(h_acc)};
  });

  report(5, "synthetic-2 10-fold CV AUC in [0.74, 0.88]", [&] {
    const auto r = run_cv(generate_synthetic2(400, kDataSeed).data, false, 0.0);
    const double a = r.summary.auc.mean;
    return Outcome{a >= 0.74 && a <= 0.88,
                   "auc " + fixed(a) + " (" + fixed(r.summary.auc.std) + "), accuracy " +
                       fixed(r.summary.accuracy.mean)};
  });

  report(6, "analytic vs central-difference gradients, 20 networks x 5 eps", [&] {
    const auto s = gradient_check_suite(kDataSeed, 20, {0.1, 0.3, 0.5, 0.7, 0.9});
    std::size_t checked = 0;
    for (const auto& r : s.reports) checked += r.checked;
    std::ostringstream d;
    d << "max relative error " << s.max_rel_error << " over " << checked << " parameters, "
      << s.failures << " failing networks";
    return Outcome{s.passed() && s.max_rel_error < 1e-4, d.str()};
  });

  report(7, "operator limits on 1000 random pairs", [&] {
    std::mt19937_64 rng(kDataSeed);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    const std::vector<double> w{1.0, 1.0};
    const Smoothness lo(0.001), hi(0.999);
    double worst[4] = {0, 0, 0, 0};
    for (int i = 0; i < 1000; ++i) {
      const std::vector<double> x{u(rng), u(rng)};
      const double a = std::max(x[0], kClampFloor), b = std::max(x[1], kClampFloor);
      worst[0] = std::max(worst[0], std::abs(tnorm_n(x, w, lo) - std::min(a, b)));
      worst[1] = std::max(worst[1], std::abs(tconorm_n(x, lo) - std::max(x[0], x[1])));
      worst[2] = std::max(worst[2], std::abs(tnorm_n(x, w, hi) - a * b));
      worst[3] = std::max(worst[3], std::abs(tconorm_n(x, hi) - (x[0] + x[1])));
    }
    std::ostringstream d;
    d << "max |T-min| " << worst[0] << ", |Q-max| " << worst[1] << ", |T-prod| " << worst[2]
      << ", |Q-sum| " << worst[3];
    return Outcome{*std::max_element(worst, worst + 4) < 1e-2, d.str()};
  });

  report(8, "inject then extract recovers every rule exactly", [&] {
    const FeatureSchema hf({VariableSchema::continuous("Age"), VariableSchema::continuous("EF"),
                            VariableSchema::continuous("pVO2"), VariableSchema::continuous("DISTWLK"),
                            VariableSchema::continuous("SYSBP"), VariableSchema::continuous("MITRGRG"),
                            VariableSchema::continuous("GDMT")});
    const auto hf_spec = load_rule_spec(kFixtures / "hf_rules.json");
    std::string detail;
    bool all = true;
    for (const auto& [name, schema, spec] :
         {std::tuple{"synthetic-1", synth1.schema, synth1_spec}, std::tuple{"clinician", hf, hf_spec}}) {
      auto p = NetworkParams::zeros(schema, spec.size(), 2);
      std::mt19937_64 rng(kDataSeed);
      initialize_random(p, rng);
      inject_knowledge(p, spec);
      const auto rs = extract_rules(p);
      std::vector<ConceptSet> got;
      for (const auto& r : rs.rules) got.push_back(concept_set(r, schema));
      int exact = 0;
      for (const auto& m : greedy_match(got, truth_sets(spec, schema))) exact += m.jaccard == 1.0;
      all &= exact == static_cast<int>(spec.size()) && got.size() == spec.size();
      detail += std::string(detail.empty() ? "" : ", ") + name + " " + std::to_string(exact) + "/" +
                std::to_string(spec.size());
    }
    return Outcome{all, detail};
  });

  report(9, "synthetic-1 prevalence at n=100000 within 0.03 of 0.3425", [&] {
    const auto& cal = calibrate_gaussian_reading();
    const auto g = generate_synthetic1(100000, kDataSeed);
    const double prev = g.data.prevalence();
    std::ostringstream d;
    d << "reading " << to_string(g.reading) << ", prevalence " << fixed(prev, 4)
      << " (std reading " << fixed(cal.prevalence_stddev, 4) << ", variance reading "
      << fixed(cal.prevalence_variance, 4) << "); rule rates";
    for (double r : g.rule_rates) d << " " << fixed(r, 4);
    return Outcome{std::abs(prev - 0.3425) <= 0.03, d.str()};
  });

  std::cout << "criterion 10 NOT REPRODUCIBLE: heart-failure registry results need patient data that "
               "is not available; covered only by the clinician-rule round-trip (8) and the CSV "
               "ingestion fixtures\n";
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
