#include "tropfuzzy/cross_validate.hpp"

#include <cmath>

#include <json.hpp>

#include "tropfuzzy/errors.hpp"
#include "tropfuzzy/rng.hpp"

namespace tropfuzzy {

MeanStd mean_std(const std::vector<double>& values, bool sample) {
  MeanStd out;
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  for (double v : values) out.mean += v;
  out.mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  const double dof = sample ? n - 1.0 : n;
  out.std = dof > 0.0 ? std::sqrt(ss / dof) : 0.0;
  return out;
}

CrossValidationResult cross_validate(const Dataset& data,
                                     const CrossValidateOptions& options) {
  if (options.k < 2) throw InputError("cross_validate: k must be at least 2");
  if (options.trials == 0) throw InputError("cross_validate: need at least one search trial");
  if (options.inject.size() > kMinSearchRules) {
    throw InputError("cross_validate: rule spec has " + std::to_string(options.inject.size()) +
                     " rules but trials may use only " + std::to_string(kMinSearchRules));
  }
  for (const auto& r : options.inject) concept_set(r, data.schema);
  auto search_options = options.search;
  if (!options.inject.empty()) {
    const auto spec = options.inject;
    search_options.prepare = [spec](NetworkParams& p) { inject_knowledge(p, spec); };
  }
  const auto partitions = split(data, SplitSpec::kfold(options.k, options.seed));

  CrossValidationResult result;
  for (std::size_t f = 0; f < partitions.size(); ++f) {
    const auto& part = partitions[f];
    const auto standardized = standardize(data, part.train);
    const auto train_set = subset(standardized.data, part.train);
    const auto val_set = subset(standardized.data, part.val);
    const auto test_set = subset(standardized.data, part.test);
    const std::uint64_t search_seed = make_stream(options.seed, "fold", f)();
    auto search = random_search(train_set, val_set, options.trials, search_seed,
                                search_options);

    FoldResult fold;
    fold.fold = f;
    fold.train_rows = part.train.size();
    fold.val_rows = part.val.size();
    fold.test_rows = part.test.size();
    const auto p = positive_probabilities(test_set, search.best_params);
    fold.test = evaluate_scores(test_set.labels, p);
    fold.best_config = search.best_config;
    fold.val_auc = search.best_val_auc;
    fold.params = std::move(search.best_params);
    fold.stats = standardized.data.stats;
    result.folds.push_back(std::move(fold));
  }

  auto collect = [&](auto member) {
    std::vector<double> v;
    for (const auto& f : result.folds) v.push_back(f.test.*member);
    return mean_std(v, options.sample_std);
  };
  result.summary.accuracy = collect(&MetricsReport::accuracy);
  result.summary.recall = collect(&MetricsReport::recall);
  result.summary.precision = collect(&MetricsReport::precision);
  result.summary.f1 = collect(&MetricsReport::f1);
  result.summary.auc = collect(&MetricsReport::auc);
  return result;
}

std::string cv_summary_json(const CrossValidationResult& result,
                            const CrossValidateOptions& options) {
  using Json = nlohmann::ordered_json;
  Json j;
  j["k"] = options.k;
  j["trials"] = options.trials;
  j["seed"] = options.seed;
  j["fixed_eps"] = options.search.fixed_eps;
  j["injected_rules"] = options.inject.size();
  j["std"] = options.sample_std ? "sample" : "population";
  Json folds = Json::array();
  for (const auto& f : result.folds) {
    Json row;
    row["fold"] = f.fold;
    row["train_rows"] = f.train_rows;
    row["val_rows"] = f.val_rows;
    row["test_rows"] = f.test_rows;
    row["accuracy"] = f.test.accuracy;
    row["recall"] = f.test.recall;
    row["precision"] = f.test.precision;
    row["f1"] = f.test.f1;
    row["auc"] = f.test.auc;
    row["val_auc"] = f.val_auc;
    const auto& c = f.best_config;
    row["config"] = {{"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
                     {"lambda1", c.lambda1},             {"lambda2", c.lambda2},
                     {"eps_min", c.eps_min},             {"rules", c.rules}};
    folds.push_back(row);
  }
  j["folds"] = folds;
  auto ms = [](const MeanStd& m) { return Json{{"mean", m.mean}, {"std", m.std}}; };
  j["summary"] = {{"accuracy", ms(result.summary.accuracy)},
                  {"recall", ms(result.summary.recall)},
                  {"precision", ms(result.summary.precision)},
                  {"f1", ms(result.summary.f1)},
                  {"auc", ms(result.summary.auc)}};
  return j.dump(2) + "\n";
}

}  // namespace tropfuzzy
