#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tropfuzzy/data.hpp"
#include "tropfuzzy/metrics.hpp"
#include "tropfuzzy/rules.hpp"
#include "tropfuzzy/training.hpp"

namespace tropfuzzy {

struct CrossValidateOptions {
  std::size_t k = 10;
  std::size_t trials = 20;
  std::uint64_t seed = 0;
  SearchOptions search;
  // Population std by default.
  bool sample_std = false;
  // Injected into every search trial before training. Needs no more rules
  // than the smallest searched rule count.
  std::vector<RuleSpec> inject;
};

struct FoldResult {
  std::size_t fold = 0;
  MetricsReport test;
  std::size_t train_rows = 0, val_rows = 0, test_rows = 0;
  TrainConfig best_config;
  double val_auc = 0.0;
  NetworkParams params;
  Standardization stats;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

struct CvSummary {
  MeanStd accuracy, recall, precision, f1, auc;
};

struct CrossValidationResult {
  std::vector<FoldResult> folds;
  CvSummary summary;
};

MeanStd mean_std(const std::vector<double>& values, bool sample = false);

// Per fold: stratified k-fold split (inner 80/20 train/val), standardization
// on the train rows, random search on train/val, evaluation of the winner on
// the held-out fold.
CrossValidationResult cross_validate(const Dataset& data,
                                     const CrossValidateOptions& options);

std::string cv_summary_json(const CrossValidationResult& result,
                            const CrossValidateOptions& options);

}  // namespace tropfuzzy
