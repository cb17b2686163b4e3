#pragma once

#include <cstddef>
#include <span>

namespace tropfuzzy {

struct MetricsReport {
  double accuracy = 0.0;
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  double auc = 0.0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  double threshold = 0.5;  // on the positive-class probability
};

struct ConfusionMetrics {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double accuracy = 0.0;
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
};

// Positive class is 1. Undefined precision / recall / f1 are reported as 0.
ConfusionMetrics confusion_metrics(std::span<const int> labels,
                                   std::span<const int> predicted);

// Mann-Whitney AUC with average ranks for ties. Throws InputError when only
// one class is present.
double auc(std::span<const int> labels, std::span<const double> scores);

// Full report from labels and positive-class probabilities, predicting
// positive when the probability exceeds the threshold.
MetricsReport evaluate_scores(std::span<const int> labels,
                              std::span<const double> positive_probability,
                              double threshold = 0.5);

}  // namespace tropfuzzy
