#include "tropfuzzy/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "tropfuzzy/errors.hpp"

namespace tropfuzzy {

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ConfusionMetrics confusion_metrics(std::span<const int> labels,
                                   std::span<const int> predicted) {
  if (labels.size() != predicted.size()) {
    throw ContractError("confusion_metrics: " + std::to_string(labels.size()) +
                        " labels vs " + std::to_string(predicted.size()) +
                        " predictions");
  }
  ConfusionMetrics m;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool y = labels[i] == 1;
    const bool p = predicted[i] == 1;
    if (y && p) ++m.tp;
    else if (!y && p) ++m.fp;
    else if (y && !p) ++m.fn;
    else ++m.tn;
  }
  m.accuracy = ratio(m.tp + m.tn, labels.size());
  m.precision = ratio(m.tp, m.tp + m.fp);
  m.recall = ratio(m.tp, m.tp + m.fn);
  m.f1 = (m.precision > 0.0 && m.recall > 0.0)
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

double auc(std::span<const int> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) {
    throw ContractError("auc: labels and scores differ in length");
  }
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    // Ranks i+1 .. j share their average.
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] == 1) {
        positive_rank_sum += avg_rank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw InputError("auc: both classes must be present");
  }
  const double np = static_cast<double>(positives);
  return (positive_rank_sum - np * (np + 1.0) / 2.0) /
         (np * static_cast<double>(negatives));
}

MetricsReport evaluate_scores(std::span<const int> labels,
                              std::span<const double> positive_probability,
                              double threshold) {
  std::vector<int> predicted(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    predicted[i] = positive_probability[i] > threshold ? 1 : 0;
  }
  const auto cm = confusion_metrics(labels, predicted);
  MetricsReport r;
  r.accuracy = cm.accuracy;
  r.recall = cm.recall;
  r.precision = cm.precision;
  r.f1 = cm.f1;
  r.auc = auc(labels, positive_probability);
  r.positives = cm.tp + cm.fn;
  r.negatives = cm.tn + cm.fp;
  r.threshold = threshold;
  return r;
}

}  // namespace tropfuzzy
