#include "cgnn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace cgnn {

double Auc(std::span<const std::uint8_t> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) throw ContractError("auc: labels and scores differ in length");
  const std::size_t n = labels.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    // Ranks i+1..j share their average.
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]]) {
        positive_rank_sum += rank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) throw MetricError("auc is undefined when only one class is present");
  const double p = static_cast<double>(positives), q = static_cast<double>(negatives);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

double LogLoss(std::span<const std::uint8_t> labels, std::span<const double> predictions) {
  if (labels.empty()) throw ContractError("logloss of an empty batch");
  if (labels.size() != predictions.size()) throw ContractError("logloss: labels and predictions differ in length");
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double y = std::clamp(predictions[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
    total += labels[i] ? std::log(y) : std::log(1.0 - y);
  }
  return -total / static_cast<double>(labels.size());
}

}  // namespace cgnn
