#pragma once

#include <cstdint>
#include <span>

#include "cgnn/tensor.hpp"

namespace cgnn {

// Raised when a metric is undefined for the given labels.
class MetricError : public Error {
 public:
  using Error::Error;
};

// Rank-based AUC with average ranks for tied scores. Throws MetricError when
// the labels contain a single class.
double Auc(std::span<const std::uint8_t> labels, std::span<const double> scores);

// Mean binary cross-entropy with predictions clamped to [1e-7, 1 - 1e-7].
// Throws ContractError on empty or mismatched input.
double LogLoss(std::span<const std::uint8_t> labels, std::span<const double> predictions);

inline constexpr double kProbabilityClamp = 1e-7;

}  // namespace cgnn
