#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cgnn/autodiff.hpp"
#include "cgnn/nn.hpp"

namespace cgnn {

struct PredictorShape {
  std::size_t dim = 0;
  std::size_t num_fields = 0;
  bool use_user = false;
  bool use_ad = false;
  bool use_feature = true;
};

// pred.user.{W,b}, pred.ad.{W,b}, pred.field<k>.{W,b} ([P, P] and [P]) for
// the enabled branches, and pred.out.{W,b} ([P, 1] and [1]).
void InitPredictor(ParamStore& store, const PredictorShape& shape, Rng& rng);

// Representations of one batch, each [B, P]. Unset members are absent
// branches.
struct Representations {
  ad::Var user;
  ad::Var ad;
  std::vector<ad::Var> fields;
};

// tanh(H W + b) with the named gate parameters.
ad::Var AttentionGate(ParamBinder& p, const std::string& prefix, const ad::Var& representation);

struct Gates {
  ad::Var user;
  ad::Var ad;
  std::vector<ad::Var> fields;
};

Gates AttentionGates(ParamBinder& p, const PredictorShape& shape, const Representations& reps);

// Sum of gate * representation over the enabled branches: [B, P].
ad::Var GatedSum(const PredictorShape& shape, const Representations& reps, const Gates& gates);

// H w + b before the sigmoid: [B, 1].
ad::Var PredictLogit(ParamBinder& p, const PredictorShape& shape, const Representations& reps);

// sigmoid of PredictLogit.
ad::Var FuseAndPredict(ParamBinder& p, const PredictorShape& shape, const Representations& reps);

// Mean binary cross-entropy of [B, 1] probabilities after clamping to
// [1e-7, 1 - 1e-7].
ad::Var LogLossVar(const ad::Var& probabilities, std::span<const std::uint8_t> labels);

}  // namespace cgnn
