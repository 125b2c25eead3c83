#include "cgnn/predictor.hpp"

#include "cgnn/metrics.hpp"

namespace cgnn {

using namespace ad;

namespace {

std::string FieldPrefix(std::size_t k) { return "pred.field" + std::to_string(k); }

void InitGate(ParamStore& store, const std::string& prefix, std::size_t dim, Rng& rng) {
  store.Add(prefix + ".W", XavierUniform(dim, dim, rng));
  store.Add(prefix + ".b", Tensor({dim}));
}

}  // namespace

void InitPredictor(ParamStore& store, const PredictorShape& shape, Rng& rng) {
  if (shape.dim == 0) throw ConfigError("predictor needs a positive representation dim");
  if (!shape.use_user && !shape.use_ad && !(shape.use_feature && shape.num_fields > 0)) {
    throw ConfigError("predictor needs at least one representation branch");
  }
  if (shape.use_user) InitGate(store, "pred.user", shape.dim, rng);
  if (shape.use_ad) InitGate(store, "pred.ad", shape.dim, rng);
  if (shape.use_feature) {
    for (std::size_t k = 0; k < shape.num_fields; ++k) InitGate(store, FieldPrefix(k), shape.dim, rng);
  }
  store.Add("pred.out.W", XavierUniform(shape.dim, 1, rng));
  store.Add("pred.out.b", Tensor({1}));
}

Var AttentionGate(ParamBinder& p, const std::string& prefix, const Var& representation) {
  return Tanh(AddBias(MatMul(representation, p(prefix + ".W")), p(prefix + ".b")));
}

Gates AttentionGates(ParamBinder& p, const PredictorShape& shape, const Representations& reps) {
  Gates gates;
  if (shape.use_user) gates.user = AttentionGate(p, "pred.user", reps.user);
  if (shape.use_ad) gates.ad = AttentionGate(p, "pred.ad", reps.ad);
  if (shape.use_feature) {
    if (reps.fields.size() != shape.num_fields) throw ShapeError("predictor expects one representation per field");
    for (std::size_t k = 0; k < shape.num_fields; ++k) {
      gates.fields.push_back(AttentionGate(p, FieldPrefix(k), reps.fields[k]));
    }
  }
  return gates;
}

Var GatedSum(const PredictorShape& shape, const Representations& reps, const Gates& gates) {
  std::vector<Var> terms;
  if (shape.use_user) terms.push_back(Mul(gates.user, reps.user));
  if (shape.use_ad) terms.push_back(Mul(gates.ad, reps.ad));
  if (shape.use_feature) {
    for (std::size_t k = 0; k < shape.num_fields; ++k) terms.push_back(Mul(gates.fields[k], reps.fields[k]));
  }
  if (terms.empty()) throw ConfigError("predictor has no enabled representation");
  return AddN(terms);
}

Var PredictLogit(ParamBinder& p, const PredictorShape& shape, const Representations& reps) {
  Var fused = GatedSum(shape, reps, AttentionGates(p, shape, reps));
  return AddBias(MatMul(fused, p("pred.out.W")), p("pred.out.b"));
}

Var FuseAndPredict(ParamBinder& p, const PredictorShape& shape, const Representations& reps) {
  return Sigmoid(PredictLogit(p, shape, reps));
}

Var LogLossVar(const Var& probabilities, std::span<const std::uint8_t> labels) {
  if (labels.empty()) throw ContractError("logloss of an empty batch");
  if (probabilities.value().size() != labels.size()) throw ShapeError("logloss: labels and predictions differ");
  Tape& tape = probabilities.tape();
  Tensor y(probabilities.shape()), not_y(probabilities.shape());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    y[i] = labels[i] ? 1.0 : 0.0;
    not_y[i] = 1.0 - y[i];
  }
  Var clamped = Clamp(probabilities, kProbabilityClamp, 1.0 - kProbabilityClamp);
  Var pos = Mul(tape.Constant(std::move(y)), Log(clamped));
  Var neg = Mul(tape.Constant(std::move(not_y)), Log(AddScalar(Neg(clamped), 1.0)));
  return Neg(Mean(Add(pos, neg)));
}

}  // namespace cgnn
