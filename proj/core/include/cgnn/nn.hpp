#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "cgnn/autodiff.hpp"
#include "cgnn/tensor.hpp"

namespace cgnn {

using Rng = std::mt19937_64;

// Derives an independent stream seed from a base seed and a tag; used so that
// per-node / per-repetition randomness does not depend on iteration order.
std::uint64_t MixSeed(std::uint64_t base, std::uint64_t tag);

double UniformReal(Rng& rng, double lo, double hi);
double StandardNormal(Rng& rng);

// Named parameters, ordered by name so iteration and serialization are stable.
class ParamStore {
 public:
  Tensor& Add(const std::string& name, Tensor value);
  bool Has(const std::string& name) const { return params_.count(name) != 0; }
  Tensor& Get(const std::string& name);
  const Tensor& Get(const std::string& name) const;

  std::map<std::string, Tensor>& items() { return params_; }
  const std::map<std::string, Tensor>& items() const { return params_; }
  std::size_t size() const { return params_.size(); }
  std::size_t NumScalars() const;

  // Rounds every parameter to the nearest float; parameters are kept
  // float-representable so checkpoints (float32 payloads) round-trip exactly.
  void RoundToFloat();

 private:
  std::map<std::string, Tensor> params_;
};

// Xavier/Glorot uniform for [fan_in, fan_out] matrices.
Tensor XavierUniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

// Lazily binds ParamStore entries onto a tape as gradient leaves.
class ParamBinder {
 public:
  ParamBinder(ad::Tape& tape, const ParamStore& store, bool trainable = true)
      : tape_(tape), store_(store), trainable_(trainable) {}

  ad::Var operator()(const std::string& name);
  ad::Tape& tape() { return tape_; }

  // Gradients of every bound parameter after tape.Backward().
  std::map<std::string, Tensor> Gradients() const;

 private:
  ad::Tape& tape_;
  const ParamStore& store_;
  bool trainable_;
  std::map<std::string, ad::Var> bound_;
};

// GRU weights: inputs are [rows, in_dim], state [rows, state_dim]. Stored as
// [in, out] so that rows multiply on the left.
struct GruNames {
  std::string prefix;
  std::string w_z() const { return prefix + ".Wz"; }
  std::string u_z() const { return prefix + ".Uz"; }
  std::string b_z() const { return prefix + ".bz"; }
  std::string w_r() const { return prefix + ".Wr"; }
  std::string u_r() const { return prefix + ".Ur"; }
  std::string b_r() const { return prefix + ".br"; }
  std::string w_h() const { return prefix + ".Wh"; }
  std::string u_h() const { return prefix + ".Uh"; }
  std::string b_h() const { return prefix + ".bh"; }
};

void InitGru(ParamStore& store, const std::string& prefix, std::size_t in_dim,
             std::size_t state_dim, Rng& rng);

// z = sigmoid(a Wz + h Uz + bz), r = sigmoid(a Wr + h Ur + br),
// c = tanh(a Wh + (r * h) Uh + bh), out = (1 - z) * h + z * c.
ad::Var GruCell(ParamBinder& params, const std::string& prefix, const ad::Var& input,
                const ad::Var& prev);

// LSTM over a fixed-length sequence step (used by the LSTM aggregator).
void InitLstm(ParamStore& store, const std::string& prefix, std::size_t in_dim,
              std::size_t state_dim, Rng& rng);
struct LstmState {
  ad::Var h;
  ad::Var c;
};
LstmState LstmStep(ParamBinder& params, const std::string& prefix, const ad::Var& input,
                   const LstmState& prev);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam with per-parameter moments keyed by name.
class AdamState {
 public:
  explicit AdamState(AdamConfig config = {}) : config_(config) {}

  const AdamConfig& config() const { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }
  std::uint64_t step() const { return step_; }
  const Tensor* first_moment(const std::string& name) const;
  const Tensor* second_moment(const std::string& name) const;

  // Applies one update to every parameter that has an entry in `grads`.
  void Step(ParamStore& params, const std::map<std::string, Tensor>& grads);

 private:
  AdamConfig config_;
  std::uint64_t step_ = 0;
  std::map<std::string, Tensor> m_;
  std::map<std::string, Tensor> v_;
};

}  // namespace cgnn
