#include "cgnn/nn.hpp"

#include <cmath>
#include <numbers>

namespace cgnn {

std::uint64_t MixSeed(std::uint64_t base, std::uint64_t tag) {
  // splitmix64 finalizer over the combined words
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double UniformReal(Rng& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

double StandardNormal(Rng& rng) {
  double u1 = UniformReal(rng, 0.0, 1.0);
  while (u1 <= 0.0) u1 = UniformReal(rng, 0.0, 1.0);
  const double u2 = UniformReal(rng, 0.0, 1.0);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Tensor& ParamStore::Add(const std::string& name, Tensor value) {
  auto [it, inserted] = params_.insert_or_assign(name, std::move(value));
  (void)inserted;
  return it->second;
}

Tensor& ParamStore::Get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second;
}

const Tensor& ParamStore::Get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ParamStore::NumScalars() const {
  std::size_t n = 0;
  for (const auto& [_, t] : params_) n += t.size();
  return n;
}

void ParamStore::RoundToFloat() {
  for (auto& [_, t] : params_) {
    for (auto& v : t.values()) v = static_cast<double>(static_cast<float>(v));
  }
}

Tensor XavierUniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t({fan_in, fan_out});
  for (auto& v : t.values()) v = UniformReal(rng, -bound, bound);
  return t;
}

ad::Var ParamBinder::operator()(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  const Tensor& value = store_.Get(name);
  ad::Var v = trainable_ ? tape_.Parameter(value) : tape_.Constant(value);
  bound_.emplace(name, v);
  return v;
}

std::map<std::string, Tensor> ParamBinder::Gradients() const {
  std::map<std::string, Tensor> out;
  for (const auto& [name, v] : bound_) {
    if (tape_.HasGrad(v)) out.emplace(name, tape_.Grad(v));
  }
  return out;
}

void InitGru(ParamStore& store, const std::string& prefix, std::size_t in_dim,
             std::size_t state_dim, Rng& rng) {
  const GruNames n{prefix};
  store.Add(n.w_z(), XavierUniform(in_dim, state_dim, rng));
  store.Add(n.u_z(), XavierUniform(state_dim, state_dim, rng));
  store.Add(n.b_z(), Tensor({state_dim}));
  store.Add(n.w_r(), XavierUniform(in_dim, state_dim, rng));
  store.Add(n.u_r(), XavierUniform(state_dim, state_dim, rng));
  store.Add(n.b_r(), Tensor({state_dim}));
  store.Add(n.w_h(), XavierUniform(in_dim, state_dim, rng));
  store.Add(n.u_h(), XavierUniform(state_dim, state_dim, rng));
  store.Add(n.b_h(), Tensor({state_dim}));
}

ad::Var GruCell(ParamBinder& p, const std::string& prefix, const ad::Var& input,
                const ad::Var& prev) {
  using namespace ad;
  if (input.rows() != prev.rows()) {
    throw ShapeError("gru_cell: input and state batch sizes differ");
  }
  const GruNames n{prefix};
  Var z = Sigmoid(AddBias(Add(MatMul(input, p(n.w_z())), MatMul(prev, p(n.u_z()))), p(n.b_z())));
  Var r = Sigmoid(AddBias(Add(MatMul(input, p(n.w_r())), MatMul(prev, p(n.u_r()))), p(n.b_r())));
  Var cand = Tanh(
      AddBias(Add(MatMul(input, p(n.w_h())), MatMul(Mul(r, prev), p(n.u_h()))), p(n.b_h())));
  Var keep = AddScalar(Neg(z), 1.0);
  return Add(Mul(keep, prev), Mul(z, cand));
}

void InitLstm(ParamStore& store, const std::string& prefix, std::size_t in_dim,
              std::size_t state_dim, Rng& rng) {
  for (const char* gate : {"i", "f", "o", "g"}) {
    store.Add(prefix + ".W" + gate, XavierUniform(in_dim, state_dim, rng));
    store.Add(prefix + ".U" + gate, XavierUniform(state_dim, state_dim, rng));
    store.Add(prefix + ".b" + gate, Tensor({state_dim}));
  }
}

LstmState LstmStep(ParamBinder& p, const std::string& prefix, const ad::Var& input,
                   const LstmState& prev) {
  using namespace ad;
  auto gate = [&](const char* g) {
    const std::string s(g);
    return AddBias(Add(MatMul(input, p(prefix + ".W" + s)), MatMul(prev.h, p(prefix + ".U" + s))),
                   p(prefix + ".b" + s));
  };
  Var i = Sigmoid(gate("i"));
  Var f = Sigmoid(gate("f"));
  Var o = Sigmoid(gate("o"));
  Var g = Tanh(gate("g"));
  Var c = Add(Mul(f, prev.c), Mul(i, g));
  Var h = Mul(o, Tanh(c));
  return {h, c};
}

const Tensor* AdamState::first_moment(const std::string& name) const {
  auto it = m_.find(name);
  return it == m_.end() ? nullptr : &it->second;
}

const Tensor* AdamState::second_moment(const std::string& name) const {
  auto it = v_.find(name);
  return it == v_.end() ? nullptr : &it->second;
}

void AdamState::Step(ParamStore& params, const std::map<std::string, Tensor>& grads) {
  ++step_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (const auto& [name, g] : grads) {
    Tensor& w = params.Get(name);
    if (!w.SameShape(g)) {
      throw ShapeError("adam: gradient for '" + name + "' has shape " + ShapeToString(g.shape()));
    }
    auto [mit, _m] = m_.try_emplace(name, w.shape(), 0.0);
    auto [vit, _v] = v_.try_emplace(name, w.shape(), 0.0);
    auto m = mit->second.data();
    auto v = vit->second.data();
    auto wd = w.data();
    auto gd = g.data();
    for (std::size_t i = 0; i < wd.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * gd[i];
      v[i] = b2 * v[i] + (1.0 - b2) * gd[i] * gd[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      wd[i] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.epsilon);
    }
  }
}

}  // namespace cgnn
