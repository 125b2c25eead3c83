#include "cgnn/causal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <numeric>
#include <unordered_map>

#include "cgnn/graphs.hpp"

namespace cgnn {

using namespace ad;

Tensor StandardizeColumns(const Tensor& x) {
  if (x.rank() != 2) throw ShapeError("standardize expects [n, m]");
  const std::size_t n = x.rows(), m = x.cols();
  if (n < 2) throw ContractError("standardize needs at least two samples");
  Tensor out = x;
  for (std::size_t j = 0; j < m; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x.at(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = x.at(i, j) - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double scale = var > 1e-12 ? 1.0 / std::sqrt(var) : 1.0;
    for (std::size_t i = 0; i < n; ++i) out.at(i, j) = (x.at(i, j) - mean) * scale;
  }
  return out;
}

CausalData CausalDataFromDataset(const EncodedDataset& data, const std::vector<std::size_t>& rows_in,
                                 std::size_t width, std::size_t max_samples) {
  if (width == 0) throw ConfigError("causal field width must be >= 1");
  std::vector<std::size_t> rows = rows_in;
  if (max_samples > 0 && rows.size() > max_samples) rows.resize(max_samples);
  const std::size_t n = rows.size(), s = data.num_fields();
  if (n < 2) throw ContractError("causal fitting needs at least two samples");
  Tensor x({n, s * width});
  if (width == 1) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < s; ++k) x.at(i, k) = static_cast<double>(data.at(rows[i], k));
  } else {
    for (std::size_t k = 0; k < s; ++k) {
      std::unordered_map<std::uint32_t, std::size_t> counts;
      for (auto r : rows) ++counts[data.at(r, k)];
      std::vector<std::pair<std::size_t, std::uint32_t>> ranked;
      for (const auto& [cat, cnt] : counts) ranked.emplace_back(cnt, cat);
      std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
      });
      std::unordered_map<std::uint32_t, std::size_t> slot;
      for (std::size_t j = 0; j < std::min(width, ranked.size()); ++j) slot[ranked[j].second] = j;
      for (std::size_t i = 0; i < n; ++i) {
        const auto it = slot.find(data.at(rows[i], k));
        if (it != slot.end()) x.at(i, k * width + it->second) = 1.0;
      }
    }
  }
  return CausalData{StandardizeColumns(x), s, width};
}

namespace {

constexpr double kResidualInitScale = 0.1;

std::string Name(const char* part) { return std::string("causal.") + part; }

void InitNet(ParamStore& store, const std::string& prefix, const VaeShape& shape, double logvar, Rng& rng) {
  const std::size_t q = shape.width, h = shape.hidden;
  Tensor w1 = XavierUniform(q, h, rng);
  Tensor w2 = XavierUniform(h, q, rng);
  for (auto& v : w1.values()) v *= kResidualInitScale;
  for (auto& v : w2.values()) v *= kResidualInitScale;
  // relu(x) - relu(-x) = x on the first 2q hidden units.
  for (std::size_t i = 0; i < q; ++i) {
    for (std::size_t j = 0; j < 2 * q; ++j) {
      w1.at(i, j) = 0.0;
      w2.at(j, i) = 0.0;
    }
    w1.at(i, i) = 1.0;
    w1.at(i, q + i) = -1.0;
    w2.at(i, i) = 1.0;
    w2.at(q + i, i) = -1.0;
  }
  store.Add(prefix + ".W1", std::move(w1));
  store.Add(prefix + ".b1", Tensor({h}));
  store.Add(prefix + ".W2", std::move(w2));
  store.Add(prefix + ".b2", Tensor({q}));
  store.Add(prefix + ".logvar", Tensor({shape.num_fields * q}, logvar));
}

// Applies the node-shared network to each field's q-vector of x [n, S*q].
Var NodeNet(ParamBinder& p, const std::string& prefix, const VaeShape& shape, const Var& x) {
  const std::size_t n = x.rows();
  Var flat = Reshape(x, {n * shape.num_fields, shape.width});
  Var h = Relu(AddBias(MatMul(flat, p(prefix + ".W1")), p(prefix + ".b1")));
  Var out = AddBias(MatMul(h, p(prefix + ".W2")), p(prefix + ".b2"));
  return Reshape(out, {n, shape.num_fields * shape.width});
}

// Right-multiplies the field axis of x [n, S*q] by an S x S matrix.
Var MixFields(const Var& x, const Var& m, const VaeShape& shape) {
  const std::size_t n = x.rows(), s = shape.num_fields, q = shape.width;
  if (q == 1) return MatMul(x, m);
  Var blocks = SwapInnerAxes(Reshape(x, {n * s, q}), n, s, q);  // [n*q, S]
  Var mixed = MatMul(blocks, m);
  return Reshape(SwapInnerAxes(mixed, n, q, s), {n, s * q});
}

Var BroadcastLogvar(ParamBinder& p, const std::string& name, std::size_t rows, std::size_t cols) {
  Var zeros = p.tape().Constant(Tensor({rows, cols}));
  return AddBias(zeros, p(name));
}

Var IdentityMinus(const Var& w) {
  const std::size_t s = w.rows();
  return Sub(w.tape().Constant(Tensor::Identity(s)), w);
}

}  // namespace

void InitVae(ParamStore& store, const VaeShape& shape, Rng& rng) {
  if (shape.num_fields < 2) throw ConfigError("causal fitting needs at least two fields");
  if (shape.hidden < 2 * shape.width) throw ConfigError("causal hidden width must be at least twice the field width");
  store.Add(Name("W"), Tensor({shape.num_fields, shape.num_fields}));
  InitNet(store, Name("enc"), shape, shape.latent_logvar, rng);
  InitNet(store, Name("dec"), shape, 0.0, rng);
}

void InitIdentityVae(ParamStore& store, const VaeShape& shape) {
  if (shape.width != 1) throw ConfigError("identity VAE requires field width 1");
  store.Add(Name("W"), Tensor({shape.num_fields, shape.num_fields}));
  for (const char* net : {"enc", "dec"}) {
    const std::string prefix = Name(net);
    store.Add(prefix + ".W1", Tensor::Matrix({{1.0, -1.0}}));
    store.Add(prefix + ".b1", Tensor({2}));
    store.Add(prefix + ".W2", Tensor::Matrix({{1.0}, {-1.0}}));
    store.Add(prefix + ".b2", Tensor({1}));
    store.Add(prefix + ".logvar", Tensor({shape.num_fields}));
  }
}

Var MaskedAdjacency(ParamBinder& p, std::size_t num_fields) {
  Tensor off({num_fields, num_fields}, 1.0);
  for (std::size_t i = 0; i < num_fields; ++i) off.at(i, i) = 0.0;
  return Mul(p(Name("W")), p.tape().Constant(std::move(off)));
}

GaussianParams EncodeSem(ParamBinder& p, const VaeShape& shape, const Var& x, const Var& adjacency) {
  Var transformed = NodeNet(p, Name("enc"), shape, x);
  Var mean = MixFields(transformed, IdentityMinus(adjacency), shape);
  return {mean, BroadcastLogvar(p, Name("enc.logvar"), x.rows(), x.cols())};
}

GaussianParams DecodeSem(ParamBinder& p, const VaeShape& shape, const Var& z, const Var& adjacency) {
  Var inv;
  try {
    inv = Inverse(IdentityMinus(adjacency));
  } catch (const NumericError&) {
    throw NumericError("identity minus adjacency is singular (acyclicity penalty " +
                       std::to_string(Acyclicity(adjacency.value(), 1.0 / static_cast<double>(adjacency.rows()))) +
                       ")");
  }
  Var mixed = MixFields(z, inv, shape);
  Var mean = NodeNet(p, Name("dec"), shape, mixed);
  return {mean, BroadcastLogvar(p, Name("dec.logvar"), z.rows(), z.cols())};
}

Var GaussianKl(const GaussianParams& q) {
  const double count = static_cast<double>(q.mean.value().size());
  const Var terms[] = {Sum(Square(q.mean)), Sum(Exp(q.logvar)), Neg(Sum(q.logvar))};
  return AddScalar(Scale(AddN(terms), 0.5), -0.5 * count);
}

Var GaussianLogLikelihood(const Var& x, const GaussianParams& p) {
  const double count = static_cast<double>(x.value().size());
  Var sq = Mul(Square(Sub(x, p.mean)), Exp(Neg(p.logvar)));
  Var total = Add(Sum(p.logvar), Sum(sq));
  return AddScalar(Scale(total, -0.5), -0.5 * count * std::log(2.0 * std::numbers::pi));
}

ElboTerms ElboLoss(ParamBinder& p, const VaeShape& shape, const Var& x, const Var& adjacency,
                   std::uint64_t seed) {
  const std::size_t n = x.rows();
  GaussianParams q = EncodeSem(p, shape, x, adjacency);
  Rng rng(seed);
  Tensor noise(x.shape());
  for (auto& v : noise.values()) v = StandardNormal(rng);
  Var z = Add(q.mean, Mul(Exp(Scale(q.logvar, 0.5)), p.tape().Constant(std::move(noise))));
  GaussianParams px = DecodeSem(p, shape, z, adjacency);
  const double inv_n = 1.0 / static_cast<double>(n);
  Var kl = Scale(GaussianKl(q), inv_n);
  Var ll = Scale(GaussianLogLikelihood(x, px), inv_n);
  return {Sub(kl, ll), kl, ll};
}

double Acyclicity(const Tensor& w, double c) {
  if (w.rank() != 2 || w.rows() != w.cols()) throw ShapeError("acyclicity expects a square matrix");
  const std::size_t s = w.rows();
  Tensor m = Tensor::Identity(s);
  for (std::size_t i = 0; i < w.size(); ++i) m[i] += c * w[i] * w[i];
  Tensor power = m;
  for (std::size_t k = 1; k < s; ++k) power = MatMul(power, m);
  double trace = 0.0;
  for (std::size_t i = 0; i < s; ++i) trace += power.at(i, i);
  return trace - static_cast<double>(s);
}

Var Acyclicity(const Var& w, double c) {
  const std::size_t s = w.rows();
  if (w.cols() != s) throw ShapeError("acyclicity expects a square matrix");
  Var m = Add(w.tape().Constant(Tensor::Identity(s)), Scale(Square(w), c));
  Var power = m;
  for (std::size_t k = 1; k < s; ++k) power = MatMul(power, m);
  return AddScalar(Trace(power), -static_cast<double>(s));
}

Var LagrangianObjective(ParamBinder& p, const VaeShape& shape, const Var& x, const LagrangianState& state,
                        double c, std::uint64_t seed) {
  Var w = MaskedAdjacency(p, shape.num_fields);
  ElboTerms elbo = ElboLoss(p, shape, x, w, seed);
  Var h = Acyclicity(w, c);
  const Var terms[] = {elbo.loss, Scale(Sum(Abs(w)), state.l1), Scale(h, state.alpha),
                       Scale(Square(h), 0.5 * state.rho)};
  return AddN(terms);
}

Tensor ThresholdToDag(const Tensor& weights, double w_tol,
                      std::vector<std::pair<std::size_t, std::size_t>>* removed) {
  Tensor out = weights;
  const std::size_t s = out.rows();
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = 0; j < s; ++j) {
      if (i == j || std::abs(out.at(i, j)) < w_tol) out.at(i, j) = 0.0;
    }
  }
  while (true) {
    const auto cycle = FindCycle(out);
    if (cycle.empty()) break;
    std::size_t best = 0;
    for (std::size_t e = 1; e + 1 < cycle.size(); ++e) {
      if (std::abs(out.at(cycle[e], cycle[e + 1])) < std::abs(out.at(cycle[best], cycle[best + 1]))) best = e;
    }
    out.at(cycle[best], cycle[best + 1]) = 0.0;
    if (removed) removed->emplace_back(cycle[best], cycle[best + 1]);
  }
  return out;
}

DagFit FitDag(const CausalData& data, const CausalConfig& config) {
  const std::size_t n = data.num_samples(), s = data.num_fields;
  if (s < 2) throw ConfigError("causal fitting needs at least two fields");
  if (n < 2) throw ContractError("causal fitting needs at least two samples");
  if (config.inner_steps == 0 || config.max_outer == 0) throw ConfigError("causal budget must be positive");
  const Tensor x = StandardizeColumns(data.values);
  const VaeShape shape{s, data.width, config.hidden, config.latent_logvar};
  const double c = config.acyclic_c > 0.0 ? config.acyclic_c : 1.0 / static_cast<double>(s);

  ParamStore store;
  Rng init_rng(MixSeed(config.seed, 0));
  InitVae(store, shape, init_rng);
  AdamState adam(AdamConfig{config.learning_rate});
  LagrangianState state{config.alpha_init, config.rho_init, config.l1, 0};

  const std::size_t batch = (config.batch_size == 0 || config.batch_size >= n) ? n : config.batch_size;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng batch_rng(MixSeed(config.seed, 1));
  std::size_t cursor = n;  // forces a shuffle on first use
  auto next_batch = [&]() {
    if (batch == n) return x;
    if (cursor + batch > n) {
      std::shuffle(order.begin(), order.end(), batch_rng);
      cursor = 0;
    }
    Tensor b({batch, x.cols()});
    for (std::size_t i = 0; i < batch; ++i) {
      const std::size_t r = order[cursor + i];
      std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(r * x.cols()), x.cols(),
                  b.data().begin() + static_cast<std::ptrdiff_t>(i * x.cols()));
    }
    cursor += batch;
    return b;
  };

  DagFit fit;
  double h_prev = std::numeric_limits<double>::infinity();
  double best_h = std::numeric_limits<double>::infinity();
  Tensor best_w = store.Get(Name("W"));
  std::uint64_t step = 0;
  for (std::size_t outer = 0; outer < config.max_outer; ++outer) {
    for (std::size_t inner = 0; inner < config.inner_steps; ++inner, ++step) {
      Tape tape;
      ParamBinder p(tape, store);
      Var xb = tape.Constant(next_batch());
      Var objective = LagrangianObjective(p, shape, xb, state, c, MixSeed(config.seed, 1000 + step));
      tape.Backward(objective);
      auto grads = p.Gradients();
      for (auto it = grads.begin(); it != grads.end();) {
        const bool is_logvar = it->first == Name("enc.logvar") || it->first == Name("dec.logvar");
        const bool keep = it->first == Name("W") || (is_logvar ? config.learn_variances : config.train_networks);
        it = keep ? std::next(it) : grads.erase(it);
      }
      adam.Step(store, grads);
    }
    const Tensor& w = store.Get(Name("W"));
    const double h = Acyclicity(w, c);
    state.outer = outer + 1;
    if (h < best_h) {
      best_h = h;
      best_w = w;
    }
    state.alpha += state.rho * h;
    if (h > config.h_shrink * h_prev) state.rho = std::min(state.rho * config.rho_growth, config.rho_max);
    h_prev = h;
    if (h <= config.h_tol) {
      fit.converged = true;
      break;
    }
  }
  fit.weights = fit.converged ? store.Get(Name("W")) : best_w;
  fit.h = Acyclicity(fit.weights, c);
  fit.outer_iterations = state.outer;
  fit.final_rho = state.rho;
  fit.final_alpha = state.alpha;
  fit.adjacency = ThresholdToDag(fit.weights, config.w_tol, &fit.removed_edges);
  return fit;
}

void SaveDagEdges(const std::string& path, const Tensor& adjacency) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write " + path);
  out << "nodes " << adjacency.rows() << '\n' << std::setprecision(17);
  for (std::size_t i = 0; i < adjacency.rows(); ++i) {
    for (std::size_t j = 0; j < adjacency.cols(); ++j) {
      if (adjacency.at(i, j) != 0.0) out << i << ' ' << j << ' ' << adjacency.at(i, j) << '\n';
    }
  }
}

std::size_t StructuralHammingDistance(const Tensor& truth, const Tensor& estimate) {
  if (!truth.SameShape(estimate) || truth.rank() != 2 || truth.rows() != truth.cols()) {
    throw ShapeError("SHD expects two square matrices of equal size");
  }
  std::size_t shd = 0;
  const std::size_t s = truth.rows();
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = i + 1; j < s; ++j) {
      const bool t_ij = truth.at(i, j) != 0.0, t_ji = truth.at(j, i) != 0.0;
      const bool e_ij = estimate.at(i, j) != 0.0, e_ji = estimate.at(j, i) != 0.0;
      if (t_ij != e_ij || t_ji != e_ji) ++shd;
    }
  }
  return shd;
}

}  // namespace cgnn
