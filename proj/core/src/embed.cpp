#include "cgnn/embed.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cgnn {

void InitFieldEmbedding(ParamStore& store, const std::string& name, std::size_t dim,
                        std::size_t total_cardinality, Rng& rng) {
  if (dim == 0 || total_cardinality == 0) throw ConfigError("embedding table needs positive dimensions");
  Tensor table({dim, total_cardinality});
  const double bound = std::sqrt(6.0 / static_cast<double>(dim + 1));
  for (auto& v : table.values()) v = UniformReal(rng, -bound, bound);
  store.Add(name, std::move(table));
}

ad::Var FieldEmbed(const ad::Var& table, std::span<const std::size_t> global_indices) {
  return ad::GatherCols(table, global_indices);
}

std::vector<std::size_t> FieldOffsets(const std::vector<std::size_t>& cardinalities) {
  std::vector<std::size_t> offsets(cardinalities.size() + 1, 0);
  std::partial_sum(cardinalities.begin(), cardinalities.end(), offsets.begin() + 1);
  return offsets;
}

void WalkConfig::Validate() const {
  if (walk_length < 2) throw ConfigError("walk length must be at least 2");
  if (window < 1 || window >= walk_length) throw ConfigError("window must satisfy 1 <= w < walk length");
  if (walks_per_node == 0 || dim == 0 || epochs == 0) throw ConfigError("walk counts and dim must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("skip-gram learning rate must be positive");
}

std::vector<Walk> RandomWalks(const WeightedDigraph& graph, const WalkConfig& config) {
  config.Validate();
  const std::size_t n = graph.num_nodes();
  if (n == 0) throw ContractError("random walks need a nonempty graph");
  std::vector<std::vector<double>> cumulative(n);
  for (std::size_t v = 0; v < n; ++v) {
    double total = 0.0;
    for (const auto& e : graph.out(v)) cumulative[v].push_back(total += e.weight);
  }
  std::vector<std::vector<Walk>> per_node(n);
  for (std::size_t start = 0; start < n; ++start) {
    Rng rng(MixSeed(config.seed, start));
    for (std::size_t r = 0; r < config.walks_per_node; ++r) {
      Walk walk{static_cast<std::uint32_t>(start)};
      std::size_t at = start;
      while (walk.size() < config.walk_length) {
        const auto& cum = cumulative[at];
        if (cum.empty()) break;
        const double u = UniformReal(rng, 0.0, cum.back());
        auto it = std::upper_bound(cum.begin(), cum.end(), u);
        if (it == cum.end()) --it;
        at = graph.out(at)[static_cast<std::size_t>(it - cum.begin())].to;
        walk.push_back(static_cast<std::uint32_t>(at));
      }
      per_node[start].push_back(std::move(walk));
    }
  }
  std::vector<Walk> walks;
  walks.reserve(n * config.walks_per_node);
  for (std::size_t r = 0; r < config.walks_per_node; ++r) {
    for (std::size_t v = 0; v < n; ++v) walks.push_back(std::move(per_node[v][r]));
  }
  return walks;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> SkipGramPairs(const Walk& walk, std::size_t window) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  const std::size_t len = walk.size();
  for (std::size_t i = 0; i < len; ++i) {
    const std::size_t lo = i >= window ? i - window : 0;
    const std::size_t hi = std::min(len - 1, i + window);
    for (std::size_t j = lo; j <= hi; ++j) {
      if (j != i) pairs.emplace_back(walk[i], walk[j]);
    }
  }
  return pairs;
}

namespace {

double LogSigmoid(double x) { return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }
double Sigmoid(double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

double Dot(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t k = 0; k < d; ++k) s += a[k] * b[k];
  return s;
}

}  // namespace

SkipGramModel::SkipGramModel(std::size_t num_nodes, std::size_t dim, Rng& rng)
    : input_({num_nodes, dim}), output_({num_nodes, dim}), scratch_(dim) {
  const double half = 0.5 / static_cast<double>(dim);
  for (auto& v : input_.values()) v = UniformReal(rng, -half, half);
}

double SkipGramModel::Loss(std::uint32_t center, std::uint32_t context,
                           std::span<const std::uint32_t> negatives) const {
  const std::size_t d = input_.cols();
  const double* u = input_.values().data() + center * d;
  double loss = -LogSigmoid(Dot(u, output_.values().data() + context * d, d));
  for (auto neg : negatives) loss -= LogSigmoid(-Dot(u, output_.values().data() + neg * d, d));
  return loss;
}

double SkipGramModel::Update(std::uint32_t center, std::uint32_t context,
                             std::span<const std::uint32_t> negatives, double learning_rate) {
  const std::size_t d = input_.cols();
  const double loss = Loss(center, context, negatives);
  double* u = input_.values().data() + center * d;
  std::fill(scratch_.begin(), scratch_.end(), 0.0);
  auto step = [&](std::uint32_t target, double label) {
    double* v = &output_.at(target, 0);
    const double g = learning_rate * (label - Sigmoid(Dot(u, v, d)));
    for (std::size_t k = 0; k < d; ++k) {
      scratch_[k] += g * v[k];
      v[k] += g * u[k];
    }
  };
  step(context, 1.0);
  for (auto neg : negatives) step(neg, 0.0);
  for (std::size_t k = 0; k < d; ++k) u[k] += scratch_[k];
  return loss;
}

Tensor SkipGramTrain(const std::vector<Walk>& walks, std::size_t num_nodes, const WalkConfig& config) {
  config.Validate();
  if (walks.empty()) throw ContractError("skip-gram needs at least one walk");
  std::vector<double> counts(num_nodes, 0.0);
  std::vector<bool> paired(num_nodes, false);
  std::size_t total_pairs = 0;
  for (const auto& walk : walks) {
    for (auto v : walk) {
      if (v >= num_nodes) throw ContractError("walk visits node outside the table");
      counts[v] += 1.0;
    }
    if (walk.size() > 1) {
      for (auto v : walk) paired[v] = true;
      total_pairs += SkipGramPairs(walk, config.window).size();
    }
  }
  std::vector<double> cumulative(num_nodes);
  double acc = 0.0;
  for (std::size_t v = 0; v < num_nodes; ++v) cumulative[v] = acc += std::pow(counts[v], 0.75);

  Rng rng(MixSeed(config.seed, 0x5eed));
  SkipGramModel model(num_nodes, config.dim, rng);
  const double total_updates = static_cast<double>(total_pairs * config.epochs);
  std::vector<std::uint32_t> negatives;
  double done = 0.0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (const auto& walk : walks) {
      for (const auto& [center, context] : SkipGramPairs(walk, config.window)) {
        negatives.clear();
        for (std::size_t k = 0; k < config.negatives; ++k) {
          const double u = UniformReal(rng, 0.0, acc);
          auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
          if (it == cumulative.end()) --it;
          const auto neg = static_cast<std::uint32_t>(it - cumulative.begin());
          if (neg != context) negatives.push_back(neg);
        }
        const double lr = config.learning_rate * std::max(1e-4, 1.0 - done / total_updates);
        model.Update(center, context, negatives, lr);
        done += 1.0;
      }
    }
  }
  Tensor table = model.input();
  for (std::size_t v = 0; v < num_nodes; ++v) {
    if (paired[v]) continue;
    for (std::size_t k = 0; k < config.dim; ++k) table.at(v, k) = 0.01 * StandardNormal(rng);
  }
  RequireFinite(table, "skip-gram embeddings");
  return table;
}

Tensor DeepWalk(const WeightedDigraph& graph, const WalkConfig& config) {
  return SkipGramTrain(RandomWalks(graph, config), graph.num_nodes(), config);
}

ad::Var ConcatState(const ad::Var& field_vectors, const ad::Var& graph_vectors) {
  const ad::Var parts[] = {field_vectors, graph_vectors};
  return ad::ConcatCols(parts);
}

Tensor ConcatState(const Tensor& field_vectors, const Tensor& graph_vectors) {
  if (field_vectors.rank() != 2 || graph_vectors.rank() != 2 || field_vectors.rows() != graph_vectors.rows()) {
    throw ShapeError("concat_state expects two matrices with equal row counts");
  }
  const std::size_t r = field_vectors.rows(), a = field_vectors.cols(), b = graph_vectors.cols();
  Tensor out({r, a + b});
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t k = 0; k < a; ++k) out.at(i, k) = field_vectors.at(i, k);
    for (std::size_t k = 0; k < b; ++k) out.at(i, a + k) = graph_vectors.at(i, k);
  }
  return out;
}

}  // namespace cgnn
