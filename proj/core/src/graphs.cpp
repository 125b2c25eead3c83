#include "cgnn/graphs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <utility>

#include "cgnn/nn.hpp"

namespace cgnn {

std::size_t WeightedDigraph::num_edges() const {
  std::size_t n = 0;
  for (const auto& list : out_) n += list.size();
  return n;
}

void WeightedDigraph::SetEdge(std::size_t src, std::size_t dst, double weight) {
  if (src >= out_.size() || dst >= out_.size()) throw ContractError("edge endpoint out of range");
  if (!(weight > 0.0) || !std::isfinite(weight)) throw ContractError("edge weight must be positive and finite");
  auto& list = out_[src];
  auto it = std::lower_bound(list.begin(), list.end(), dst,
                             [](const Edge& e, std::size_t v) { return e.to < v; });
  if (it != list.end() && it->to == dst) {
    it->weight = weight;
  } else {
    list.insert(it, Edge{static_cast<std::uint32_t>(dst), weight});
  }
}

double WeightedDigraph::weight(std::size_t src, std::size_t dst) const {
  const auto& list = out_.at(src);
  auto it = std::lower_bound(list.begin(), list.end(), dst,
                             [](const Edge& e, std::size_t v) { return e.to < v; });
  return (it != list.end() && it->to == dst) ? it->weight : 0.0;
}

WeightedDigraph WeightedDigraph::Reversed() const {
  WeightedDigraph r(num_nodes());
  // Visiting sources in ascending order keeps each reversed list sorted.
  for (std::size_t src = 0; src < out_.size(); ++src) {
    for (const auto& e : out_[src]) r.out_[e.to].push_back(Edge{static_cast<std::uint32_t>(src), e.weight});
  }
  return r;
}

void WeightedDigraph::Save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write " + path);
  out << "nodes " << num_nodes() << '\n' << std::setprecision(17);
  for (std::size_t src = 0; src < out_.size(); ++src) {
    for (const auto& e : out_[src]) out << src << ' ' << e.to << ' ' << e.weight << '\n';
  }
}

WeightedDigraph WeightedDigraph::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot read " + path);
  std::string tag;
  std::size_t n = 0;
  if (!(in >> tag >> n) || tag != "nodes") throw IngestionError(path + ": expected 'nodes N' header");
  WeightedDigraph g(n);
  std::string line;
  std::getline(in, line);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::size_t src = 0, dst = 0;
    double w = 0.0;
    if (!(ls >> src >> dst >> w) || src >= n || dst >= n || !(w > 0.0)) {
      throw IngestionError(path + ":" + std::to_string(line_no) + ": malformed edge");
    }
    g.SetEdge(src, dst, w);
  }
  return g;
}

bool operator==(const WeightedDigraph& a, const WeightedDigraph& b) {
  if (a.num_nodes() != b.num_nodes()) return false;
  for (std::size_t i = 0; i < a.num_nodes(); ++i) {
    const auto& x = a.out_[i];
    const auto& y = b.out_[i];
    if (x.size() != y.size()) return false;
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (x[j].to != y[j].to || x[j].weight != y[j].weight) return false;
    }
  }
  return true;
}

WeightedDigraph BuildEntityGraph(const std::vector<std::vector<std::uint32_t>>& exposures,
                                 const EntityGraphOptions& options, std::size_t* excluded) {
  const std::size_t n = exposures.size();
  std::vector<std::vector<std::uint32_t>> sets(n);
  std::uint32_t max_item = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sets[i] = exposures[i];
    std::sort(sets[i].begin(), sets[i].end());
    sets[i].erase(std::unique(sets[i].begin(), sets[i].end()), sets[i].end());
    if (!sets[i].empty()) max_item = std::max(max_item, sets[i].back());
  }
  std::vector<std::vector<std::uint32_t>> holders(n ? max_item + 1 : 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto item : sets[i]) holders[item].push_back(static_cast<std::uint32_t>(i));
  }

  std::size_t empty = 0;
  WeightedDigraph g(n);
  std::vector<std::uint32_t> overlap(n, 0);
  std::vector<std::uint32_t> touched;
  std::vector<std::pair<double, std::uint32_t>> incoming;
  for (std::size_t dst = 0; dst < n; ++dst) {
    if (sets[dst].empty()) {
      ++empty;
      continue;
    }
    touched.clear();
    for (auto item : sets[dst]) {
      for (auto src : holders[item]) {
        if (src == dst) continue;
        if (overlap[src]++ == 0) touched.push_back(src);
      }
    }
    incoming.clear();
    const double denom = static_cast<double>(sets[dst].size());
    for (auto src : touched) {
      incoming.emplace_back(static_cast<double>(overlap[src]) / denom, src);
      overlap[src] = 0;
    }
    if (options.max_in_degree > 0 && incoming.size() > options.max_in_degree) {
      std::partial_sort(incoming.begin(), incoming.begin() + static_cast<std::ptrdiff_t>(options.max_in_degree),
                        incoming.end(), [](const auto& a, const auto& b) {
                          return a.first != b.first ? a.first > b.first : a.second < b.second;
                        });
      incoming.resize(options.max_in_degree);
    }
    for (const auto& [w, src] : incoming) g.SetEdge(src, dst, w);
  }
  if (excluded) *excluded = empty;
  return g;
}

bool NeighborMask::Contains(std::size_t src, std::size_t dst) const {
  const auto& list = in.at(dst);
  return std::find(list.begin(), list.end(), src) != list.end();
}

std::size_t NeighborMask::num_edges() const {
  std::size_t n = 0;
  for (const auto& list : in) n += list.size();
  return n;
}

NeighborMask Prune(const WeightedDigraph& graph, double epsilon) {
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw ContractError("prune threshold must lie in [0, 1)");
  NeighborMask mask;
  mask.epsilon = epsilon;
  mask.in.resize(graph.num_nodes());
  mask.in_weight.resize(graph.num_nodes());
  for (std::size_t src = 0; src < graph.num_nodes(); ++src) {
    for (const auto& e : graph.out(src)) {
      if (e.weight > epsilon) {
        mask.in[e.to].push_back(static_cast<std::uint32_t>(src));
        mask.in_weight[e.to].push_back(e.weight);
      }
    }
  }
  return mask;
}

NeighborMask PruneMatrix(const Tensor& weights, double epsilon) {
  if (weights.rank() != 2 || weights.rows() != weights.cols()) throw ShapeError("prune expects a square matrix");
  if (!(epsilon >= 0.0)) throw ContractError("prune threshold must be nonnegative");
  const std::size_t n = weights.rows();
  NeighborMask mask;
  mask.epsilon = epsilon;
  mask.in.resize(n);
  mask.in_weight.resize(n);
  for (std::size_t dst = 0; dst < n; ++dst) {
    for (std::size_t src = 0; src < n; ++src) {
      if (src == dst) continue;
      const double w = std::abs(weights.at(src, dst));
      if (w > epsilon) {
        mask.in[dst].push_back(static_cast<std::uint32_t>(src));
        mask.in_weight[dst].push_back(w);
      }
    }
  }
  return mask;
}

NeighborMask CompleteMask(std::size_t num_nodes) {
  NeighborMask mask;
  mask.in.resize(num_nodes);
  mask.in_weight.resize(num_nodes);
  for (std::size_t dst = 0; dst < num_nodes; ++dst) {
    for (std::size_t src = 0; src < num_nodes; ++src) {
      if (src == dst) continue;
      mask.in[dst].push_back(static_cast<std::uint32_t>(src));
      mask.in_weight[dst].push_back(1.0);
    }
  }
  return mask;
}

WeightedDigraph MaskGraph(const NeighborMask& mask) {
  WeightedDigraph g(mask.num_nodes());
  for (std::size_t dst = 0; dst < mask.num_nodes(); ++dst) {
    for (auto src : mask.in[dst]) g.SetEdge(src, dst, 1.0);
  }
  return g;
}

std::vector<std::uint32_t> SampleNeighbors(const NeighborMask& mask, std::size_t node, std::size_t k,
                                           std::uint64_t seed) {
  if (k == 0) throw ContractError("neighbor sample size must be >= 1");
  const auto& list = mask.in.at(node);
  if (list.size() <= k) return list;
  const auto& weights = mask.in_weight.at(node);
  // Efraimidis-Spirakis: the k largest u^(1/w) keys form a weighted sample
  // without replacement. Compared in log space for stability.
  Rng rng(MixSeed(seed, node));
  std::vector<std::pair<double, std::uint32_t>> keys;
  keys.reserve(list.size());
  for (std::size_t i = 0; i < list.size(); ++i) {
    double u = UniformReal(rng, 0.0, 1.0);
    while (u <= 0.0) u = UniformReal(rng, 0.0, 1.0);
    keys.emplace_back(std::log(u) / weights[i], list[i]);
  }
  std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(k), keys.end(),
                    [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<std::uint32_t> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(keys[i].second);
  return out;
}

std::vector<std::size_t> FindCycle(const Tensor& adjacency) {
  if (adjacency.rank() != 2 || adjacency.rows() != adjacency.cols()) {
    throw ShapeError("cycle check expects a square matrix");
  }
  const std::size_t n = adjacency.rows();
  enum : std::uint8_t { kWhite, kGrey, kBlack };
  std::vector<std::uint8_t> color(n, kWhite);
  std::vector<std::size_t> parent(n, n);
  // Iterative DFS with an explicit (node, next-candidate) stack.
  std::vector<std::pair<std::size_t, std::size_t>> stack;
  for (std::size_t root = 0; root < n; ++root) {
    if (color[root] != kWhite) continue;
    stack.emplace_back(root, 0);
    color[root] = kGrey;
    while (!stack.empty()) {
      auto& [u, next] = stack.back();
      if (next == n) {
        color[u] = kBlack;
        stack.pop_back();
        continue;
      }
      const std::size_t v = next++;
      if (adjacency.at(u, v) == 0.0) continue;
      if (color[v] == kGrey) {
        std::vector<std::size_t> cycle{v};
        for (std::size_t w = u; w != v; w = parent[w]) cycle.push_back(w);
        std::reverse(cycle.begin() + 1, cycle.end());
        cycle.push_back(v);
        return cycle;
      }
      if (color[v] == kWhite) {
        color[v] = kGrey;
        parent[v] = u;
        stack.emplace_back(v, 0);
      }
    }
  }
  return {};
}

bool IsAcyclic(const Tensor& adjacency) { return FindCycle(adjacency).empty(); }

}  // namespace cgnn
