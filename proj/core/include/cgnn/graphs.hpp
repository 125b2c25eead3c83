#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cgnn/tensor.hpp"

namespace cgnn {

struct Edge {
  std::uint32_t to = 0;
  double weight = 0.0;
};

// Directed graph with real edge weights stored as sorted out-adjacency lists.
class WeightedDigraph {
 public:
  WeightedDigraph() = default;
  explicit WeightedDigraph(std::size_t num_nodes) : out_(num_nodes) {}

  std::size_t num_nodes() const { return out_.size(); }
  std::size_t num_edges() const;
  // Inserts or overwrites src -> dst.
  void SetEdge(std::size_t src, std::size_t dst, double weight);
  const std::vector<Edge>& out(std::size_t node) const { return out_.at(node); }
  // Weight of src -> dst, or 0 when absent.
  double weight(std::size_t src, std::size_t dst) const;

  // Graph with every edge reversed; out-lists of the result are in-lists of
  // this graph.
  WeightedDigraph Reversed() const;

  void Save(const std::string& path) const;
  static WeightedDigraph Load(const std::string& path);

  friend bool operator==(const WeightedDigraph& a, const WeightedDigraph& b);

 private:
  std::vector<std::vector<Edge>> out_;
};

struct EntityGraphOptions {
  // Keep only the strongest incoming edges per destination (0 = unlimited).
  std::size_t max_in_degree = 100;
};

// exposures[i] lists the counterpart ids shown to entity i. Edge i' -> i
// exists when the sets intersect, weighted |S_i' & S_i| / |S_i|. Entities
// with empty sets get no edges and are counted in `excluded`.
WeightedDigraph BuildEntityGraph(const std::vector<std::vector<std::uint32_t>>& exposures,
                                 const EntityGraphOptions& options = {},
                                 std::size_t* excluded = nullptr);

// Retained neighbors after thresholding. `in[i]` lists the sources whose edge
// into i survives (the neighborhood that feeds i).
struct NeighborMask {
  double epsilon = 0.0;
  std::vector<std::vector<std::uint32_t>> in;
  std::vector<std::vector<double>> in_weight;

  std::size_t num_nodes() const { return in.size(); }
  bool Contains(std::size_t src, std::size_t dst) const;
  std::size_t num_edges() const;
};

// Keeps edges with weight strictly greater than epsilon.
NeighborMask Prune(const WeightedDigraph& graph, double epsilon);
// Square weight matrix with w(i, j) the edge i -> j. Entries are compared by
// magnitude; the diagonal is ignored.
NeighborMask PruneMatrix(const Tensor& weights, double epsilon);
// Every ordered pair except self-loops.
NeighborMask CompleteMask(std::size_t num_nodes);
// Binary digraph of the mask (weight 1 per retained edge).
WeightedDigraph MaskGraph(const NeighborMask& mask);

// Up to k retained in-neighbors of `node`; all of them when the degree is at
// most k, otherwise a weighted sample without replacement.
std::vector<std::uint32_t> SampleNeighbors(const NeighborMask& mask, std::size_t node, std::size_t k,
                                           std::uint64_t seed);

// Depth-first cycle detection over the support (nonzero entries) of a square
// matrix.
bool IsAcyclic(const Tensor& adjacency);
// Returns a cycle as a node sequence (first node repeated at the end), or an
// empty vector.
std::vector<std::size_t> FindCycle(const Tensor& adjacency);

}  // namespace cgnn
