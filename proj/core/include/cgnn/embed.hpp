#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cgnn/autodiff.hpp"
#include "cgnn/graphs.hpp"
#include "cgnn/nn.hpp"
#include "cgnn/tensor.hpp"

namespace cgnn {

// Learnable [d, total_cardinality] table; column j embeds global feature j.
void InitFieldEmbedding(ParamStore& store, const std::string& name, std::size_t dim,
                        std::size_t total_cardinality, Rng& rng);

// Rows of the result are the table columns selected by `global_indices`.
// Throws ContractError on an out-of-range index.
ad::Var FieldEmbed(const ad::Var& table, std::span<const std::size_t> global_indices);

// Column offsets of each field inside the shared table.
std::vector<std::size_t> FieldOffsets(const std::vector<std::size_t>& cardinalities);

struct WalkConfig {
  std::size_t walk_length = 20;
  std::size_t walks_per_node = 10;
  std::size_t window = 5;
  std::size_t dim = 64;
  std::size_t epochs = 5;
  std::size_t negatives = 5;
  double learning_rate = 0.025;
  std::uint64_t seed = 1;

  // Throws ConfigError unless walk_length >= 2, 1 <= window < walk_length and
  // the remaining sizes are positive.
  void Validate() const;
};

using Walk = std::vector<std::uint32_t>;

// walks_per_node rounds; in each round every node starts one walk. Steps pick
// an outgoing edge with probability proportional to its weight and stop at
// nodes without outgoing edges. Each start node draws from its own stream.
std::vector<Walk> RandomWalks(const WeightedDigraph& graph, const WalkConfig& config);

// (center, context) pairs at distance 1..window within one walk, ordered by
// center position then context position.
std::vector<std::pair<std::uint32_t, std::uint32_t>> SkipGramPairs(const Walk& walk, std::size_t window);

// Skip-gram with negative sampling over node ids. `input` rows are the
// embeddings; `output` rows are the context vectors.
class SkipGramModel {
 public:
  SkipGramModel(std::size_t num_nodes, std::size_t dim, Rng& rng);

  // Negative-sampling loss of one (center, context) pair with the given
  // negatives: -log s(u.v) - sum log s(-u.v_neg).
  double Loss(std::uint32_t center, std::uint32_t context, std::span<const std::uint32_t> negatives) const;
  // One SGD step on that loss; returns the loss before the update.
  double Update(std::uint32_t center, std::uint32_t context, std::span<const std::uint32_t> negatives,
                double learning_rate);

  const Tensor& input() const { return input_; }
  const Tensor& output() const { return output_; }
  Tensor& mutable_input() { return input_; }

 private:
  Tensor input_;
  Tensor output_;
  std::vector<double> scratch_;
};

// Trains SGNS on the walks and returns the [num_nodes, dim] input table.
// Negatives follow the unigram^0.75 distribution of walk tokens; the learning
// rate decays linearly to 1e-4 of its initial value. Nodes that never occur
// in a training pair get small random-normal rows.
Tensor SkipGramTrain(const std::vector<Walk>& walks, std::size_t num_nodes, const WalkConfig& config);

// RandomWalks followed by SkipGramTrain.
Tensor DeepWalk(const WeightedDigraph& graph, const WalkConfig& config);

// [field | graph] along columns.
ad::Var ConcatState(const ad::Var& field_vectors, const ad::Var& graph_vectors);
Tensor ConcatState(const Tensor& field_vectors, const Tensor& graph_vectors);

}  // namespace cgnn
