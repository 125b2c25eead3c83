#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cgnn/autodiff.hpp"
#include "cgnn/graphs.hpp"
#include "cgnn/nn.hpp"

namespace cgnn {

// Feature-graph states are batched field-major: rows [k * B, (k + 1) * B)
// hold field k for the B instances of a batch, so a state matrix is [S * B, n].

struct FwfmShape {
  std::size_t num_fields = 0;
  std::size_t state_dim = 0;
  std::size_t layers = 3;
  double leaky_slope = 0.2;
};

// Parameters: fwfm.Wk.<k> [n, n] per field and fwfm.r [S, S] (initialized to
// 1) shared by all layers; per layer l: fwfm.layer<l>.attn [2n, 1],
// fwfm.layer<l>.gru.*, fwfm.layer<l>.ln.{gain,bias}.
void InitGraphFwFM(ParamStore& store, const FwfmShape& shape, Rng& rng);

// Per-field H_k W_k, each [B, n].
std::vector<ad::Var> FwfmTransform(ParamBinder& p, const FwfmShape& shape, const ad::Var& states);

// Attention over each destination's in-neighbors (mask.in[k] order). Entry k
// is [B, |in(k)|], or an unset Var when k has no in-neighbors. Scores are
// r(k', k) * (a_dst . W_k H_k + a_src . W_k' H_k') passed through a leaky ReLU
// before the softmax.
std::vector<ad::Var> FwfmAttention(ParamBinder& p, const FwfmShape& shape, std::size_t layer,
                                   const std::vector<ad::Var>& transformed, const NeighborMask& mask);

// Sum over in-neighbors k' of r(k', k) * alpha(k', k) * W_k W_k' H_k', stacked
// field-major. Destinations without in-neighbors receive zeros.
ad::Var FwfmAggregate(ParamBinder& p, const FwfmShape& shape, const std::vector<ad::Var>& transformed,
                      const std::vector<ad::Var>& attention, const NeighborMask& mask);

// LayerNorm(GRU(aggregate, H) + H).
ad::Var FwfmLayer(ParamBinder& p, const FwfmShape& shape, std::size_t layer, const ad::Var& states,
                  const NeighborMask& mask);

// [H^(0), ..., H^(layers)].
std::vector<ad::Var> GraphFwFM(ParamBinder& p, const FwfmShape& shape, const ad::Var& initial,
                               const NeighborMask& mask);

// Gated graph network over the complete field graph. Parameters ggnn.Ain,
// ggnn.Aout [n, n], ggnn.b [2n] and ggnn.gru.* are shared by all layers.
void InitGgnn(ParamStore& store, std::size_t state_dim, Rng& rng);
// a_k = [sum_{k' != k} H_k' Ain | sum_{k' != k} H_k' Aout] + b, then the GRU.
ad::Var GgnnLayer(ParamBinder& p, std::size_t num_fields, const ad::Var& states);
std::vector<ad::Var> Ggnn(ParamBinder& p, std::size_t num_fields, std::size_t layers, const ad::Var& initial);

enum class AggregatorKind { kMean, kLstm, kMeanPool, kMaxPool };
const char* AggregatorName(AggregatorKind kind);
AggregatorKind ParseAggregator(const std::string& text);

struct SageShape {
  std::size_t dim = 0;
  std::size_t layers = 3;
  std::size_t sample_size = 10;
  AggregatorKind aggregator = AggregatorKind::kMaxPool;
};

// Per layer l: <prefix>.layer<l>.W [2 dim, dim], plus <prefix>.layer<l>.pool.{W,b}
// for pooling aggregators or <prefix>.layer<l>.lstm.* for the LSTM aggregator.
void InitSage(ParamStore& store, const std::string& prefix, const SageShape& shape, Rng& rng);

// Reduces consecutive neighbor segments of `neighbors` (segment i spans rows
// [offsets[i], offsets[i+1])) to one row each; empty segments give zeros.
// The LSTM aggregator consumes each segment in row order.
ad::Var SageAggregate(ParamBinder& p, const std::string& prefix, std::size_t layer, AggregatorKind kind,
                      const ad::Var& neighbors, const std::vector<std::size_t>& offsets);

// sigmoid([self | aggregated] W).
ad::Var SageLayer(ParamBinder& p, const std::string& prefix, std::size_t layer, const ad::Var& self,
                  const ad::Var& aggregated);

// Sampled computation graph for a set of target nodes. nodes[l] lists the
// nodes whose layer-l state is needed; every nodes[l] starts with nodes[l+1],
// so the targets occupy the leading rows at each depth.
struct SageReceptiveField {
  std::vector<std::vector<std::uint32_t>> nodes;
  // For layer l >= 1: neighbor positions into nodes[l - 1] and segment offsets
  // per node of nodes[l].
  std::vector<std::vector<std::size_t>> neighbor_rows;
  std::vector<std::vector<std::size_t>> offsets;
};

// Layer-l neighborhoods are drawn with SampleNeighbors under MixSeed(seed, l),
// so a node's sample does not depend on the rest of the batch. LSTM
// neighborhoods are additionally shuffled with a per-node stream.
SageReceptiveField ExpandReceptiveField(const NeighborMask& mask, const std::vector<std::uint32_t>& targets,
                                        const SageShape& shape, std::uint64_t seed);

// Depth states [H^(0), ..., H^(layers)] of the targets, each [T, dim].
// `features` is the [num_nodes, dim] table of initial node states.
std::vector<ad::Var> GraphSage(ParamBinder& p, const std::string& prefix, const SageShape& shape,
                               const ad::Var& features, const SageReceptiveField& field);

}  // namespace cgnn
