#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cgnn/autodiff.hpp"
#include "cgnn/datasets.hpp"
#include "cgnn/fusion.hpp"
#include "cgnn/gnn.hpp"
#include "cgnn/graphs.hpp"
#include "cgnn/nn.hpp"
#include "cgnn/predictor.hpp"

namespace cgnn {

enum class ModelKind { kCausalGnn, kLogistic };
enum class FeatureEncoder { kGraphFwFM, kGgnn };

const char* ModelKindName(ModelKind kind);
ModelKind ParseModelKind(const std::string& text);
const char* FeatureEncoderName(FeatureEncoder encoder);
FeatureEncoder ParseFeatureEncoder(const std::string& text);

struct ModelConfig {
  ModelKind kind = ModelKind::kCausalGnn;
  std::size_t field_dim = 128;
  std::size_t feature_graph_dim = 128;
  std::size_t user_dim = 64;
  std::size_t ad_dim = 64;
  std::size_t feature_layers = 3;
  std::size_t user_layers = 3;
  std::size_t ad_layers = 3;
  std::size_t heads = 2;
  std::size_t sample_size = 10;
  AggregatorKind aggregator = AggregatorKind::kMaxPool;
  FeatureEncoder encoder = FeatureEncoder::kGraphFwFM;
  bool use_user = true;
  bool use_ad = true;
  bool use_feature = true;
  double leaky_slope = 0.2;
  // Parameter initialization and neighbor sampling.
  std::uint64_t seed = 1;

  // Width of the feature states and of every fused representation.
  std::size_t state_dim() const { return field_dim + feature_graph_dim; }
};

// Frozen inputs produced by the graph stages. Entity members are unused when
// the corresponding branch is disabled.
struct GraphArtifacts {
  NeighborMask feature_mask;
  Tensor feature_embedding;  // [S, feature_graph_dim]
  NeighborMask user_mask;
  Tensor user_embedding;     // [num_users, user_dim]
  NeighborMask ad_mask;
  Tensor ad_embedding;       // [num_ads, ad_dim]
};

struct Batch {
  std::size_t size = 0;
  std::size_t num_fields = 0;
  std::vector<std::uint32_t> indices;  // row-major [size, S], per-field local ids
  std::vector<std::uint32_t> users;
  std::vector<std::uint32_t> ads;
  std::vector<std::uint8_t> labels;
};

Batch MakeBatch(const EncodedDataset& data, std::span<const std::size_t> rows);

// A trainable CTR model: configuration, vocabulary sizes, frozen graph inputs
// and named parameters.
struct Model {
  ModelConfig config;
  std::vector<std::size_t> cardinalities;
  GraphArtifacts artifacts;
  ParamStore params;

  std::size_t num_fields() const { return cardinalities.size(); }
  bool uses_user() const { return config.kind == ModelKind::kCausalGnn && config.use_user; }
  bool uses_ad() const { return config.kind == ModelKind::kCausalGnn && config.use_ad; }
  bool uses_feature() const { return config.kind == ModelKind::kLogistic || config.use_feature; }
};

// Validates shapes against the dataset, rounds frozen inputs to float
// precision and draws initial parameters from config.seed.
Model BuildModel(const ModelConfig& config, const EncodedDataset& data, GraphArtifacts artifacts);

// Clicking probabilities [B, 1].
ad::Var Forward(ParamBinder& p, const Model& model, const Batch& batch,
                const AttentionOptions& attention = {});

// Probabilities for `rows`, evaluated in chunks without gradients.
std::vector<double> Predict(const Model& model, const EncodedDataset& data, std::span<const std::size_t> rows,
                            std::size_t chunk = 2048);

// Feature-graph depth states for a batch (field-major [S * B, n] each).
std::vector<ad::Var> FeatureDepth(ParamBinder& p, const Model& model, const Batch& batch);

}  // namespace cgnn
