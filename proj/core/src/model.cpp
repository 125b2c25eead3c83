#include "cgnn/model.hpp"

#include <algorithm>
#include <unordered_map>

#include "cgnn/embed.hpp"

namespace cgnn {

using namespace ad;

const char* ModelKindName(ModelKind kind) { return kind == ModelKind::kLogistic ? "logistic" : "causal-gnn"; }

ModelKind ParseModelKind(const std::string& text) {
  if (text == "causal-gnn") return ModelKind::kCausalGnn;
  if (text == "logistic") return ModelKind::kLogistic;
  throw ConfigError("unknown model kind '" + text + "' (causal-gnn, logistic)");
}

const char* FeatureEncoderName(FeatureEncoder encoder) {
  return encoder == FeatureEncoder::kGgnn ? "ggnn" : "graphfwfm";
}

FeatureEncoder ParseFeatureEncoder(const std::string& text) {
  if (text == "graphfwfm") return FeatureEncoder::kGraphFwFM;
  if (text == "ggnn") return FeatureEncoder::kGgnn;
  throw ConfigError("unknown feature encoder '" + text + "' (graphfwfm, ggnn)");
}

Batch MakeBatch(const EncodedDataset& data, std::span<const std::size_t> rows) {
  Batch b;
  b.size = rows.size();
  b.num_fields = data.num_fields();
  b.indices.reserve(rows.size() * b.num_fields);
  for (auto r : rows) {
    if (r >= data.num_rows) throw ContractError("batch row out of range");
    for (std::size_t k = 0; k < b.num_fields; ++k) b.indices.push_back(data.at(r, k));
    b.labels.push_back(data.labels[r]);
    if (data.has_users()) b.users.push_back(data.users[r]);
    if (data.has_ads()) b.ads.push_back(data.ads[r]);
  }
  return b;
}

namespace {

void RoundTensor(Tensor& t) {
  for (auto& v : t.values()) v = static_cast<double>(static_cast<float>(v));
}

void RoundMask(NeighborMask& mask) {
  for (auto& list : mask.in_weight) {
    for (auto& w : list) w = static_cast<double>(static_cast<float>(w));
  }
}

void CheckEntity(const char* what, const NeighborMask& mask, const Tensor& embedding, std::size_t count,
                 std::size_t dim) {
  if (mask.num_nodes() != count) {
    throw ConfigError(std::string(what) + " graph has " + std::to_string(mask.num_nodes()) + " nodes, dataset has " +
                      std::to_string(count));
  }
  if (embedding.rank() != 2 || embedding.rows() != count || embedding.cols() != dim) {
    throw ConfigError(std::string(what) + " embedding table must be [" + std::to_string(count) + ", " +
                      std::to_string(dim) + "]");
  }
}

FwfmShape FeatureShape(const Model& m) {
  return FwfmShape{m.num_fields(), m.config.state_dim(), m.config.feature_layers, m.config.leaky_slope};
}

SageShape EntityShape(const ModelConfig& c, std::size_t dim, std::size_t layers) {
  return SageShape{dim, layers, c.sample_size, c.aggregator};
}

MultiHeadShape FusionShape(const ModelConfig& c, std::size_t input_dim) {
  return MultiHeadShape{input_dim, c.state_dim(), c.heads, 0};
}

PredictorShape HeadShape(const Model& m) {
  return PredictorShape{m.config.state_dim(), m.num_fields(), m.uses_user(), m.uses_ad(), m.config.use_feature};
}

std::vector<std::size_t> GlobalIndicesFieldMajor(const Model& m, const Batch& b) {
  const auto offsets = FieldOffsets(m.cardinalities);
  const std::size_t s = m.num_fields();
  std::vector<std::size_t> gi(s * b.size);
  for (std::size_t k = 0; k < s; ++k) {
    for (std::size_t i = 0; i < b.size; ++i) {
      const std::size_t local = b.indices[i * s + k];
      if (local >= m.cardinalities[k]) throw ContractError("feature index outside its field vocabulary");
      gi[k * b.size + i] = offsets[k] + local;
    }
  }
  return gi;
}

// Fused [B, P] entity representations: unique targets go through GraphSAGE
// and fusion once, then rows are gathered back per instance.
Var EntityRepresentation(ParamBinder& p, const Model& m, const std::string& name, const NeighborMask& mask,
                         const Tensor& embedding, std::size_t dim, std::size_t layers,
                         std::uint64_t sampling_tag, const std::vector<std::uint32_t>& ids) {
  std::vector<std::uint32_t> targets;
  std::unordered_map<std::uint32_t, std::size_t> slot;
  std::vector<std::size_t> rows(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto [it, inserted] = slot.emplace(ids[i], targets.size());
    if (inserted) targets.push_back(ids[i]);
    rows[i] = it->second;
  }
  const SageShape shape = EntityShape(m.config, dim, layers);
  const SageReceptiveField field = ExpandReceptiveField(mask, targets, shape, MixSeed(m.config.seed, sampling_tag));
  Var table = p.tape().Constant(embedding);
  std::vector<Var> depth = GraphSage(p, "sage." + name, shape, table, field);
  Var fused = FuseDepth(p, "fusion." + name, FusionShape(m.config, dim), depth);
  return GatherRows(fused, rows);
}

Var LogisticForward(ParamBinder& p, const Model& m, const Batch& b) {
  const std::size_t s = m.num_fields();
  const auto offsets = FieldOffsets(m.cardinalities);
  std::vector<std::size_t> gi(b.size * s);
  for (std::size_t i = 0; i < b.size; ++i) {
    for (std::size_t k = 0; k < s; ++k) {
      const std::size_t local = b.indices[i * s + k];
      if (local >= m.cardinalities[k]) throw ContractError("feature index outside its field vocabulary");
      gi[i * s + k] = offsets[k] + local;
    }
  }
  Var weights = Reshape(GatherRows(p("lr.w"), gi), {b.size, s});
  return Sigmoid(AddBias(RowSum(weights), p("lr.b")));
}

}  // namespace

Model BuildModel(const ModelConfig& config, const EncodedDataset& data, GraphArtifacts artifacts) {
  Model m;
  m.config = config;
  m.cardinalities = data.cardinalities;
  const std::size_t s = data.num_fields();
  if (s == 0) throw ConfigError("model needs at least one field");
  std::size_t total = 0;
  for (auto c : data.cardinalities) total += c;
  Rng rng(MixSeed(config.seed, 0x40de1));

  if (config.kind == ModelKind::kLogistic) {
    m.params.Add("lr.w", Tensor({total, 1}));
    m.params.Add("lr.b", Tensor({1}));
    return m;
  }
  if (!config.use_feature && !config.use_user && !config.use_ad) {
    throw ConfigError("graph subset removes every representation branch");
  }
  if (config.use_user && !data.has_users()) throw ConfigError("user branch enabled but the dataset has no users");
  if (config.use_ad && !data.has_ads()) throw ConfigError("ad branch enabled but the dataset has no ads");
  if (config.heads == 0) throw ConfigError("fusion needs at least one head");

  if (config.use_feature) {
    if (artifacts.feature_mask.num_nodes() != s) throw ConfigError("feature mask does not match the field count");
    const Tensor& fe = artifacts.feature_embedding;
    if (fe.rank() != 2 || fe.rows() != s || fe.cols() != config.feature_graph_dim) {
      throw ConfigError("feature graph embedding must be [S, feature_graph_dim]");
    }
    RoundTensor(artifacts.feature_embedding);
    RoundMask(artifacts.feature_mask);
    InitFieldEmbedding(m.params, "embed.field", config.field_dim, total, rng);
    if (config.encoder == FeatureEncoder::kGraphFwFM) {
      InitGraphFwFM(m.params, FwfmShape{s, config.state_dim(), config.feature_layers, config.leaky_slope}, rng);
    } else {
      InitGgnn(m.params, config.state_dim(), rng);
    }
    InitMultiHead(m.params, "fusion.feature", FusionShape(config, config.state_dim()), rng);
  }
  if (config.use_user) {
    CheckEntity("user", artifacts.user_mask, artifacts.user_embedding, data.num_users, config.user_dim);
    RoundTensor(artifacts.user_embedding);
    RoundMask(artifacts.user_mask);
    InitSage(m.params, "sage.user", EntityShape(config, config.user_dim, config.user_layers), rng);
    InitMultiHead(m.params, "fusion.user", FusionShape(config, config.user_dim), rng);
  }
  if (config.use_ad) {
    CheckEntity("ad", artifacts.ad_mask, artifacts.ad_embedding, data.num_ads, config.ad_dim);
    RoundTensor(artifacts.ad_embedding);
    RoundMask(artifacts.ad_mask);
    InitSage(m.params, "sage.ad", EntityShape(config, config.ad_dim, config.ad_layers), rng);
    InitMultiHead(m.params, "fusion.ad", FusionShape(config, config.ad_dim), rng);
  }
  m.artifacts = std::move(artifacts);
  InitPredictor(m.params, HeadShape(m), rng);
  m.params.RoundToFloat();
  return m;
}

std::vector<Var> FeatureDepth(ParamBinder& p, const Model& m, const Batch& b) {
  const std::size_t s = m.num_fields();
  const auto gi = GlobalIndicesFieldMajor(m, b);
  Var field = FieldEmbed(p("embed.field"), gi);
  const Tensor& fe = m.artifacts.feature_embedding;
  Tensor graph({s * b.size, fe.cols()});
  for (std::size_t k = 0; k < s; ++k) {
    for (std::size_t i = 0; i < b.size; ++i) {
      std::copy_n(fe.values().data() + k * fe.cols(), fe.cols(), graph.values().data() + (k * b.size + i) * fe.cols());
    }
  }
  Var initial = ConcatState(field, p.tape().Constant(std::move(graph)));
  if (m.config.encoder == FeatureEncoder::kGraphFwFM) {
    return GraphFwFM(p, FeatureShape(m), initial, m.artifacts.feature_mask);
  }
  return Ggnn(p, s, m.config.feature_layers, initial);
}

Var Forward(ParamBinder& p, const Model& m, const Batch& b, const AttentionOptions& attention) {
  if (b.size == 0) throw ContractError("empty batch");
  if (b.num_fields != m.num_fields()) throw ShapeError("batch field count does not match the model");
  if (m.config.kind == ModelKind::kLogistic) return LogisticForward(p, m, b);

  Representations reps;
  if (m.config.use_feature) {
    std::vector<Var> depth = FeatureDepth(p, m, b);
    Var fused = FuseDepth(p, "fusion.feature", FusionShape(m.config, m.config.state_dim()), depth, attention);
    for (std::size_t k = 0; k < m.num_fields(); ++k) reps.fields.push_back(SliceRows(fused, k * b.size, b.size));
  }
  if (m.config.use_user) {
    reps.user = EntityRepresentation(p, m, "user", m.artifacts.user_mask, m.artifacts.user_embedding,
                                     m.config.user_dim, m.config.user_layers, 1, b.users);
  }
  if (m.config.use_ad) {
    reps.ad = EntityRepresentation(p, m, "ad", m.artifacts.ad_mask, m.artifacts.ad_embedding, m.config.ad_dim,
                                   m.config.ad_layers, 2, b.ads);
  }
  return FuseAndPredict(p, HeadShape(m), reps);
}

std::vector<double> Predict(const Model& model, const EncodedDataset& data, std::span<const std::size_t> rows,
                            std::size_t chunk) {
  std::vector<double> out;
  out.reserve(rows.size());
  chunk = std::max<std::size_t>(1, chunk);
  for (std::size_t start = 0; start < rows.size(); start += chunk) {
    const std::size_t count = std::min(chunk, rows.size() - start);
    Batch b = MakeBatch(data, rows.subspan(start, count));
    Tape tape;
    ParamBinder p(tape, model.params, false);
    Var probs = Forward(p, model, b);
    const auto& v = probs.value().values();
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

}  // namespace cgnn
