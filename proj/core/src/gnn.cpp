#include "cgnn/gnn.hpp"

#include <algorithm>
#include <unordered_map>

namespace cgnn {

using namespace ad;

namespace {

std::string LayerPrefix(const std::string& prefix, std::size_t layer) {
  return prefix + ".layer" + std::to_string(layer);
}

std::string FieldMatrix(std::size_t k) { return "fwfm.Wk." + std::to_string(k); }

std::size_t BatchRows(const Var& states, std::size_t num_fields) {
  if (num_fields == 0 || states.rows() % num_fields != 0) {
    throw ShapeError("field-major states must have a multiple of S rows");
  }
  return states.rows() / num_fields;
}

std::vector<Var> FieldBlocks(const Var& states, std::size_t num_fields) {
  const std::size_t b = BatchRows(states, num_fields);
  std::vector<Var> blocks;
  blocks.reserve(num_fields);
  for (std::size_t k = 0; k < num_fields; ++k) blocks.push_back(SliceRows(states, k * b, b));
  return blocks;
}

}  // namespace

void InitGraphFwFM(ParamStore& store, const FwfmShape& shape, Rng& rng) {
  const std::size_t s = shape.num_fields, n = shape.state_dim;
  if (s == 0 || n == 0 || shape.layers == 0) throw ConfigError("GraphFwFM needs fields, state dim and layers");
  for (std::size_t k = 0; k < s; ++k) store.Add(FieldMatrix(k), XavierUniform(n, n, rng));
  store.Add("fwfm.r", Tensor({s, s}, 1.0));
  for (std::size_t l = 0; l < shape.layers; ++l) {
    const std::string prefix = LayerPrefix("fwfm", l);
    store.Add(prefix + ".attn", XavierUniform(2 * n, 1, rng));
    InitGru(store, prefix + ".gru", n, n, rng);
    store.Add(prefix + ".ln.gain", Tensor({n}, 1.0));
    store.Add(prefix + ".ln.bias", Tensor({n}));
  }
}

std::vector<Var> FwfmTransform(ParamBinder& p, const FwfmShape& shape, const Var& states) {
  std::vector<Var> blocks = FieldBlocks(states, shape.num_fields);
  for (std::size_t k = 0; k < blocks.size(); ++k) blocks[k] = MatMul(blocks[k], p(FieldMatrix(k)));
  return blocks;
}

std::vector<Var> FwfmAttention(ParamBinder& p, const FwfmShape& shape, std::size_t layer,
                               const std::vector<Var>& transformed, const NeighborMask& mask) {
  const std::size_t s = shape.num_fields, n = shape.state_dim;
  if (mask.num_nodes() != s || transformed.size() != s) throw ShapeError("attention mask does not match fields");
  Var attn = p(LayerPrefix("fwfm", layer) + ".attn");
  Var a_dst = SliceRows(attn, 0, n);
  Var a_src = SliceRows(attn, n, n);
  Var r = p("fwfm.r");
  std::vector<Var> dst_score(s), src_score(s);
  for (std::size_t k = 0; k < s; ++k) {
    if (!mask.in[k].empty()) dst_score[k] = MatMul(transformed[k], a_dst);
    for (auto src : mask.in[k]) {
      if (!src_score[src].valid()) src_score[src] = MatMul(transformed[src], a_src);
    }
  }
  std::vector<Var> alpha(s);
  for (std::size_t k = 0; k < s; ++k) {
    const auto& in = mask.in[k];
    if (in.empty()) continue;
    std::vector<Var> scores;
    scores.reserve(in.size());
    for (auto src : in) scores.push_back(MulScalar(Add(dst_score[k], src_score[src]), Element(r, src, k)));
    alpha[k] = Softmax(LeakyRelu(ConcatCols(scores), shape.leaky_slope), 1);
  }
  return alpha;
}

Var FwfmAggregate(ParamBinder& p, const FwfmShape& shape, const std::vector<Var>& transformed,
                  const std::vector<Var>& attention, const NeighborMask& mask) {
  const std::size_t s = shape.num_fields;
  if (transformed.empty()) throw ShapeError("aggregate needs transformed states");
  const std::size_t b = transformed[0].rows();
  Var r = p("fwfm.r");
  std::vector<Var> out(s);
  for (std::size_t k = 0; k < s; ++k) {
    const auto& in = mask.in[k];
    if (in.empty()) {
      out[k] = p.tape().Constant(Tensor({b, shape.state_dim}));
      continue;
    }
    std::vector<Var> terms;
    terms.reserve(in.size());
    for (std::size_t j = 0; j < in.size(); ++j) {
      Var weight = MulScalar(SliceCols(attention[k], j, 1), Element(r, in[j], k));
      terms.push_back(ScaleRows(transformed[in[j]], weight));
    }
    out[k] = MatMul(AddN(terms), p(FieldMatrix(k)));
  }
  return ConcatRows(out);
}

Var FwfmLayer(ParamBinder& p, const FwfmShape& shape, std::size_t layer, const Var& states,
              const NeighborMask& mask) {
  const std::string prefix = LayerPrefix("fwfm", layer);
  std::vector<Var> transformed = FwfmTransform(p, shape, states);
  std::vector<Var> alpha = FwfmAttention(p, shape, layer, transformed, mask);
  Var aggregated = FwfmAggregate(p, shape, transformed, alpha, mask);
  Var updated = GruCell(p, prefix + ".gru", aggregated, states);
  return LayerNorm(Add(updated, states), p(prefix + ".ln.gain"), p(prefix + ".ln.bias"));
}

std::vector<Var> GraphFwFM(ParamBinder& p, const FwfmShape& shape, const Var& initial, const NeighborMask& mask) {
  std::vector<Var> depth{initial};
  for (std::size_t l = 0; l < shape.layers; ++l) depth.push_back(FwfmLayer(p, shape, l, depth.back(), mask));
  return depth;
}

void InitGgnn(ParamStore& store, std::size_t state_dim, Rng& rng) {
  if (state_dim == 0) throw ConfigError("GGNN needs a positive state dim");
  store.Add("ggnn.Ain", XavierUniform(state_dim, state_dim, rng));
  store.Add("ggnn.Aout", XavierUniform(state_dim, state_dim, rng));
  store.Add("ggnn.b", Tensor({2 * state_dim}));
  InitGru(store, "ggnn.gru", 2 * state_dim, state_dim, rng);
}

Var GgnnLayer(ParamBinder& p, std::size_t num_fields, const Var& states) {
  std::vector<Var> blocks = FieldBlocks(states, num_fields);
  Var total = AddN(blocks);
  std::vector<Var> copies(num_fields, total);
  Var others = Sub(ConcatRows(copies), states);
  const Var halves[] = {MatMul(others, p("ggnn.Ain")), MatMul(others, p("ggnn.Aout"))};
  Var message = AddBias(ConcatCols(halves), p("ggnn.b"));
  return GruCell(p, "ggnn.gru", message, states);
}

std::vector<Var> Ggnn(ParamBinder& p, std::size_t num_fields, std::size_t layers, const Var& initial) {
  std::vector<Var> depth{initial};
  for (std::size_t l = 0; l < layers; ++l) depth.push_back(GgnnLayer(p, num_fields, depth.back()));
  return depth;
}

const char* AggregatorName(AggregatorKind kind) {
  switch (kind) {
    case AggregatorKind::kMean: return "mean";
    case AggregatorKind::kLstm: return "lstm";
    case AggregatorKind::kMeanPool: return "mean-pool";
    case AggregatorKind::kMaxPool: return "max-pool";
  }
  return "?";
}

AggregatorKind ParseAggregator(const std::string& text) {
  for (auto kind : {AggregatorKind::kMean, AggregatorKind::kLstm, AggregatorKind::kMeanPool, AggregatorKind::kMaxPool}) {
    if (text == AggregatorName(kind)) return kind;
  }
  throw ConfigError("unknown aggregator '" + text + "' (mean, lstm, mean-pool, max-pool)");
}

void InitSage(ParamStore& store, const std::string& prefix, const SageShape& shape, Rng& rng) {
  if (shape.dim == 0 || shape.sample_size == 0) throw ConfigError("GraphSAGE needs positive dim and sample size");
  for (std::size_t l = 0; l < shape.layers; ++l) {
    const std::string lp = LayerPrefix(prefix, l);
    store.Add(lp + ".W", XavierUniform(2 * shape.dim, shape.dim, rng));
    switch (shape.aggregator) {
      case AggregatorKind::kMean: break;
      case AggregatorKind::kLstm: InitLstm(store, lp + ".lstm", shape.dim, shape.dim, rng); break;
      case AggregatorKind::kMeanPool:
      case AggregatorKind::kMaxPool:
        store.Add(lp + ".pool.W", XavierUniform(shape.dim, shape.dim, rng));
        store.Add(lp + ".pool.b", Tensor({shape.dim}));
        break;
    }
  }
}

Var SageAggregate(ParamBinder& p, const std::string& prefix, std::size_t layer, AggregatorKind kind,
                  const Var& neighbors, const std::vector<std::size_t>& offsets) {
  const std::string lp = LayerPrefix(prefix, layer);
  switch (kind) {
    case AggregatorKind::kMean: return SegmentReduceRows(neighbors, offsets, SegmentReduce::kMean);
    case AggregatorKind::kMeanPool:
    case AggregatorKind::kMaxPool: {
      Var pooled = Sigmoid(AddBias(MatMul(neighbors, p(lp + ".pool.W")), p(lp + ".pool.b")));
      return SegmentReduceRows(pooled, offsets,
                               kind == AggregatorKind::kMaxPool ? SegmentReduce::kMax : SegmentReduce::kMean);
    }
    case AggregatorKind::kLstm: {
      const std::size_t segs = offsets.size() - 1, d = neighbors.cols();
      std::size_t longest = 0;
      for (std::size_t i = 0; i < segs; ++i) longest = std::max(longest, offsets[i + 1] - offsets[i]);
      LstmState state{p.tape().Constant(Tensor({segs, d})), p.tape().Constant(Tensor({segs, d}))};
      for (std::size_t t = 0; t < longest; ++t) {
        std::vector<std::size_t> rows(segs, 0);
        Tensor active({segs, 1});
        for (std::size_t i = 0; i < segs; ++i) {
          if (offsets[i] + t < offsets[i + 1]) {
            rows[i] = offsets[i] + t;
            active[i] = 1.0;
          }
        }
        Var gate = p.tape().Constant(std::move(active));
        LstmState next = LstmStep(p, lp + ".lstm", GatherRows(neighbors, rows), state);
        state.h = Add(state.h, ScaleRows(Sub(next.h, state.h), gate));
        state.c = Add(state.c, ScaleRows(Sub(next.c, state.c), gate));
      }
      return state.h;
    }
  }
  throw ConfigError("unknown aggregator");
}

Var SageLayer(ParamBinder& p, const std::string& prefix, std::size_t layer, const Var& self, const Var& aggregated) {
  const Var parts[] = {self, aggregated};
  return Sigmoid(MatMul(ConcatCols(parts), p(LayerPrefix(prefix, layer) + ".W")));
}

SageReceptiveField ExpandReceptiveField(const NeighborMask& mask, const std::vector<std::uint32_t>& targets,
                                        const SageShape& shape, std::uint64_t seed) {
  const std::size_t depth = shape.layers;
  SageReceptiveField field;
  field.nodes.resize(depth + 1);
  field.neighbor_rows.resize(depth + 1);
  field.offsets.resize(depth + 1);
  field.nodes[depth] = targets;
  for (std::size_t l = depth; l >= 1; --l) {
    const auto& upper = field.nodes[l];
    auto& lower = field.nodes[l - 1];
    lower = upper;
    std::unordered_map<std::uint32_t, std::size_t> position;
    for (std::size_t i = 0; i < lower.size(); ++i) position.emplace(lower[i], i);
    auto& rows = field.neighbor_rows[l];
    auto& offsets = field.offsets[l];
    offsets.assign(1, 0);
    const std::uint64_t layer_seed = MixSeed(seed, l);
    for (auto node : upper) {
      if (node >= mask.num_nodes()) throw ContractError("entity id outside the graph");
      std::vector<std::uint32_t> sample =
          mask.in[node].empty() ? std::vector<std::uint32_t>{}
                                : SampleNeighbors(mask, node, shape.sample_size, layer_seed);
      if (shape.aggregator == AggregatorKind::kLstm) {
        Rng order(MixSeed(layer_seed ^ 0x15a3, node));
        std::shuffle(sample.begin(), sample.end(), order);
      }
      for (auto nb : sample) {
        auto [it, inserted] = position.emplace(nb, lower.size());
        if (inserted) lower.push_back(nb);
        rows.push_back(it->second);
      }
      offsets.push_back(rows.size());
    }
  }
  return field;
}

std::vector<Var> GraphSage(ParamBinder& p, const std::string& prefix, const SageShape& shape, const Var& features,
                           const SageReceptiveField& field) {
  const std::size_t depth = shape.layers;
  if (field.nodes.size() != depth + 1) throw ShapeError("receptive field depth does not match GraphSAGE layers");
  if (features.cols() != shape.dim) throw ShapeError("node features do not match GraphSAGE dim");
  const std::size_t targets = field.nodes[depth].size();
  std::vector<std::size_t> base(field.nodes[0].begin(), field.nodes[0].end());
  Var states = GatherRows(features, base);
  std::vector<Var> out{SliceRows(states, 0, targets)};
  for (std::size_t l = 1; l <= depth; ++l) {
    const std::size_t count = field.nodes[l].size();
    Var self = SliceRows(states, 0, count);
    Var aggregated;
    if (field.neighbor_rows[l].empty()) {
      aggregated = p.tape().Constant(Tensor({count, shape.dim}));
    } else {
      Var neighbors = GatherRows(states, field.neighbor_rows[l]);
      aggregated = SageAggregate(p, prefix, l - 1, shape.aggregator, neighbors, field.offsets[l]);
    }
    states = SageLayer(p, prefix, l - 1, self, aggregated);
    out.push_back(SliceRows(states, 0, targets));
  }
  return out;
}

}  // namespace cgnn
