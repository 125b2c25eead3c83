#include "cgnn/fusion.hpp"

#include <algorithm>
#include <cmath>

namespace cgnn {

using namespace ad;

std::size_t MultiHeadShape::key_dim() const {
  if (head_dim > 0) return head_dim;
  return std::max<std::size_t>(1, input_dim / std::max<std::size_t>(1, heads));
}

namespace {

std::string HeadPrefix(const std::string& prefix, std::size_t h) { return prefix + ".head" + std::to_string(h); }

}  // namespace

void InitMultiHead(ParamStore& store, const std::string& prefix, const MultiHeadShape& shape, Rng& rng) {
  if (shape.input_dim == 0 || shape.output_dim == 0 || shape.heads == 0) {
    throw ConfigError("multi-head attention needs positive dims and heads");
  }
  const std::size_t d = shape.key_dim();
  for (std::size_t h = 0; h < shape.heads; ++h) {
    const std::string hp = HeadPrefix(prefix, h);
    store.Add(hp + ".Wq", XavierUniform(shape.input_dim, d, rng));
    store.Add(hp + ".Wk", XavierUniform(shape.input_dim, d, rng));
    store.Add(hp + ".Wv", XavierUniform(shape.input_dim, d, rng));
  }
  store.Add(prefix + ".Wo", XavierUniform(shape.heads * d, shape.output_dim, rng));
}

MultiHeadOutput MultiHead(ParamBinder& p, const std::string& prefix, const MultiHeadShape& shape,
                          const std::vector<Var>& tokens, const AttentionOptions& options) {
  if (tokens.empty()) throw ContractError("multi-head attention needs at least one token");
  const std::size_t t_count = tokens.size();
  for (const auto& t : tokens) {
    if (t.rows() != tokens[0].rows() || t.cols() != shape.input_dim) throw ShapeError("attention tokens disagree");
  }
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(shape.key_dim()));
  MultiHeadOutput result;
  result.weights.resize(shape.heads);
  std::vector<std::vector<Var>> head_out(t_count);
  for (std::size_t h = 0; h < shape.heads; ++h) {
    const std::string hp = HeadPrefix(prefix, h);
    Var wq = p(hp + ".Wq"), wk = p(hp + ".Wk"), wv = p(hp + ".Wv");
    std::vector<Var> q, k, v;
    for (const auto& tok : tokens) {
      q.push_back(MatMul(tok, wq));
      k.push_back(MatMul(tok, wk));
      v.push_back(MatMul(tok, wv));
    }
    for (std::size_t i = 0; i < t_count; ++i) {
      std::vector<Var> logits;
      for (std::size_t j = 0; j < t_count; ++j) {
        Var s = Scale(RowSum(Mul(q[i], k[j])), inv_scale);
        if (options.logit_shift != 0.0) s = AddScalar(s, options.logit_shift);
        logits.push_back(s);
      }
      Var w = Softmax(ConcatCols(logits), 1);
      std::vector<Var> mixed;
      for (std::size_t j = 0; j < t_count; ++j) mixed.push_back(ScaleRows(v[j], SliceCols(w, j, 1)));
      head_out[i].push_back(AddN(mixed));
      result.weights[h].push_back(w);
    }
  }
  Var wo = p(prefix + ".Wo");
  for (std::size_t i = 0; i < t_count; ++i) result.tokens.push_back(MatMul(ConcatCols(head_out[i]), wo));
  return result;
}

Var FuseDepth(ParamBinder& p, const std::string& prefix, const MultiHeadShape& shape, const std::vector<Var>& depth,
              const AttentionOptions& options) {
  MultiHeadOutput attended = MultiHead(p, prefix, shape, depth, options);
  return Scale(AddN(attended.tokens), 1.0 / static_cast<double>(attended.tokens.size()));
}

}  // namespace cgnn
