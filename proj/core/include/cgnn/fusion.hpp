#pragma once

#include <string>
#include <vector>

#include "cgnn/autodiff.hpp"
#include "cgnn/nn.hpp"

namespace cgnn {

struct MultiHeadShape {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  std::size_t heads = 2;
  // 0 selects max(1, input_dim / heads) for both key and value width.
  std::size_t head_dim = 0;

  std::size_t key_dim() const;
};

// <prefix>.head<h>.{Wq,Wk,Wv} [n, d] and <prefix>.Wo [heads * d, output_dim].
void InitMultiHead(ParamStore& store, const std::string& prefix, const MultiHeadShape& shape, Rng& rng);

struct AttentionOptions {
  // Added to every attention logit before the softmax.
  double logit_shift = 0.0;
};

struct MultiHeadOutput {
  // One [R, output_dim] row block per query token.
  std::vector<ad::Var> tokens;
  // weights[h][i] is [R, T]: head h, query token i over the T key tokens.
  std::vector<std::vector<ad::Var>> weights;
};

// Self-attention among T tokens, each an [R, n] block (R independent
// sequences). Scaled dot-product per head, heads concatenated in order, then
// projected by Wo.
MultiHeadOutput MultiHead(ParamBinder& p, const std::string& prefix, const MultiHeadShape& shape,
                          const std::vector<ad::Var>& tokens, const AttentionOptions& options = {});

// Mean over the attended depth tokens: [R, output_dim].
ad::Var FuseDepth(ParamBinder& p, const std::string& prefix, const MultiHeadShape& shape,
                  const std::vector<ad::Var>& depth, const AttentionOptions& options = {});

}  // namespace cgnn
