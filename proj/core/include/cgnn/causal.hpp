#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cgnn/autodiff.hpp"
#include "cgnn/datasets.hpp"
#include "cgnn/nn.hpp"
#include "cgnn/tensor.hpp"

namespace cgnn {

// Samples x fields x per-field width, stored as [n, S * q] with each sample's
// fields laid out contiguously.
struct CausalData {
  Tensor values;
  std::size_t num_fields = 0;
  std::size_t width = 1;

  std::size_t num_samples() const { return values.rows(); }
};

// Zero mean, unit variance per column (constant columns are centred only).
Tensor StandardizeColumns(const Tensor& x);

// Standardized category indices of the first `max_samples` rows (q = 1).
// With width > 1 each field becomes a one-hot of its `width` most frequent
// categories, then standardized.
CausalData CausalDataFromDataset(const EncodedDataset& data, const std::vector<std::size_t>& rows,
                                 std::size_t width = 1, std::size_t max_samples = 10000);

// Encoder/decoder networks of the structural VAE. Both apply a node-shared
// one-hidden-layer ReLU network to each field's q-vector; log-variances are
// per-field learned offsets.
struct VaeShape {
  std::size_t num_fields = 0;
  std::size_t width = 1;
  std::size_t hidden = 16;
  // Initial encoder log-variance.
  double latent_logvar = -4.0;
};

// Parameter names: causal.W, causal.{enc,dec}.{W1,b1,W2,b2,logvar}. Both
// networks start as the identity map plus a small random perturbation on the
// remaining hidden units; hidden must be at least 2 * width.
void InitVae(ParamStore& store, const VaeShape& shape, Rng& rng);
// Hidden width 2 with weights that make both networks exact identities on
// scalars (relu(x) - relu(-x)); log-variances 0; W = 0. Requires width 1.
void InitIdentityVae(ParamStore& store, const VaeShape& shape);

struct GaussianParams {
  ad::Var mean;
  ad::Var logvar;
};

// Adjacency with the diagonal forced to zero.
ad::Var MaskedAdjacency(ParamBinder& p, std::size_t num_fields);

// M_Z = f(X) (I - W) in row layout, S_Z = per-field log-variance.
GaussianParams EncodeSem(ParamBinder& p, const VaeShape& shape, const ad::Var& x, const ad::Var& adjacency);
// M_X = g(Z (I - W)^-1), S_X = per-field log-variance.
GaussianParams DecodeSem(ParamBinder& p, const VaeShape& shape, const ad::Var& z, const ad::Var& adjacency);

// Closed-form KL(N(mean, exp(logvar)) || N(0, I)) summed over all entries.
ad::Var GaussianKl(const GaussianParams& q);
// Gaussian log-density of x summed over all entries.
ad::Var GaussianLogLikelihood(const ad::Var& x, const GaussianParams& p);

struct ElboTerms {
  ad::Var loss;  // mean over the batch of KL - log-likelihood
  ad::Var kl;    // batch mean
  ad::Var log_likelihood;  // batch mean
};

// One reparameterized latent sample per row, noise drawn from `seed`.
ElboTerms ElboLoss(ParamBinder& p, const VaeShape& shape, const ad::Var& x, const ad::Var& adjacency,
                   std::uint64_t seed);

// tr[(I + c W o W)^S] - S.
double Acyclicity(const Tensor& w, double c);
ad::Var Acyclicity(const ad::Var& w, double c);

struct CausalConfig {
  double l1 = 0.1;
  double rho_init = 1.0;
  double alpha_init = 0.0;
  double rho_growth = 10.0;
  double rho_max = 1e16;
  double h_shrink = 0.25;
  double h_tol = 1e-8;
  double w_tol = 0.3;
  std::size_t inner_steps = 300;
  std::size_t max_outer = 20;
  std::size_t hidden = 16;
  double latent_logvar = -4.0;
  // Log-variances stay at their initial values unless set.
  bool learn_variances = false;
  // Encoder/decoder networks stay at their initial values unless set.
  bool train_networks = false;
  std::size_t batch_size = 1000;
  double learning_rate = 3e-3;
  // 0 selects 1 / S.
  double acyclic_c = 0.0;
  std::uint64_t seed = 1;
};

struct LagrangianState {
  double alpha = 0.0;
  double rho = 1.0;
  double l1 = 0.1;
  std::size_t outer = 0;
};

// Full penalized objective for one batch: loss + l1 |W|_1 + alpha h + rho/2 h^2.
ad::Var LagrangianObjective(ParamBinder& p, const VaeShape& shape, const ad::Var& x,
                            const LagrangianState& state, double c, std::uint64_t seed);

struct DagFit {
  Tensor weights;    // continuous W at the returned iterate
  Tensor adjacency;  // thresholded, guaranteed acyclic
  double h = 0.0;    // acyclicity of `weights`
  bool converged = false;
  std::size_t outer_iterations = 0;
  double final_rho = 0.0;
  double final_alpha = 0.0;
  std::vector<std::pair<std::size_t, std::size_t>> removed_edges;
};

DagFit FitDag(const CausalData& data, const CausalConfig& config);

// Zeroes entries below `w_tol` in magnitude and the diagonal, then breaks
// any remaining cycle by deleting its weakest edge.
Tensor ThresholdToDag(const Tensor& weights, double w_tol,
                      std::vector<std::pair<std::size_t, std::size_t>>* removed = nullptr);

// Edges of a matrix as "src dst weight" lines with a node header.
void SaveDagEdges(const std::string& path, const Tensor& adjacency);

// Structural Hamming distance between two supports: missing, extra and
// reversed edges each count once.
std::size_t StructuralHammingDistance(const Tensor& truth, const Tensor& estimate);

}  // namespace cgnn
