#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "cgnn/gnn.hpp"
#include "gradient_suite.hpp"
#include "oracles.hpp"

namespace cgnn {
namespace {

using namespace ad;
using testing::NaiveMatMul;
using testing::RandomTensor;

Tensor Block(const Tensor& states, std::size_t k, std::size_t b) {
  Tensor out({b, states.cols()});
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t c = 0; c < states.cols(); ++c) out.at(i, c) = states.at(k * b + i, c);
  }
  return out;
}

Tensor Stack(const std::vector<Tensor>& blocks) {
  const std::size_t b = blocks[0].rows(), n = blocks[0].cols();
  Tensor out({blocks.size() * b, n});
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t c = 0; c < n; ++c) out.at(k * b + i, c) = blocks[k].at(i, c);
    }
  }
  return out;
}

NeighborMask MaskFromLists(std::vector<std::vector<std::uint32_t>> in) {
  NeighborMask mask;
  mask.in = std::move(in);
  for (const auto& list : mask.in) mask.in_weight.emplace_back(list.size(), 1.0);
  return mask;
}

double Sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Tensor Map(Tensor t, double (*f)(double)) {
  for (double& v : t.values()) v = f(v);
  return t;
}

Tensor Plus(Tensor a, const Tensor& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

Tensor PlusBias(Tensor a, const Tensor& bias) {
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t c = 0; c < a.cols(); ++c) a.at(i, c) += bias[c];
  }
  return a;
}

Tensor NaiveGru(const ParamStore& s, const std::string& prefix, const Tensor& a, const Tensor& h) {
  auto g = [&](const std::string& n) { return s.Get(prefix + "." + n); };
  const Tensor z = Map(PlusBias(Plus(NaiveMatMul(a, g("Wz")), NaiveMatMul(h, g("Uz"))), g("bz")), Sig);
  const Tensor r = Map(PlusBias(Plus(NaiveMatMul(a, g("Wr")), NaiveMatMul(h, g("Ur"))), g("br")), Sig);
  Tensor rh = h;
  for (std::size_t i = 0; i < rh.size(); ++i) rh[i] *= r[i];
  const Tensor c = Map(PlusBias(Plus(NaiveMatMul(a, g("Wh")), NaiveMatMul(rh, g("Uh"))), g("bh")),
                       [](double x) { return std::tanh(x); });
  Tensor out = h;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - z[i]) * h[i] + z[i] * c[i];
  return out;
}

void ExpectNear(const Tensor& got, const Tensor& want, double tol) {
  ASSERT_EQ(got.shape(), want.shape());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], tol) << i;
}

class FwfmFixture : public ::testing::Test {
 protected:
  void Build(std::size_t fields, std::size_t dim, std::size_t batch, std::uint64_t seed) {
    shape = {fields, dim, 2, 0.2};
    b = batch;
    Rng rng(seed);
    InitGraphFwFM(store, shape, rng);
    store.Get("fwfm.r") = RandomTensor({fields, fields}, rng, 0.5, 1.5);
    for (std::size_t l = 0; l < 2; ++l) {
      store.Get("fwfm.layer" + std::to_string(l) + ".gru.bz") = RandomTensor({dim}, rng);
    }
    h = RandomTensor({fields * batch, dim}, rng);
  }

  FwfmShape shape;
  std::size_t b = 0;
  ParamStore store;
  Tensor h;
};

TEST_F(FwfmFixture, AttentionRowsSumToOneAndSingletonIsOne) {
  Build(4, 3, 5, 1);
  const NeighborMask mask = MaskFromLists({{1, 2, 3}, {0}, {}, {0, 1}});
  Tape tape;
  ParamBinder p(tape, store, false);
  const auto alpha = FwfmAttention(p, shape, 0, FwfmTransform(p, shape, tape.Constant(h)), mask);
  EXPECT_FALSE(alpha[2].valid());
  for (double v : alpha[1].value().values()) EXPECT_EQ(v, 1.0);
  for (std::size_t k : {0u, 3u}) {
    const Tensor& a = alpha[k].value();
    for (std::size_t i = 0; i < a.rows(); ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < a.cols(); ++j) {
        EXPECT_GT(a.at(i, j), 0.0);
        sum += a.at(i, j);
      }
      EXPECT_NEAR(sum, 1.0, 1e-14);
    }
  }
}

TEST_F(FwfmFixture, AttentionMatchesHandComputation) {
  Build(3, 3, 4, 2);
  const NeighborMask mask = MaskFromLists({{1, 2}, {}, {}});
  Tape tape;
  ParamBinder p(tape, store, false);
  const Tensor got = FwfmAttention(p, shape, 1, FwfmTransform(p, shape, tape.Constant(h)), mask)[0].value();
  const Tensor& attn = store.Get("fwfm.layer1.attn");
  const Tensor& r = store.Get("fwfm.r");
  std::vector<Tensor> t;
  for (std::size_t k = 0; k < 3; ++k) t.push_back(NaiveMatMul(Block(h, k, 4), store.Get("fwfm.Wk." + std::to_string(k))));
  for (std::size_t i = 0; i < 4; ++i) {
    double score[2];
    for (std::size_t j = 0; j < 2; ++j) {
      const std::size_t src = mask.in[0][j];
      double s = 0.0;
      for (std::size_t c = 0; c < 3; ++c) s += attn[c] * t[0].at(i, c) + attn[3 + c] * t[src].at(i, c);
      s *= r.at(src, 0);
      score[j] = s > 0 ? s : 0.2 * s;
    }
    const double m = std::max(score[0], score[1]);
    const double e0 = std::exp(score[0] - m), e1 = std::exp(score[1] - m);
    EXPECT_NEAR(got.at(i, 0), e0 / (e0 + e1), 1e-12);
    EXPECT_NEAR(got.at(i, 1), e1 / (e0 + e1), 1e-12);
  }
}

TEST_F(FwfmFixture, AggregateMatchesHandOracle) {
  Build(3, 4, 2, 3);
  const NeighborMask mask = MaskFromLists({{1, 2}, {2}, {}});
  Rng rng(33);
  std::vector<Tensor> transformed{RandomTensor({2, 4}, rng), RandomTensor({2, 4}, rng), RandomTensor({2, 4}, rng)};
  std::vector<Tensor> alpha{RandomTensor({2, 2}, rng, 0, 1), RandomTensor({2, 1}, rng, 0, 1), Tensor()};
  Tape tape;
  ParamBinder p(tape, store, false);
  std::vector<Var> tv, av(3);
  for (const auto& t : transformed) tv.push_back(tape.Constant(t));
  av[0] = tape.Constant(alpha[0]);
  av[1] = tape.Constant(alpha[1]);
  const Tensor got = FwfmAggregate(p, shape, tv, av, mask).value();
  const Tensor& r = store.Get("fwfm.r");
  std::vector<Tensor> want;
  for (std::size_t k = 0; k < 3; ++k) {
    Tensor sum({2, 4});
    for (std::size_t j = 0; j < mask.in[k].size(); ++j) {
      const std::size_t src = mask.in[k][j];
      for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t c = 0; c < 4; ++c) sum.at(i, c) += r.at(src, k) * alpha[k].at(i, j) * transformed[src].at(i, c);
      }
    }
    want.push_back(NaiveMatMul(sum, store.Get("fwfm.Wk." + std::to_string(k))));
  }
  ExpectNear(got, Stack(want), 1e-12);
}

TEST_F(FwfmFixture, ZeroRelationGivesZeroMessages) {
  Build(3, 3, 2, 4);
  store.Get("fwfm.r") = Tensor({3, 3});
  const NeighborMask mask = CompleteMask(3);
  Tape tape;
  ParamBinder p(tape, store, false);
  const auto t = FwfmTransform(p, shape, tape.Constant(h));
  const Tensor agg = FwfmAggregate(p, shape, t, FwfmAttention(p, shape, 0, t, mask), mask).value();
  for (double v : agg.values()) EXPECT_EQ(v, 0.0);
}

TEST_F(FwfmFixture, IdentityChainPassesStatesAlong) {
  Build(3, 3, 2, 5);
  for (std::size_t k = 0; k < 3; ++k) store.Get("fwfm.Wk." + std::to_string(k)) = Tensor::Identity(3);
  store.Get("fwfm.r") = Tensor({3, 3}, 1.0);
  const NeighborMask mask = MaskFromLists({{}, {0}, {1}});
  Tape tape;
  ParamBinder p(tape, store, false);
  const auto t = FwfmTransform(p, shape, tape.Constant(h));
  const Tensor agg = FwfmAggregate(p, shape, t, FwfmAttention(p, shape, 0, t, mask), mask).value();
  EXPECT_EQ(Block(agg, 0, 2), Tensor({2, 3}));
  EXPECT_EQ(Block(agg, 1, 2), Block(h, 0, 2));
  EXPECT_EQ(Block(agg, 2, 2), Block(h, 1, 2));
}

TEST_F(FwfmFixture, ClosedUpdateGateReducesToNormalizedDoubleState) {
  Build(3, 4, 2, 6);
  store.Get("fwfm.layer0.gru.bz") = Tensor({4}, -800.0);
  Tape tape;
  ParamBinder p(tape, store, false);
  const Tensor got = FwfmLayer(p, shape, 0, tape.Constant(h), CompleteMask(3)).value();
  Tensor doubled = h;
  for (double& v : doubled.values()) v *= 2.0;
  const Tensor want = LayerNorm(tape.Constant(doubled), tape.Constant(Tensor({4}, 1.0)), tape.Constant(Tensor({4})))
                          .value();
  ExpectNear(got, want, 1e-12);
}

TEST_F(FwfmFixture, StackReturnsEveryDepth) {
  Build(3, 4, 2, 7);
  Tape tape;
  ParamBinder p(tape, store, false);
  const auto depth = GraphFwFM(p, shape, tape.Constant(h), CompleteMask(3));
  ASSERT_EQ(depth.size(), shape.layers + 1);
  EXPECT_EQ(depth[0].value(), h);
  for (const auto& d : depth) EXPECT_EQ(d.value().shape(), h.shape());
}

TEST(FwfmMasking, NonNeighborPerturbationLeavesOutputUnchanged) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(100 + seed);
    const std::size_t s = 5, n = 3, b = 2;
    const FwfmShape shape{s, n, 1, 0.2};
    ParamStore store;
    InitGraphFwFM(store, shape, rng);
    std::vector<std::vector<std::uint32_t>> in(s);
    for (std::size_t dst = 0; dst < s; ++dst) {
      for (std::size_t src = 0; src < s; ++src) {
        if (src != dst && UniformReal(rng, 0, 1) < 0.4) in[dst].push_back(static_cast<std::uint32_t>(src));
      }
    }
    const NeighborMask mask = MaskFromLists(in);
    const Tensor h = RandomTensor({s * b, n}, rng);
    const std::size_t k = seed % s;
    std::size_t outsider = s;
    for (std::size_t j = 0; j < s; ++j) {
      if (j != k && std::find(in[k].begin(), in[k].end(), j) == in[k].end()) outsider = j;
    }
    if (outsider == s) continue;
    Tensor moved = h;
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t c = 0; c < n; ++c) moved.at(outsider * b + i, c) += UniformReal(rng, -3, 3);
    }
    Tape tape;
    ParamBinder p(tape, store, false);
    const Tensor a = FwfmLayer(p, shape, 0, tape.Constant(h), mask).value();
    const Tensor c = FwfmLayer(p, shape, 0, tape.Constant(moved), mask).value();
    EXPECT_EQ(Block(a, k, b), Block(c, k, b)) << "seed " << seed;
  }
}

TEST(Ggnn, ZeroMessagesAndClosedGateKeepStates) {
  Rng rng(8);
  ParamStore store;
  InitGgnn(store, 3, rng);
  store.Get("ggnn.Ain") = Tensor({3, 3});
  store.Get("ggnn.Aout") = Tensor({3, 3});
  store.Get("ggnn.gru.bz") = Tensor({3}, -800.0);
  const Tensor h = RandomTensor({6, 3}, rng);
  Tape tape;
  ParamBinder p(tape, store, false);
  EXPECT_EQ(GgnnLayer(p, 2, tape.Constant(h)).value(), h);
}

TEST(Ggnn, TwoFieldHandOracle) {
  Rng rng(9);
  ParamStore store;
  InitGgnn(store, 3, rng);
  store.Get("ggnn.b") = RandomTensor({6}, rng);
  const Tensor h = RandomTensor({4, 3}, rng);
  Tensor swapped({4, 3});
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t c = 0; c < 3; ++c) swapped.at(i, c) = h.at((i + 2) % 4, c);
  }
  const Tensor in = NaiveMatMul(swapped, store.Get("ggnn.Ain"));
  const Tensor out = NaiveMatMul(swapped, store.Get("ggnn.Aout"));
  Tensor message({4, 6});
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      message.at(i, c) = in.at(i, c);
      message.at(i, 3 + c) = out.at(i, c);
    }
  }
  const Tensor want = NaiveGru(store, "ggnn.gru", PlusBias(message, store.Get("ggnn.b")), h);
  Tape tape;
  ParamBinder p(tape, store, false);
  ExpectNear(GgnnLayer(p, 2, tape.Constant(h)).value(), want, 1e-12);
}

TEST(Ggnn, RejectsRaggedStates) {
  Rng rng(10);
  ParamStore store;
  InitGgnn(store, 2, rng);
  Tape tape;
  ParamBinder p(tape, store, false);
  EXPECT_THROW(GgnnLayer(p, 3, tape.Constant(Tensor({4, 2}))), ShapeError);
}

class SageFixture : public ::testing::TestWithParam<AggregatorKind> {};

Var Aggregate(ParamStore& store, AggregatorKind kind, const Tensor& neighbors, const std::vector<std::size_t>& offsets,
              Tape& tape) {
  ParamBinder p(tape, store, false);
  return SageAggregate(p, "sage", 0, kind, tape.Constant(neighbors), offsets);
}

ParamStore SageStore(AggregatorKind kind, std::size_t dim, std::uint64_t seed) {
  ParamStore store;
  Rng rng(seed);
  InitSage(store, "sage", {dim, 2, 4, kind}, rng);
  if (store.Has("sage.layer0.pool.b")) store.Get("sage.layer0.pool.b") = RandomTensor({dim}, rng);
  return store;
}

TEST(SageAggregate, MeanOfSegments) {
  ParamStore store = SageStore(AggregatorKind::kMean, 2, 1);
  const Tensor x = Tensor::Matrix({{1, 2}, {3, 4}, {5, 6}});
  Tape tape;
  const Tensor got = Aggregate(store, AggregatorKind::kMean, x, {0, 2, 2, 3}, tape).value();
  EXPECT_EQ(got, Tensor::Matrix({{2, 3}, {0, 0}, {5, 6}}));
}

TEST(SageAggregate, MaxPoolMatchesOracleAndDominates) {
  ParamStore store = SageStore(AggregatorKind::kMaxPool, 3, 2);
  Rng rng(3);
  const Tensor x = RandomTensor({5, 3}, rng);
  Tape tape;
  const Tensor got = Aggregate(store, AggregatorKind::kMaxPool, x, {0, 3, 5}, tape).value();
  const Tensor pooled = Map(PlusBias(NaiveMatMul(x, store.Get("sage.layer0.pool.W")), store.Get("sage.layer0.pool.b")), Sig);
  const std::size_t seg[] = {0, 3, 5};
  for (std::size_t s = 0; s < 2; ++s) {
    for (std::size_t c = 0; c < 3; ++c) {
      double m = -1.0;
      for (std::size_t i = seg[s]; i < seg[s + 1]; ++i) {
        m = std::max(m, pooled.at(i, c));
        EXPECT_GE(got.at(s, c), pooled.at(i, c) - 1e-12);
      }
      EXPECT_NEAR(got.at(s, c), m, 1e-12);
    }
  }
}

TEST_P(SageFixture, SingletonAndEmptySegments) {
  const AggregatorKind kind = GetParam();
  ParamStore store = SageStore(kind, 3, 4);
  Rng rng(5);
  const Tensor x = RandomTensor({1, 3}, rng);
  Tape tape;
  const Tensor got = Aggregate(store, kind, x, {0, 0, 1}, tape).value();
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(got.at(0, c), 0.0);
  if (kind == AggregatorKind::kMean) {
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(got.at(1, c), x.at(0, c));
  }
}

TEST_P(SageFixture, PermutationWithinSegment) {
  const AggregatorKind kind = GetParam();
  ParamStore store = SageStore(kind, 3, 6);
  Rng rng(7);
  const Tensor x = RandomTensor({4, 3}, rng);
  Tensor reversed({4, 3});
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t c = 0; c < 3; ++c) reversed.at(i, c) = x.at(3 - i, c);
  }
  Tape tape;
  const Tensor a = Aggregate(store, kind, x, {0, 4}, tape).value();
  const Tensor b = Aggregate(store, kind, reversed, {0, 4}, tape).value();
  double diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::abs(a[i] - b[i]));
  if (kind == AggregatorKind::kLstm) {
    EXPECT_GT(diff, 1e-6);
  } else {
    EXPECT_LE(diff, 1e-14);
  }
}

INSTANTIATE_TEST_SUITE_P(Aggregators, SageFixture,
                         ::testing::Values(AggregatorKind::kMean, AggregatorKind::kMeanPool, AggregatorKind::kMaxPool,
                                           AggregatorKind::kLstm),
                         [](const auto& info) {
                           std::string name = AggregatorName(info.param);
                           std::replace(name.begin(), name.end(), '-', '_');
                           return name;
                         });

TEST(SageLayer, SigmoidOfConcatenatedProjection) {
  ParamStore store = SageStore(AggregatorKind::kMean, 3, 8);
  Rng rng(9);
  const Tensor self = RandomTensor({2, 3}, rng), agg = RandomTensor({2, 3}, rng);
  Tensor both({2, 6});
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      both.at(i, c) = self.at(i, c);
      both.at(i, 3 + c) = agg.at(i, c);
    }
  }
  Tape tape;
  ParamBinder p(tape, store, false);
  ExpectNear(SageLayer(p, "sage", 0, tape.Constant(self), tape.Constant(agg)).value(),
             Map(NaiveMatMul(both, store.Get("sage.layer0.W")), Sig), 1e-12);
}

TEST(SageAggregatorNames, RoundTrip) {
  for (auto kind : {AggregatorKind::kMean, AggregatorKind::kLstm, AggregatorKind::kMeanPool, AggregatorKind::kMaxPool}) {
    EXPECT_EQ(ParseAggregator(AggregatorName(kind)), kind);
  }
  EXPECT_THROW(ParseAggregator("sum"), ConfigError);
}

NeighborMask RandomEntityMask(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  WeightedDigraph g(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && UniformReal(rng, 0, 1) < 0.3) g.SetEdge(i, j, UniformReal(rng, 0.1, 1.0));
    }
  }
  return Prune(g, 0.0);
}

TEST(ReceptiveField, TargetsLeadAndNeighborsAreRetained) {
  const NeighborMask mask = RandomEntityMask(30, 1);
  const SageShape shape{4, 2, 3, AggregatorKind::kMean};
  const std::vector<std::uint32_t> targets{5, 2, 17};
  const SageReceptiveField f = ExpandReceptiveField(mask, targets, shape, 3);
  ASSERT_EQ(f.nodes.size(), 3u);
  EXPECT_EQ(f.nodes[2], targets);
  for (std::size_t l = 1; l <= 2; ++l) {
    ASSERT_EQ(f.offsets[l].size(), f.nodes[l].size() + 1);
    EXPECT_TRUE(std::equal(f.nodes[l].begin(), f.nodes[l].end(), f.nodes[l - 1].begin()));
    for (std::size_t i = 0; i < f.nodes[l].size(); ++i) {
      EXPECT_LE(f.offsets[l][i + 1] - f.offsets[l][i], 3u);
      for (std::size_t r = f.offsets[l][i]; r < f.offsets[l][i + 1]; ++r) {
        EXPECT_TRUE(mask.Contains(f.nodes[l - 1][f.neighbor_rows[l][r]], f.nodes[l][i]));
      }
    }
  }
}

TEST(ReceptiveField, SampleOfATargetIgnoresTheRestOfTheBatch) {
  const NeighborMask mask = RandomEntityMask(30, 2);
  const SageShape shape{4, 1, 2, AggregatorKind::kMean};
  auto neighbors_of_first = [&](const std::vector<std::uint32_t>& targets) {
    const SageReceptiveField f = ExpandReceptiveField(mask, targets, shape, 5);
    std::vector<std::uint32_t> ids;
    for (std::size_t r = f.offsets[1][0]; r < f.offsets[1][1]; ++r) ids.push_back(f.nodes[0][f.neighbor_rows[1][r]]);
    return ids;
  };
  EXPECT_EQ(neighbors_of_first({7}), neighbors_of_first({7, 1, 2, 3}));
}

TEST(GraphSage, DepthStatesHaveTargetRows) {
  const NeighborMask mask = RandomEntityMask(20, 3);
  const SageShape shape{4, 2, 3, AggregatorKind::kMaxPool};
  ParamStore store;
  Rng rng(4);
  InitSage(store, "user", shape, rng);
  store.Add("features", RandomTensor({20, 4}, rng));
  const SageReceptiveField f = ExpandReceptiveField(mask, {1, 9}, shape, 7);
  Tape tape;
  ParamBinder p(tape, store, false);
  const auto depth = GraphSage(p, "user", shape, p("features"), f);
  ASSERT_EQ(depth.size(), 3u);
  for (const auto& d : depth) EXPECT_EQ(d.value().shape(), (Shape{2, 4}));
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(depth[0].value().at(1, c), store.Get("features").at(9, c));
}

}  // namespace
}  // namespace cgnn
