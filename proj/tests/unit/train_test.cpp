#include <gtest/gtest.h>

#include <fstream>

#include "cgnn/checkpoint.hpp"
#include "cgnn/train.hpp"
#include "gradient_suite.hpp"
#include "synthetic.hpp"

namespace cgnn {
namespace {

TrainConfig QuickTrain() {
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.batch_size = 128;
  cfg.max_epochs = 4;
  cfg.patience = 2;
  cfg.repetitions = 1;
  return cfg;
}

ModelConfig LogisticConfig() {
  ModelConfig cfg;
  cfg.kind = ModelKind::kLogistic;
  return cfg;
}

NeighborMask RandomEntityMask(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  WeightedDigraph g(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && UniformReal(rng, 0, 1) < 0.05) g.SetEdge(i, j, UniformReal(rng, 0.1, 1.0));
    }
  }
  return Prune(g, 0.0);
}

ModelConfig SmallGnnConfig() {
  ModelConfig cfg;
  cfg.field_dim = 4;
  cfg.feature_graph_dim = 4;
  cfg.user_dim = 4;
  cfg.ad_dim = 4;
  cfg.feature_layers = 2;
  cfg.user_layers = 1;
  cfg.ad_layers = 1;
  cfg.sample_size = 3;
  return cfg;
}

GraphArtifacts SmallArtifacts(const EncodedDataset& data, const ModelConfig& cfg) {
  Rng rng(99);
  GraphArtifacts a;
  a.feature_mask = CompleteMask(data.num_fields());
  a.feature_embedding = testing::RandomTensor({data.num_fields(), cfg.feature_graph_dim}, rng);
  a.user_mask = RandomEntityMask(data.num_users, 1);
  a.user_embedding = testing::RandomTensor({data.num_users, cfg.user_dim}, rng);
  a.ad_mask = RandomEntityMask(data.num_ads, 2);
  a.ad_embedding = testing::RandomTensor({data.num_ads, cfg.ad_dim}, rng);
  return a;
}

TEST(TrainConfig, ValidatesPatienceAndSizes) {
  TrainConfig cfg = QuickTrain();
  EXPECT_NO_THROW(cfg.Validate());
  cfg.patience = cfg.max_epochs;
  EXPECT_THROW(cfg.Validate(), ConfigError);
  cfg = QuickTrain();
  cfg.repetitions = 0;
  EXPECT_THROW(cfg.Validate(), ConfigError);
  cfg = QuickTrain();
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.Validate(), ConfigError);
}

TEST(Logistic, SeparableDataIsLearned) {
  const EncodedDataset data = testing::MakeSeparableDataset(3000, 1);
  const Split split = MakeSplit(data.num_rows, 1);
  const Metrics m = Train([&](std::uint64_t) { return BuildModel(LogisticConfig(), data, {}); }, data, split,
                          QuickTrain());
  EXPECT_GT(m.test_auc, 0.99);
}

TEST(Logistic, NoiseStaysNearChance) {
  const EncodedDataset data = testing::MakeNoiseDataset(10000, 2);
  const Split split = MakeSplit(data.num_rows, 2);
  const Metrics m = Train([&](std::uint64_t) { return BuildModel(LogisticConfig(), data, {}); }, data, split,
                          QuickTrain());
  EXPECT_GE(m.test_auc, 0.45);
  EXPECT_LE(m.test_auc, 0.55);
}

TEST(EarlyStop, FrozenCurveStopsAfterPatience) {
  const EncodedDataset data = testing::MakeSeparableDataset(500, 3);
  const Split split = MakeSplit(data.num_rows, 3);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.batch_size = 128;
  Model model = BuildModel(LogisticConfig(), data, {});
  const RunResult run = TrainRun(model, data, split, cfg, 1);
  EXPECT_EQ(run.history.back().epoch, 6u);
  EXPECT_EQ(run.best_epoch, 1u);
}

TEST(EarlyStop, BestParametersAreRestored) {
  const EncodedDataset data = testing::MakeSeparableDataset(800, 4);
  const Split split = MakeSplit(data.num_rows, 4);
  Model model = BuildModel(LogisticConfig(), data, {});
  const RunResult run = TrainRun(model, data, split, QuickTrain(), 1);
  double best = run.history[run.best_epoch].val_logloss;
  EXPECT_DOUBLE_EQ(run.val_logloss, best);
  EXPECT_DOUBLE_EQ(Evaluate(model, data, split.val).logloss, best);
}

TEST(CausalGnn, LossDecreasesOnPlantedData) {
  const EncodedDataset data = testing::MakePlantedDataset({.rows = 500, .users = 30, .ads = 10});
  const Split split = MakeSplit(data.num_rows, 5);
  const ModelConfig cfg = SmallGnnConfig();
  Model model = BuildModel(cfg, data, SmallArtifacts(data, cfg));
  TrainConfig train = QuickTrain();
  train.learning_rate = 0.01;
  train.batch_size = 64;
  train.max_epochs = 3;
  const RunResult run = TrainRun(model, data, split, train, 1);
  ASSERT_GE(run.history.size(), 4u);
  EXPECT_LT(run.history[3].train_logloss, run.history[0].train_logloss);
}

TEST(CausalGnn, PredictionsAreProbabilities) {
  const EncodedDataset data = testing::MakePlantedDataset({.rows = 200, .users = 20, .ads = 8});
  const ModelConfig cfg = SmallGnnConfig();
  const Model model = BuildModel(cfg, data, SmallArtifacts(data, cfg));
  std::vector<std::size_t> rows(data.num_rows);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  for (double p : Predict(model, data, rows, 64)) {
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
  }
}

TEST(CausalGnn, PredictionIgnoresBatchComposition) {
  const EncodedDataset data = testing::MakePlantedDataset({.rows = 100, .users = 20, .ads = 8});
  const ModelConfig cfg = SmallGnnConfig();
  const Model model = BuildModel(cfg, data, SmallArtifacts(data, cfg));
  std::vector<std::size_t> rows(data.num_rows);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  const auto whole = Predict(model, data, rows, 100);
  const auto chunked = Predict(model, data, rows, 7);
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_NEAR(whole[i], chunked[i], 1e-12);
}

TEST(Train, DeterministicAndMeansAverageRuns) {
  const EncodedDataset data = testing::MakeSeparableDataset(600, 6);
  const Split split = MakeSplit(data.num_rows, 6);
  TrainConfig cfg = QuickTrain();
  cfg.repetitions = 3;
  auto factory = [&](std::uint64_t seed) {
    ModelConfig mc = LogisticConfig();
    mc.seed = seed;
    return BuildModel(mc, data, {});
  };
  const Metrics a = Train(factory, data, split, cfg);
  const Metrics b = Train(factory, data, split, cfg);
  ASSERT_EQ(a.runs.size(), 3u);
  double auc = 0.0, loss = 0.0;
  for (std::size_t r = 0; r < 3; ++r) {
    EXPECT_EQ(a.runs[r].seed, cfg.seed + r);
    EXPECT_EQ(a.runs[r].test_auc, b.runs[r].test_auc);
    EXPECT_EQ(a.runs[r].test_logloss, b.runs[r].test_logloss);
    auc += a.runs[r].test_auc / 3.0;
    loss += a.runs[r].test_logloss / 3.0;
  }
  EXPECT_NEAR(a.test_auc, auc, 1e-15);
  EXPECT_NEAR(a.test_logloss, loss, 1e-15);
}

Metrics FakeMetrics(double auc, double loss) {
  Metrics m;
  m.val_auc = auc;
  m.val_logloss = loss;
  return m;
}

TEST(Grid, SingleCellAndRowMajorOrder) {
  std::vector<std::string> seen;
  const GridResult one = GridSearch({{"train.learning_rate", {"0.01"}}}, [&](const auto& settings) {
    seen.push_back(settings[0].second);
    return FakeMetrics(0.7, 0.5);
  });
  EXPECT_EQ(one.cells.size(), 1u);
  EXPECT_EQ(one.best, 0u);

  seen.clear();
  const GridResult grid = GridSearch({{"a", {"1", "2"}}, {"b", {"x", "y", "z"}}}, [&](const auto& settings) {
    seen.push_back(settings[0].second + settings[1].second);
    return FakeMetrics(settings[1].second == "y" && settings[0].second == "2" ? 0.9 : 0.6, 0.4);
  });
  EXPECT_EQ(seen, (std::vector<std::string>{"1x", "1y", "1z", "2x", "2y", "2z"}));
  EXPECT_EQ(grid.best, 4u);
}

TEST(Grid, LowerLoglossBreaksAucTies) {
  std::vector<GridCell> cells(3);
  cells[0].metrics = FakeMetrics(0.8, 0.5);
  cells[1].metrics = FakeMetrics(0.8, 0.4);
  cells[2].metrics = FakeMetrics(0.7, 0.1);
  EXPECT_EQ(SelectBest(cells), 1u);
}

TEST(Checkpoint, RoundTripIsBitwise) {
  const EncodedDataset data = testing::MakePlantedDataset({.rows = 120, .users = 20, .ads = 8});
  const ModelConfig cfg = SmallGnnConfig();
  Checkpoint ckpt;
  ckpt.model = BuildModel(cfg, data, SmallArtifacts(data, cfg));
  ckpt.config.model = cfg;
  ckpt.dataset_fingerprint = data.Fingerprint();
  ckpt.metrics = {0.75, 0.5};
  const std::string path = testing::TempDir("ckpt") + "/model.ckpt";
  SaveCheckpoint(path, ckpt);
  const Checkpoint back = LoadCheckpoint(path);
  EXPECT_EQ(back.dataset_fingerprint, ckpt.dataset_fingerprint);
  EXPECT_EQ(back.metrics.test_auc, 0.75);
  EXPECT_EQ(back.model.cardinalities, ckpt.model.cardinalities);
  ASSERT_EQ(back.model.params.size(), ckpt.model.params.size());
  for (const auto& [name, value] : ckpt.model.params.items()) EXPECT_EQ(back.model.params.Get(name), value) << name;
  std::vector<std::size_t> rows(data.num_rows);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  EXPECT_EQ(Predict(back.model, data, rows), Predict(ckpt.model, data, rows));
}

TEST(Checkpoint, RejectsForeignFiles) {
  const std::string path = testing::TempDir("ckpt-bad") + "/junk.ckpt";
  {
    std::ofstream out(path);
    out << "not a checkpoint";
  }
  EXPECT_THROW(LoadCheckpoint(path), IngestionError);
  EXPECT_THROW(LoadCheckpoint(path + ".missing"), IngestionError);
}

}  // namespace
}  // namespace cgnn
