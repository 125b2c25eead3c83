#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cgnn/datasets.hpp"
#include "cgnn/model.hpp"

namespace cgnn {

struct TrainConfig {
  double learning_rate = 1.5e-3;
  std::size_t batch_size = 512;
  std::size_t max_epochs = 12;
  std::size_t patience = 5;
  std::size_t repetitions = 3;
  // Repetition r uses seed + r for initialization, sampling and shuffling.
  std::uint64_t seed = 1;
  // A validation logloss must drop by more than this to count as improvement.
  double tolerance = 1e-6;

  // Throws ConfigError unless patience < max_epochs, repetitions >= 1 and the
  // sizes are positive.
  void Validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 0 is the untrained model
  double train_logloss = 0.0;
  double val_logloss = 0.0;
  double val_auc = 0.0;
};

struct RunResult {
  std::uint64_t seed = 0;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double val_auc = 0.0;
  double val_logloss = 0.0;
  double test_auc = 0.0;
  double test_logloss = 0.0;
  double seconds = 0.0;
};

struct Metrics {
  // Arithmetic means over the runs.
  double val_auc = 0.0;
  double val_logloss = 0.0;
  double test_auc = 0.0;
  double test_logloss = 0.0;
  double seconds = 0.0;
  std::vector<RunResult> runs;
};

// Produces a freshly initialized model for a repetition seed.
using ModelFactory = std::function<Model(std::uint64_t seed)>;

// One training run: mini-batch Adam on the logloss, validation after each
// epoch, early stop after `patience` epochs without improvement, best
// validation parameters restored into `model`. Parameters are rounded to
// float precision after every update.
RunResult TrainRun(Model& model, const EncodedDataset& data, const Split& split, const TrainConfig& config,
                   std::uint64_t seed);

// TrainRun for each repetition; the first repetition's trained model is
// returned through `first_model` when given.
Metrics Train(const ModelFactory& factory, const EncodedDataset& data, const Split& split,
              const TrainConfig& config, Model* first_model = nullptr);

// Mean AUC and logloss of a model on `rows`.
struct Evaluation {
  double auc = 0.0;
  double logloss = 0.0;
};
Evaluation Evaluate(const Model& model, const EncodedDataset& data, const std::vector<std::size_t>& rows);

struct GridAxis {
  std::string key;
  std::vector<std::string> values;
};

struct GridCell {
  std::vector<std::pair<std::string, std::string>> settings;
  Metrics metrics;
};

struct GridResult {
  std::vector<GridCell> cells;  // row-major over the axes, first axis slowest
  std::size_t best = 0;
};

// Evaluates every combination of axis values through `run`, then picks the
// highest validation AUC with lower validation logloss breaking ties.
GridResult GridSearch(const std::vector<GridAxis>& axes,
                      const std::function<Metrics(const std::vector<std::pair<std::string, std::string>>&)>& run);

// Index of the best cell under the same rule.
std::size_t SelectBest(const std::vector<GridCell>& cells);

}  // namespace cgnn
