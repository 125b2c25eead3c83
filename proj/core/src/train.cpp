#include "cgnn/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "cgnn/metrics.hpp"
#include "cgnn/predictor.hpp"

namespace cgnn {

void TrainConfig::Validate() const {
  if (!(learning_rate >= 0.0)) throw ConfigError("learning rate must be nonnegative");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (max_epochs == 0) throw ConfigError("max epochs must be positive");
  if (patience >= max_epochs) throw ConfigError("patience must be smaller than max epochs");
  if (repetitions == 0) throw ConfigError("repetitions must be at least 1");
}

Evaluation Evaluate(const Model& model, const EncodedDataset& data, const std::vector<std::size_t>& rows) {
  if (rows.empty()) throw ContractError("evaluation needs at least one row");
  const std::vector<double> probs = Predict(model, data, rows);
  std::vector<std::uint8_t> labels(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) labels[i] = data.labels[rows[i]];
  for (double v : probs) {
    if (!std::isfinite(v)) throw NumericError("model produced a non-finite probability");
  }
  return Evaluation{Auc(labels, probs), LogLoss(labels, probs)};
}

RunResult TrainRun(Model& model, const EncodedDataset& data, const Split& split, const TrainConfig& config,
                   std::uint64_t seed) {
  config.Validate();
  if (split.train.empty() || split.val.empty() || split.test.empty()) {
    throw ContractError("training needs nonempty train, validation and test splits");
  }
  const auto start = std::chrono::steady_clock::now();
  RunResult run;
  run.seed = seed;
  AdamState adam(AdamConfig{config.learning_rate});

  auto record = [&](std::size_t epoch) {
    const Evaluation train = Evaluate(model, data, split.train);
    const Evaluation val = Evaluate(model, data, split.val);
    run.history.push_back(EpochRecord{epoch, train.logloss, val.logloss, val.auc});
    return val;
  };
  record(0);

  double best_loss = std::numeric_limits<double>::infinity();
  ParamStore best_params = model.params;
  std::size_t stale = 0;
  std::vector<std::size_t> order = split.train;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    Rng shuffle_rng(MixSeed(seed, 0xe90c + epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t begin = 0, batch_no = 0; begin < order.size(); begin += config.batch_size, ++batch_no) {
      const std::size_t count = std::min(config.batch_size, order.size() - begin);
      Batch batch = MakeBatch(data, std::span<const std::size_t>(order).subspan(begin, count));
      ad::Tape tape;
      ParamBinder p(tape, model.params);
      ad::Var loss = LogLossVar(Forward(p, model, batch), batch.labels);
      if (!std::isfinite(loss.value().item())) {
        std::ostringstream msg;
        msg << "training diverged: non-finite loss at epoch " << epoch << ", batch " << batch_no
            << " (learning rate " << config.learning_rate << ", seed " << seed << ")";
        throw NumericError(msg.str());
      }
      tape.Backward(loss);
      adam.Step(model.params, p.Gradients());
      model.params.RoundToFloat();
    }
    const Evaluation val = record(epoch);
    if (val.logloss < best_loss - config.tolerance) {
      best_loss = val.logloss;
      best_params = model.params;
      run.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
  }
  model.params = std::move(best_params);
  const Evaluation val = Evaluate(model, data, split.val);
  const Evaluation test = Evaluate(model, data, split.test);
  run.val_auc = val.auc;
  run.val_logloss = val.logloss;
  run.test_auc = test.auc;
  run.test_logloss = test.logloss;
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return run;
}

Metrics Train(const ModelFactory& factory, const EncodedDataset& data, const Split& split, const TrainConfig& config,
              Model* first_model) {
  config.Validate();
  Metrics metrics;
  for (std::size_t r = 0; r < config.repetitions; ++r) {
    const std::uint64_t seed = config.seed + r;
    Model model = factory(seed);
    metrics.runs.push_back(TrainRun(model, data, split, config, seed));
    if (r == 0 && first_model) *first_model = std::move(model);
  }
  const double n = static_cast<double>(metrics.runs.size());
  for (const auto& run : metrics.runs) {
    metrics.val_auc += run.val_auc / n;
    metrics.val_logloss += run.val_logloss / n;
    metrics.test_auc += run.test_auc / n;
    metrics.test_logloss += run.test_logloss / n;
    metrics.seconds += run.seconds;
  }
  return metrics;
}

std::size_t SelectBest(const std::vector<GridCell>& cells) {
  if (cells.empty()) throw ContractError("grid search needs at least one cell");
  std::size_t best = 0;
  for (std::size_t i = 1; i < cells.size(); ++i) {
    const Metrics& a = cells[i].metrics;
    const Metrics& b = cells[best].metrics;
    if (a.val_auc > b.val_auc || (a.val_auc == b.val_auc && a.val_logloss < b.val_logloss)) best = i;
  }
  return best;
}

GridResult GridSearch(const std::vector<GridAxis>& axes,
                      const std::function<Metrics(const std::vector<std::pair<std::string, std::string>>&)>& run) {
  if (axes.empty()) throw ConfigError("grid needs at least one axis");
  for (const auto& axis : axes) {
    if (axis.values.empty()) throw ConfigError("grid axis '" + axis.key + "' has no values");
  }
  GridResult result;
  std::vector<std::size_t> pos(axes.size(), 0);
  while (true) {
    GridCell cell;
    for (std::size_t a = 0; a < axes.size(); ++a) cell.settings.emplace_back(axes[a].key, axes[a].values[pos[a]]);
    cell.metrics = run(cell.settings);
    result.cells.push_back(std::move(cell));
    std::size_t a = axes.size();
    while (a > 0) {
      --a;
      if (++pos[a] < axes[a].values.size()) break;
      pos[a] = 0;
      if (a == 0) {
        result.best = SelectBest(result.cells);
        return result;
      }
    }
  }
}

}  // namespace cgnn
