#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cgnn/pipeline.hpp"

namespace {

struct CommonOptions {
  std::string workdir = "work";
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<double> learning_rate;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> max_epochs;
  std::optional<std::size_t> patience;
  std::optional<std::size_t> repetitions;
  std::optional<std::uint64_t> seed;
};

void AddCommon(CLI::App* cmd, CommonOptions& o, bool train_flags) {
  cmd->add_option("-w,--workdir", o.workdir, "Directory holding pipeline artifacts")->capture_default_str();
  cmd->add_option("-c,--config", o.config_path,
                  "Config file (key = value lines); defaults to <workdir>/config.txt when present");
  cmd->add_option("-s,--set", o.overrides, "Override a config key, e.g. --set model.heads=4");
  if (train_flags) {
    cmd->add_option("--learning-rate", o.learning_rate, "train.learning_rate");
    cmd->add_option("--batch-size", o.batch_size, "train.batch_size");
    cmd->add_option("--epochs", o.max_epochs, "train.max_epochs");
    cmd->add_option("--patience", o.patience, "train.patience");
    cmd->add_option("--repetitions", o.repetitions, "train.repetitions");
    cmd->add_option("--seed", o.seed, "train.seed");
  }
}

// Explicit --config wins; otherwise the config saved by `prepare` is reused.
cgnn::RunConfig ResolveConfig(const CommonOptions& o) {
  cgnn::RunConfig config;
  const std::string saved = cgnn::ArtifactPath(o.workdir, cgnn::artifact::kConfig);
  if (!o.config_path.empty()) {
    config = cgnn::LoadConfig(o.config_path);
  } else if (std::filesystem::exists(saved)) {
    config = cgnn::LoadConfig(saved);
  }
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw cgnn::ConfigError("--set expects key=value, got '" + kv + "'");
    cgnn::SetConfigValue(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.learning_rate) config.train.learning_rate = *o.learning_rate;
  if (o.batch_size) config.train.batch_size = *o.batch_size;
  if (o.max_epochs) config.train.max_epochs = *o.max_epochs;
  if (o.patience) config.train.patience = *o.patience;
  if (o.repetitions) config.train.repetitions = *o.repetitions;
  if (o.seed) config.train.seed = *o.seed;
  config.train.Validate();
  config.walk.Validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal-GNN click-through-rate pipeline"};
  app.require_subcommand(1);

  CommonOptions common;
  std::string variant = "full";
  std::string checkpoint;
  std::vector<std::string> axes;
  std::vector<std::string> variants{"full", "no-causality", "no-graphfwfm", "logistic"};

  auto* prepare = app.add_subcommand("prepare", "Ingest, encode and split a dataset");
  AddCommon(prepare, common, false);
  auto* learn = app.add_subcommand("learn-dag", "Fit the causal graph over feature fields");
  AddCommon(learn, common, false);
  auto* graphs = app.add_subcommand("build-graphs", "Build user and ad similarity graphs");
  AddCommon(graphs, common, false);
  auto* embed = app.add_subcommand("embed-graphs", "Learn random-walk embeddings for every graph");
  AddCommon(embed, common, false);
  auto* train = app.add_subcommand("train", "Train a model variant and write a checkpoint");
  AddCommon(train, common, true);
  train->add_option("--variant", variant, "full, no-graphfwfm, no-causality, logistic, subset:features+users+ads")
      ->capture_default_str();
  auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint on the test split");
  evaluate->add_option("-w,--workdir", common.workdir, "Directory holding pipeline artifacts")->capture_default_str();
  evaluate->add_option("--checkpoint", checkpoint, "Checkpoint path (default <workdir>/model.ckpt)");
  auto* grid = app.add_subcommand("grid", "Grid search over config keys");
  AddCommon(grid, common, true);
  grid->add_option("--axis", axes, "Axis as key=v1,v2,... (repeatable)")->required();
  auto* ablate = app.add_subcommand("ablate", "Train several variants on identical splits and seeds");
  AddCommon(ablate, common, true);
  ablate->add_option("--variants", variants, "Variants to compare")->delimiter(',')->capture_default_str();
  auto* show = app.add_subcommand("show-config", "Print the effective configuration");
  AddCommon(show, common, true);

  CLI11_PARSE(app, argc, argv);

  try {
    std::ostream& log = std::cerr;
    if (*evaluate) {
      if (checkpoint.empty()) checkpoint = cgnn::ArtifactPath(common.workdir, cgnn::artifact::kCheckpoint);
      const cgnn::Evaluation e = cgnn::EvaluateCommand(common.workdir, checkpoint, log);
      std::cout << "metric\tvalue\ntest_auc\t" << e.auc << "\ntest_logloss\t" << e.logloss << "\n";
      return 0;
    }
    const cgnn::RunConfig config = ResolveConfig(common);
    if (*show) {
      std::cout << cgnn::FormatConfig(config);
    } else if (*prepare) {
      cgnn::Prepare(config, common.workdir, log);
    } else if (*learn) {
      cgnn::LearnDag(config, common.workdir, log);
    } else if (*graphs) {
      cgnn::BuildGraphs(config, common.workdir, log);
    } else if (*embed) {
      cgnn::EmbedGraphs(config, common.workdir, log);
    } else if (*train) {
      const cgnn::Metrics m = cgnn::TrainCommand(config, common.workdir, variant, log);
      std::cout << "metric\tvalue\nval_auc\t" << m.val_auc << "\nval_logloss\t" << m.val_logloss << "\ntest_auc\t"
                << m.test_auc << "\ntest_logloss\t" << m.test_logloss << "\n";
    } else if (*grid) {
      std::vector<cgnn::GridAxis> parsed;
      for (const auto& a : axes) parsed.push_back(cgnn::ParseGridAxis(a));
      const cgnn::GridResult r = cgnn::GridCommand(config, common.workdir, parsed, log);
      std::cout << "selected";
      for (const auto& [key, value] : r.cells[r.best].settings) std::cout << '\t' << key << '=' << value;
      std::cout << "\tval_auc=" << r.cells[r.best].metrics.val_auc << "\n";
    } else if (*ablate) {
      const auto results = cgnn::AblateCommand(config, common.workdir, variants, log);
      std::cout << "variant\tval_auc\ttest_auc\ttest_logloss\n";
      for (const auto& [name, m] : results) {
        std::cout << name << '\t' << m.val_auc << '\t' << m.test_auc << '\t' << m.test_logloss << "\n";
      }
    }
  } catch (const cgnn::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
