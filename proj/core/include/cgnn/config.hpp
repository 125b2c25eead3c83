#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cgnn/causal.hpp"
#include "cgnn/datasets.hpp"
#include "cgnn/embed.hpp"
#include "cgnn/graphs.hpp"
#include "cgnn/model.hpp"
#include "cgnn/train.hpp"

namespace cgnn {

struct DataConfig {
  // criteo, avazu, movielens or delimited.
  std::string format = "delimited";
  // File for criteo/avazu/delimited, directory for movielens.
  std::string path;
  // Delimited files only: "name:kind:column,..." (see FieldSchema::Parse).
  std::string schema;
  bool has_header = false;
  std::string delimiter = "\t";
  LabelMode label_mode = LabelMode::kClick;
  bool strict = false;
  // 0 keeps every row.
  std::size_t subsample = 100000;
  std::size_t min_freq = 10;
  std::uint64_t seed = 1;
};

struct GraphConfig {
  std::size_t max_in_degree = 100;
  double user_epsilon = 0.0;
  double ad_epsilon = 0.0;
  // Rows used for causal discovery (0 = all training rows).
  std::size_t causal_samples = 10000;
  std::size_t causal_width = 1;
};

// Everything a pipeline run needs, read from "key = value" text.
struct RunConfig {
  DataConfig data;
  CausalConfig causal;
  GraphConfig graph;
  WalkConfig walk;
  ModelConfig model;
  TrainConfig train;
};

// Sets one dotted key (e.g. "train.learning_rate"). Throws ConfigError on an
// unknown key or an unparsable value.
void SetConfigValue(RunConfig& config, const std::string& key, const std::string& value);
std::string GetConfigValue(const RunConfig& config, const std::string& key);
// Every accepted key, in documentation order.
std::vector<std::string> ConfigKeys();

// Lines are "key = value"; '#' starts a comment; blank lines are ignored.
RunConfig ParseConfig(const std::string& text, const std::string& origin = "<config>");
RunConfig LoadConfig(const std::string& path);
// Every key with its current value, one per line.
std::string FormatConfig(const RunConfig& config);
void SaveConfig(const std::string& path, const RunConfig& config);

}  // namespace cgnn
