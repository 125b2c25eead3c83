#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "cgnn/checkpoint.hpp"
#include "cgnn/config.hpp"
#include "cgnn/train.hpp"

namespace cgnn {

// A required artifact is absent; the message names the file and the command
// that produces it.
class MissingArtifactError : public Error {
 public:
  using Error::Error;
};

// File names inside a work directory.
namespace artifact {
inline constexpr char kConfig[] = "config.txt";
inline constexpr char kDataset[] = "dataset.bin";
inline constexpr char kSplit[] = "split.tsv";
inline constexpr char kVocab[] = "vocab.tsv";
inline constexpr char kPrepareReport[] = "prepare_report.tsv";
inline constexpr char kDagWeights[] = "dag_weights.txt";
inline constexpr char kDagAdjacency[] = "dag_adjacency.txt";
inline constexpr char kDagEdges[] = "dag_edges.txt";
inline constexpr char kDagReport[] = "dag_report.tsv";
inline constexpr char kUserGraph[] = "user_graph.txt";
inline constexpr char kAdGraph[] = "ad_graph.txt";
inline constexpr char kGraphReport[] = "graph_report.tsv";
inline constexpr char kEmbeddings[] = "embeddings.bin";
inline constexpr char kCheckpoint[] = "model.ckpt";
inline constexpr char kMetrics[] = "metrics.tsv";
inline constexpr char kHistory[] = "history.tsv";
inline constexpr char kGrid[] = "grid.tsv";
inline constexpr char kAblation[] = "ablation.tsv";
}  // namespace artifact

std::string ArtifactPath(const std::string& workdir, const std::string& name);

// Model variants used by ablation: "full", "no-graphfwfm" (GGNN over the
// complete field graph), "no-causality" (complete mask and its walk
// embedding), "logistic", and "subset:<branches>" with branches from
// features, users, ads joined by '+'.
struct Variant {
  std::string name;
  RunConfig config;
  bool complete_feature_graph = false;
};
Variant ApplyVariant(const RunConfig& base, const std::string& name);

// Ingests, subsamples, encodes and splits the configured dataset.
void Prepare(const RunConfig& config, const std::string& workdir, std::ostream& log);
// Fits the causal structure on training rows.
void LearnDag(const RunConfig& config, const std::string& workdir, std::ostream& log);
// User and ad similarity graphs from training interactions.
void BuildGraphs(const RunConfig& config, const std::string& workdir, std::ostream& log);
// Walk embeddings for the causal feature graph, the complete feature graph
// and the entity graphs.
void EmbedGraphs(const RunConfig& config, const std::string& workdir, std::ostream& log);

// Frozen graph inputs for a variant, loaded from the work directory.
GraphArtifacts LoadArtifacts(const RunConfig& config, const std::string& workdir, const EncodedDataset& data,
                             bool complete_feature_graph);

struct TrainOutcome {
  Metrics metrics;
  Model first_model;
};
// Trains one variant from the work directory artifacts without writing files.
TrainOutcome TrainVariant(const Variant& variant, const std::string& workdir);

// TrainVariant plus checkpoint, metric report and per-epoch history files.
Metrics TrainCommand(const RunConfig& config, const std::string& workdir, const std::string& variant,
                     std::ostream& log);
// Test metrics of a checkpoint on the work directory's test split.
Evaluation EvaluateCommand(const std::string& workdir, const std::string& checkpoint_path, std::ostream& log);
GridResult GridCommand(const RunConfig& config, const std::string& workdir, const std::vector<GridAxis>& axes,
                       std::ostream& log);
std::vector<std::pair<std::string, Metrics>> AblateCommand(const RunConfig& config, const std::string& workdir,
                                                           const std::vector<std::string>& variants,
                                                           std::ostream& log);

// Parses "key=v1,v2,..." into a grid axis.
GridAxis ParseGridAxis(const std::string& text);

}  // namespace cgnn
