#include "cgnn/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "cgnn/causal.hpp"
#include "cgnn/embed.hpp"
#include "cgnn/serialize.hpp"

namespace cgnn {

namespace fs = std::filesystem;

std::string ArtifactPath(const std::string& workdir, const std::string& name) {
  return (fs::path(workdir) / name).string();
}

namespace {

std::string Require(const std::string& workdir, const char* name, const char* producer) {
  const std::string path = ArtifactPath(workdir, name);
  if (!fs::exists(path)) {
    throw MissingArtifactError("missing " + path + "; run `cgnn " + producer + "` first");
  }
  return path;
}

std::ofstream OpenOutput(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write " + path);
  out << std::setprecision(10);
  return out;
}

RawTable LoadRaw(const DataConfig& data) {
  if (data.path.empty()) throw ConfigError("data.path is not set");
  if (data.format == "criteo") return LoadCriteo(data.path, data.strict);
  if (data.format == "avazu") return LoadAvazu(data.path, data.strict);
  if (data.format == "movielens") return LoadMovieLens(data.path, data.strict);
  if (data.format == "delimited") {
    if (data.schema.empty()) throw ConfigError("data.schema is required for delimited input");
    if (data.delimiter.size() != 1) throw ConfigError("data.delimiter must be a single character");
    LoadOptions options;
    options.label_mode = data.label_mode;
    options.strict = data.strict;
    options.delimiter = data.delimiter[0];
    options.has_header = data.has_header;
    return LoadDelimited(data.path, FieldSchema::Parse(data.schema), options);
  }
  throw ConfigError("unknown data.format '" + data.format + "' (criteo, avazu, movielens, delimited)");
}

struct Prepared {
  EncodedDataset data;
  Split split;
};

Prepared LoadPrepared(const std::string& workdir) {
  Prepared p;
  p.data = EncodedDataset::Load(Require(workdir, artifact::kDataset, "prepare"));
  p.split = LoadSplitManifest(Require(workdir, artifact::kSplit, "prepare"));
  return p;
}

// Rows of the out-lists that survive the threshold, weights kept.
WeightedDigraph PrunedGraph(const WeightedDigraph& graph, double epsilon) {
  const NeighborMask mask = Prune(graph, epsilon);
  WeightedDigraph out(graph.num_nodes());
  for (std::size_t dst = 0; dst < mask.num_nodes(); ++dst) {
    for (std::size_t j = 0; j < mask.in[dst].size(); ++j) out.SetEdge(mask.in[dst][j], dst, mask.in_weight[dst][j]);
  }
  return out;
}

WalkConfig WalkFor(const RunConfig& config, std::size_t dim, std::uint64_t tag) {
  WalkConfig walk = config.walk;
  walk.dim = dim;
  walk.seed = MixSeed(config.walk.seed, tag);
  return walk;
}

std::vector<std::vector<std::uint32_t>> Exposures(const std::vector<std::uint32_t>& owners, std::size_t num_owners,
                                                  const std::vector<std::uint32_t>& items,
                                                  const std::vector<std::size_t>& rows) {
  std::vector<std::vector<std::uint32_t>> exposures(num_owners);
  for (auto r : rows) exposures[owners[r]].push_back(items[r]);
  return exposures;
}

void WriteMetricsHeader(std::ostream& out) {
  out << "variant\trun\tseed\tbest_epoch\tval_auc\tval_logloss\ttest_auc\ttest_logloss\tseconds\n";
}

void WriteMetricsRows(std::ostream& out, const std::string& variant, const Metrics& m) {
  for (std::size_t r = 0; r < m.runs.size(); ++r) {
    const RunResult& run = m.runs[r];
    out << variant << '\t' << r << '\t' << run.seed << '\t' << run.best_epoch << '\t' << run.val_auc << '\t'
        << run.val_logloss << '\t' << run.test_auc << '\t' << run.test_logloss << '\t' << run.seconds << '\n';
  }
  out << variant << "\tmean\t-\t-\t" << m.val_auc << '\t' << m.val_logloss << '\t' << m.test_auc << '\t'
      << m.test_logloss << '\t' << m.seconds << '\n';
}

}  // namespace

Variant ApplyVariant(const RunConfig& base, const std::string& name) {
  Variant v{name, base, false};
  if (name == "full") return v;
  if (name == "no-graphfwfm") {
    v.config.model.encoder = FeatureEncoder::kGgnn;
    return v;
  }
  if (name == "no-causality") {
    v.complete_feature_graph = true;
    return v;
  }
  if (name == "logistic") {
    v.config.model.kind = ModelKind::kLogistic;
    return v;
  }
  const std::string prefix = "subset:";
  if (name.rfind(prefix, 0) == 0) {
    ModelConfig& m = v.config.model;
    m.use_feature = m.use_user = m.use_ad = false;
    std::istringstream parts(name.substr(prefix.size()));
    std::string part;
    while (std::getline(parts, part, '+')) {
      if (part == "features") m.use_feature = true;
      else if (part == "users") m.use_user = true;
      else if (part == "ads") m.use_ad = true;
      else throw ConfigError("unknown branch '" + part + "' in variant " + name + " (features, users, ads)");
    }
    if (!m.use_feature && !m.use_user && !m.use_ad) {
      throw ConfigError("variant " + name + " removes every representation branch");
    }
    return v;
  }
  throw ConfigError("unknown variant '" + name + "' (full, no-graphfwfm, no-causality, logistic, subset:...)");
}

void Prepare(const RunConfig& config, const std::string& workdir, std::ostream& log) {
  fs::create_directories(workdir);
  RawTable table = LoadRaw(config.data);
  const std::size_t loaded = table.size();
  if (config.data.subsample > 0 && loaded > config.data.subsample) {
    table = table.Select(SubsampleRows(loaded, config.data.subsample, config.data.seed));
  }
  const Vocabulary vocab = BuildVocab(table, config.data.min_freq);
  const EncodedDataset data = Encode(table, vocab);
  const Split split = MakeSplit(data.num_rows, config.data.seed);
  data.Save(ArtifactPath(workdir, artifact::kDataset));
  SaveSplitManifest(ArtifactPath(workdir, artifact::kSplit), split, data.num_rows);
  SaveVocabulary(ArtifactPath(workdir, artifact::kVocab), vocab);
  SaveConfig(ArtifactPath(workdir, artifact::kConfig), config);

  auto report = OpenOutput(ArtifactPath(workdir, artifact::kPrepareReport));
  report << "key\tvalue\n"
         << "lines_read\t" << table.report.lines_read << "\n"
         << "rows_loaded\t" << loaded << "\n"
         << "rows_skipped\t" << table.report.rows_skipped << "\n"
         << "rows_kept\t" << data.num_rows << "\n"
         << "fields\t" << data.num_fields() << "\n"
         << "users\t" << data.num_users << "\n"
         << "ads\t" << data.num_ads << "\n"
         << "train\t" << split.train.size() << "\n"
         << "val\t" << split.val.size() << "\n"
         << "test\t" << split.test.size() << "\n"
         << "fingerprint\t" << data.Fingerprint() << "\n";
  for (const auto& example : table.report.skipped_examples) log << "skipped: " << example << "\n";
  log << "prepared " << data.num_rows << " rows (" << split.train.size() << " train, " << split.val.size()
      << " val, " << split.test.size() << " test), " << data.num_fields() << " fields, "
      << table.report.rows_skipped << " malformed rows skipped\n";
}

void LearnDag(const RunConfig& config, const std::string& workdir, std::ostream& log) {
  const Prepared prepared = LoadPrepared(workdir);
  const std::size_t samples =
      config.graph.causal_samples == 0 ? prepared.split.train.size() : config.graph.causal_samples;
  const CausalData causal =
      CausalDataFromDataset(prepared.data, prepared.split.train, config.graph.causal_width, samples);
  const DagFit fit = FitDag(causal, config.causal);
  SaveTextMatrix(ArtifactPath(workdir, artifact::kDagWeights), fit.weights);
  SaveTextMatrix(ArtifactPath(workdir, artifact::kDagAdjacency), fit.adjacency);
  SaveDagEdges(ArtifactPath(workdir, artifact::kDagEdges), fit.adjacency);
  std::size_t edges = 0;
  for (double v : fit.adjacency.values()) edges += v != 0.0;
  auto report = OpenOutput(ArtifactPath(workdir, artifact::kDagReport));
  report << "key\tvalue\n"
         << "samples\t" << causal.num_samples() << "\n"
         << "fields\t" << causal.num_fields << "\n"
         << "edges\t" << edges << "\n"
         << "h\t" << fit.h << "\n"
         << "converged\t" << (fit.converged ? "true" : "false") << "\n"
         << "outer_iterations\t" << fit.outer_iterations << "\n"
         << "final_rho\t" << fit.final_rho << "\n"
         << "removed_cycle_edges\t" << fit.removed_edges.size() << "\n";
  for (std::size_t i = 0; i < fit.adjacency.rows(); ++i) {
    for (std::size_t j = 0; j < fit.adjacency.cols(); ++j) {
      if (fit.adjacency.at(i, j) != 0.0) {
        log << "  " << prepared.data.field_names[i] << " -> " << prepared.data.field_names[j] << "  "
            << fit.adjacency.at(i, j) << "\n";
      }
    }
  }
  log << "learned " << edges << " causal edges over " << causal.num_fields << " fields (h = " << fit.h
      << (fit.converged ? ", converged" : ", not converged") << ")\n";
}

void BuildGraphs(const RunConfig& config, const std::string& workdir, std::ostream& log) {
  const Prepared prepared = LoadPrepared(workdir);
  const EncodedDataset& data = prepared.data;
  auto report = OpenOutput(ArtifactPath(workdir, artifact::kGraphReport));
  report << "graph\tnodes\tedges\texcluded\n";
  if (!data.has_users() || !data.has_ads()) {
    log << "dataset has no user/ad identities; entity graphs skipped\n";
    return;
  }
  const EntityGraphOptions options{config.graph.max_in_degree};
  std::size_t excluded = 0;
  const WeightedDigraph users =
      BuildEntityGraph(Exposures(data.users, data.num_users, data.ads, prepared.split.train), options, &excluded);
  users.Save(ArtifactPath(workdir, artifact::kUserGraph));
  report << "user\t" << users.num_nodes() << '\t' << users.num_edges() << '\t' << excluded << '\n';
  log << "user graph: " << users.num_nodes() << " nodes, " << users.num_edges() << " edges, " << excluded
      << " without training interactions\n";
  const WeightedDigraph ads =
      BuildEntityGraph(Exposures(data.ads, data.num_ads, data.users, prepared.split.train), options, &excluded);
  ads.Save(ArtifactPath(workdir, artifact::kAdGraph));
  report << "ad\t" << ads.num_nodes() << '\t' << ads.num_edges() << '\t' << excluded << '\n';
  log << "ad graph: " << ads.num_nodes() << " nodes, " << ads.num_edges() << " edges, " << excluded
      << " without training interactions\n";
}

void EmbedGraphs(const RunConfig& config, const std::string& workdir, std::ostream& log) {
  const Prepared prepared = LoadPrepared(workdir);
  const Tensor adjacency = LoadTextMatrix(Require(workdir, artifact::kDagAdjacency, "learn-dag"));
  const std::size_t s = prepared.data.num_fields();
  if (adjacency.rows() != s) throw ConfigError("causal adjacency does not match the dataset's field count");
  std::map<std::string, Tensor> tables;
  const WeightedDigraph causal = MaskGraph(PruneMatrix(adjacency, 0.0));
  tables["feature"] = DeepWalk(causal, WalkFor(config, config.model.feature_graph_dim, 1));
  tables["feature_complete"] = DeepWalk(MaskGraph(CompleteMask(s)), WalkFor(config, config.model.feature_graph_dim, 2));
  log << "feature graph: " << causal.num_edges() << " edges embedded in " << config.model.feature_graph_dim
      << " dims\n";
  if (prepared.data.has_users() && prepared.data.has_ads()) {
    const WeightedDigraph users = WeightedDigraph::Load(Require(workdir, artifact::kUserGraph, "build-graphs"));
    const WeightedDigraph ads = WeightedDigraph::Load(Require(workdir, artifact::kAdGraph, "build-graphs"));
    tables["user"] = DeepWalk(PrunedGraph(users, config.graph.user_epsilon), WalkFor(config, config.model.user_dim, 3));
    tables["ad"] = DeepWalk(PrunedGraph(ads, config.graph.ad_epsilon), WalkFor(config, config.model.ad_dim, 4));
    log << "entity graphs embedded: " << users.num_nodes() << " users, " << ads.num_nodes() << " ads\n";
  }
  SaveTensorFile(ArtifactPath(workdir, artifact::kEmbeddings), tables);
}

GraphArtifacts LoadArtifacts(const RunConfig& config, const std::string& workdir, const EncodedDataset& data,
                             bool complete_feature_graph) {
  GraphArtifacts a;
  if (config.model.kind == ModelKind::kLogistic) return a;
  const auto tables = LoadTensorFile(Require(workdir, artifact::kEmbeddings, "embed-graphs"));
  auto table = [&](const std::string& key) {
    auto it = tables.find(key);
    if (it == tables.end()) {
      throw MissingArtifactError("embedding table '" + key + "' missing from " +
                                 ArtifactPath(workdir, artifact::kEmbeddings) + "; rerun `cgnn embed-graphs`");
    }
    return it->second;
  };
  const std::size_t s = data.num_fields();
  if (config.model.use_feature) {
    if (complete_feature_graph) {
      a.feature_mask = CompleteMask(s);
      a.feature_embedding = table("feature_complete");
    } else {
      a.feature_mask = PruneMatrix(LoadTextMatrix(Require(workdir, artifact::kDagAdjacency, "learn-dag")), 0.0);
      a.feature_embedding = table("feature");
    }
  }
  if (config.model.use_user) {
    a.user_mask = Prune(WeightedDigraph::Load(Require(workdir, artifact::kUserGraph, "build-graphs")),
                        config.graph.user_epsilon);
    a.user_embedding = table("user");
  }
  if (config.model.use_ad) {
    a.ad_mask = Prune(WeightedDigraph::Load(Require(workdir, artifact::kAdGraph, "build-graphs")),
                      config.graph.ad_epsilon);
    a.ad_embedding = table("ad");
  }
  return a;
}

TrainOutcome TrainVariant(const Variant& variant, const std::string& workdir) {
  const Prepared prepared = LoadPrepared(workdir);
  RunConfig config = variant.config;
  if (!prepared.data.has_users()) config.model.use_user = false;
  if (!prepared.data.has_ads()) config.model.use_ad = false;
  const GraphArtifacts artifacts = LoadArtifacts(config, workdir, prepared.data, variant.complete_feature_graph);
  ModelFactory factory = [&](std::uint64_t seed) {
    ModelConfig mc = config.model;
    mc.seed = seed;
    return BuildModel(mc, prepared.data, artifacts);
  };
  TrainOutcome outcome;
  outcome.metrics = Train(factory, prepared.data, prepared.split, config.train, &outcome.first_model);
  return outcome;
}

Metrics TrainCommand(const RunConfig& config, const std::string& workdir, const std::string& variant_name,
                     std::ostream& log) {
  const Variant variant = ApplyVariant(config, variant_name);
  TrainOutcome outcome = TrainVariant(variant, workdir);
  const Metrics& m = outcome.metrics;

  const EncodedDataset data = EncodedDataset::Load(ArtifactPath(workdir, artifact::kDataset));
  Checkpoint ckpt{variant.config, data.Fingerprint(), {m.runs[0].test_auc, m.runs[0].test_logloss},
                  std::move(outcome.first_model)};
  SaveCheckpoint(ArtifactPath(workdir, artifact::kCheckpoint), ckpt);

  auto metrics = OpenOutput(ArtifactPath(workdir, artifact::kMetrics));
  WriteMetricsHeader(metrics);
  WriteMetricsRows(metrics, variant_name, m);
  auto history = OpenOutput(ArtifactPath(workdir, artifact::kHistory));
  history << "seed\tepoch\ttrain_logloss\tval_logloss\tval_auc\n";
  for (const auto& run : m.runs) {
    for (const auto& e : run.history) {
      history << run.seed << '\t' << e.epoch << '\t' << e.train_logloss << '\t' << e.val_logloss << '\t'
              << e.val_auc << '\n';
    }
  }
  log << std::setprecision(6) << variant_name << ": val AUC " << m.val_auc << ", val logloss " << m.val_logloss
      << ", test AUC " << m.test_auc << ", test logloss " << m.test_logloss << " (mean of " << m.runs.size()
      << " runs)\n";
  return m;
}

Evaluation EvaluateCommand(const std::string& workdir, const std::string& checkpoint_path, std::ostream& log) {
  const Prepared prepared = LoadPrepared(workdir);
  if (!fs::exists(checkpoint_path)) {
    throw MissingArtifactError("missing " + checkpoint_path + "; run `cgnn train` first");
  }
  const Checkpoint ckpt = LoadCheckpoint(checkpoint_path);
  if (ckpt.dataset_fingerprint != prepared.data.Fingerprint()) {
    throw ContractError("checkpoint was trained on a different dataset (fingerprint mismatch)");
  }
  if (ckpt.model.cardinalities != prepared.data.cardinalities) {
    throw ContractError("checkpoint vocabulary does not match the dataset");
  }
  const Evaluation test = Evaluate(ckpt.model, prepared.data, prepared.split.test);
  const bool same = test.auc == ckpt.metrics.test_auc && test.logloss == ckpt.metrics.test_logloss;
  log << std::setprecision(10) << "test AUC " << test.auc << ", test logloss " << test.logloss
      << (same ? " (matches the recorded training metrics)" : " (differs from the recorded training metrics)")
      << "\n";
  return test;
}

GridResult GridCommand(const RunConfig& config, const std::string& workdir, const std::vector<GridAxis>& axes,
                       std::ostream& log) {
  GridResult result = GridSearch(axes, [&](const std::vector<std::pair<std::string, std::string>>& settings) {
    RunConfig cell = config;
    for (const auto& [key, value] : settings) SetConfigValue(cell, key, value);
    const Metrics m = TrainVariant(ApplyVariant(cell, "full"), workdir).metrics;
    for (const auto& [key, value] : settings) log << key << "=" << value << " ";
    log << "-> val AUC " << m.val_auc << ", val logloss " << m.val_logloss << "\n";
    return m;
  });
  auto out = OpenOutput(ArtifactPath(workdir, artifact::kGrid));
  for (const auto& axis : axes) out << axis.key << '\t';
  out << "val_auc\tval_logloss\ttest_auc\ttest_logloss\tselected\n";
  for (std::size_t i = 0; i < result.cells.size(); ++i) {
    const GridCell& c = result.cells[i];
    for (const auto& setting : c.settings) out << setting.second << '\t';
    out << c.metrics.val_auc << '\t' << c.metrics.val_logloss << '\t' << c.metrics.test_auc << '\t'
        << c.metrics.test_logloss << '\t' << (i == result.best ? "yes" : "no") << '\n';
  }
  return result;
}

std::vector<std::pair<std::string, Metrics>> AblateCommand(const RunConfig& config, const std::string& workdir,
                                                           const std::vector<std::string>& variants,
                                                           std::ostream& log) {
  std::vector<std::pair<std::string, Metrics>> results;
  for (const auto& name : variants) {
    const Metrics m = TrainVariant(ApplyVariant(config, name), workdir).metrics;
    log << name << ": val AUC " << m.val_auc << ", test AUC " << m.test_auc << "\n";
    results.emplace_back(name, m);
  }
  auto out = OpenOutput(ArtifactPath(workdir, artifact::kAblation));
  WriteMetricsHeader(out);
  for (const auto& [name, m] : results) WriteMetricsRows(out, name, m);
  return results;
}

GridAxis ParseGridAxis(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("grid axis must look like key=v1,v2,...");
  GridAxis axis{text.substr(0, eq), {}};
  std::istringstream values(text.substr(eq + 1));
  std::string v;
  while (std::getline(values, v, ',')) {
    if (!v.empty()) axis.values.push_back(v);
  }
  if (axis.values.empty()) throw ConfigError("grid axis '" + axis.key + "' has no values");
  RunConfig probe;
  for (const auto& value : axis.values) SetConfigValue(probe, axis.key, value);
  return axis;
}

}  // namespace cgnn
