#include "cgnn/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "cgnn/serialize.hpp"

namespace cgnn {

namespace {

Tensor MaskToTensor(const NeighborMask& mask) {
  const std::size_t edges = mask.num_edges();
  Tensor t({std::max<std::size_t>(edges, 1), 3});
  std::size_t row = 0;
  for (std::size_t dst = 0; dst < mask.num_nodes(); ++dst) {
    for (std::size_t j = 0; j < mask.in[dst].size(); ++j, ++row) {
      t.at(row, 0) = static_cast<double>(mask.in[dst][j]);
      t.at(row, 1) = static_cast<double>(dst);
      t.at(row, 2) = mask.in_weight[dst][j];
    }
  }
  return t;
}

NeighborMask TensorToMask(const Tensor& edges, const Tensor& header) {
  NeighborMask mask;
  const auto n = static_cast<std::size_t>(header[0]);
  const auto count = static_cast<std::size_t>(header[1]);
  mask.epsilon = header[2];
  mask.in.resize(n);
  mask.in_weight.resize(n);
  if (edges.rank() != 2 || edges.cols() != 3 || edges.rows() < count) {
    throw IngestionError("checkpoint mask record is malformed");
  }
  for (std::size_t r = 0; r < count; ++r) {
    const auto src = static_cast<std::size_t>(edges.at(r, 0));
    const auto dst = static_cast<std::size_t>(edges.at(r, 1));
    if (src >= n || dst >= n) throw IngestionError("checkpoint mask edge out of range");
    mask.in[dst].push_back(static_cast<std::uint32_t>(src));
    mask.in_weight[dst].push_back(edges.at(r, 2));
  }
  return mask;
}

void WriteMask(std::ostream& out, const std::string& name, const NeighborMask& mask) {
  const Tensor header = Tensor::Vector(
      {static_cast<double>(mask.num_nodes()), static_cast<double>(mask.num_edges()), mask.epsilon});
  WriteTensorRecord(out, "artifact/" + name + ".header", header);
  WriteTensorRecord(out, "artifact/" + name + ".edges", MaskToTensor(mask));
}

void WriteF64(std::ostream& out, double v) { WriteU64(out, std::bit_cast<std::uint64_t>(v)); }
double ReadF64(std::istream& in) { return std::bit_cast<double>(ReadU64(in)); }

}  // namespace

void SaveCheckpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError("cannot write checkpoint " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic) - 1);
  WriteU32(out, kCheckpointVersion);
  RunConfig config = ckpt.config;
  config.model = ckpt.model.config;
  WriteString(out, FormatConfig(config));
  WriteU64(out, ckpt.dataset_fingerprint);
  WriteF64(out, ckpt.metrics.test_auc);
  WriteF64(out, ckpt.metrics.test_logloss);
  const Model& m = ckpt.model;
  WriteU64(out, m.cardinalities.size());
  for (auto c : m.cardinalities) WriteU64(out, c);
  for (const auto& [name, value] : m.params.items()) WriteTensorRecord(out, "param/" + name, value);
  const GraphArtifacts& a = m.artifacts;
  if (m.config.kind == ModelKind::kCausalGnn) {
    if (m.config.use_feature) {
      WriteMask(out, "feature_mask", a.feature_mask);
      WriteTensorRecord(out, "artifact/feature_embedding", a.feature_embedding);
    }
    if (m.config.use_user) {
      WriteMask(out, "user_mask", a.user_mask);
      WriteTensorRecord(out, "artifact/user_embedding", a.user_embedding);
    }
    if (m.config.use_ad) {
      WriteMask(out, "ad_mask", a.ad_mask);
      WriteTensorRecord(out, "artifact/ad_embedding", a.ad_embedding);
    }
  }
  if (!out) throw IngestionError("failed writing checkpoint " + path);
}

Checkpoint LoadCheckpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot read checkpoint " + path);
  char magic[sizeof(kCheckpointMagic) - 1] = {};
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw IngestionError(path + " is not a checkpoint (bad magic)");
  }
  const std::uint32_t version = ReadU32(in);
  if (version != kCheckpointVersion) {
    throw IngestionError(path + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.config = ParseConfig(ReadString(in), path);
  ckpt.dataset_fingerprint = ReadU64(in);
  ckpt.metrics.test_auc = ReadF64(in);
  ckpt.metrics.test_logloss = ReadF64(in);
  Model& m = ckpt.model;
  m.config = ckpt.config.model;
  m.cardinalities.resize(ReadU64(in));
  for (auto& c : m.cardinalities) c = ReadU64(in);

  std::map<std::string, Tensor> artifacts;
  std::string name;
  Tensor value;
  while (ReadTensorRecord(in, name, value)) {
    if (name.rfind("param/", 0) == 0) {
      m.params.Add(name.substr(6), value);
    } else if (name.rfind("artifact/", 0) == 0) {
      artifacts[name.substr(9)] = value;
    } else {
      throw IngestionError(path + ": unexpected record '" + name + "'");
    }
  }
  auto take = [&](const std::string& key) -> const Tensor& {
    auto it = artifacts.find(key);
    if (it == artifacts.end()) throw IngestionError(path + ": missing record '" + key + "'");
    return it->second;
  };
  GraphArtifacts& a = m.artifacts;
  if (m.config.kind == ModelKind::kCausalGnn) {
    if (m.config.use_feature) {
      a.feature_mask = TensorToMask(take("feature_mask.edges"), take("feature_mask.header"));
      a.feature_embedding = take("feature_embedding");
    }
    if (m.config.use_user) {
      a.user_mask = TensorToMask(take("user_mask.edges"), take("user_mask.header"));
      a.user_embedding = take("user_embedding");
    }
    if (m.config.use_ad) {
      a.ad_mask = TensorToMask(take("ad_mask.edges"), take("ad_mask.header"));
      a.ad_embedding = take("ad_embedding");
    }
  }
  return ckpt;
}

}  // namespace cgnn
