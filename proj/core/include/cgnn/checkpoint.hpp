#pragma once

#include <cstdint>
#include <string>

#include "cgnn/config.hpp"
#include "cgnn/model.hpp"

namespace cgnn {

inline constexpr char kCheckpointMagic[] = "CGNN1";
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Test metrics recorded when the checkpoint was written.
struct RecordedMetrics {
  double test_auc = 0.0;
  double test_logloss = 0.0;
};

struct Checkpoint {
  RunConfig config;
  std::uint64_t dataset_fingerprint = 0;
  RecordedMetrics metrics;
  Model model;
};

// Layout: magic, u32 version, config text, u64 fingerprint, two f64 metrics,
// u64 field count and cardinalities, then tensor records for the parameters
// ("param/<name>") and the frozen graph inputs ("artifact/<name>").
void SaveCheckpoint(const std::string& path, const Checkpoint& checkpoint);
// Throws IngestionError on a bad magic, version or truncated file.
Checkpoint LoadCheckpoint(const std::string& path);

}  // namespace cgnn
