#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace cgnn {

enum class FieldKind { kCategorical, kNumeric, kEntityUser, kEntityAd, kLabel };

const char* FieldKindName(FieldKind kind);
FieldKind ParseFieldKind(const std::string& text);

struct FieldSpec {
  std::string name;
  FieldKind kind = FieldKind::kCategorical;
  // Column position in the source row. For header-based formats this is
  // resolved from `column_name` when non-empty.
  std::size_t column = 0;
  std::string column_name;
};

// Ordered fields of one source. Categorical and numeric fields become model
// features (S of them); the label and optional entity fields do not.
class FieldSchema {
 public:
  FieldSchema() = default;
  explicit FieldSchema(std::vector<FieldSpec> fields);

  const std::vector<FieldSpec>& fields() const { return fields_; }
  std::size_t num_features() const;
  std::optional<std::size_t> user_field() const;
  std::optional<std::size_t> ad_field() const;
  std::size_t label_field() const;

  // "name:kind:column" entries separated by commas.
  static FieldSchema Parse(const std::string& text);
  std::string ToString() const;

 private:
  std::vector<FieldSpec> fields_;
};

enum class LabelMode { kClick, kRating };

// Criteo-style bucketing: missing -> "MISSING"; v <= 2 -> the integer itself;
// v > 2 -> floor(ln(v)^2).
std::string DiscretizeNumeric(std::optional<double> value);
std::string DiscretizeNumeric(const std::string& raw);

// Click flags pass through; ratings >= 4 map to 1.
std::uint8_t BinarizeLabel(double raw, LabelMode mode);

struct LoadReport {
  std::size_t lines_read = 0;
  std::size_t rows_loaded = 0;
  std::size_t rows_skipped = 0;
  // First few skipped lines, "path:line: reason".
  std::vector<std::string> skipped_examples;
};

// Interned string column: rows hold token ids into `tokens`.
struct RawColumn {
  std::vector<std::string> tokens;
  std::unordered_map<std::string, std::uint32_t> lookup;
  std::vector<std::uint32_t> rows;

  void Push(const std::string& token);
  const std::string& At(std::size_t row) const { return tokens[rows[row]]; }
};

// Parsed rows in schema order. `columns` has one entry per non-label field.
struct RawTable {
  FieldSchema schema;
  std::vector<std::string> column_names;
  std::vector<RawColumn> columns;
  std::vector<std::uint8_t> labels;
  LoadReport report;

  std::size_t size() const { return labels.size(); }
  // Keeps the listed rows, in the given order.
  RawTable Select(const std::vector<std::size_t>& rows) const;
};

struct LoadOptions {
  LabelMode label_mode = LabelMode::kClick;
  // Throw on the first malformed row instead of skipping it.
  bool strict = false;
  char delimiter = '\t';
  bool has_header = false;
  std::size_t max_skipped_examples = 20;
};

// Generic delimited file following `schema`.
RawTable LoadDelimited(const std::string& path, const FieldSchema& schema, const LoadOptions& options);

// Criteo: label, 13 numeric, 26 categorical, tab separated.
FieldSchema CriteoSchema();
RawTable LoadCriteo(const std::string& path, bool strict = false);

// Avazu: comma separated with header; "click" is the label, "id" is dropped.
RawTable LoadAvazu(const std::string& path, bool strict = false);

// MovieLens-1M "::" files joined on user and movie id. Features: user_id,
// movie_id, gender, age, occupation, zip, title, genres; entities: user and
// movie; label: rating.
FieldSchema MovieLensSchema();
RawTable LoadMovieLens(const std::string& dir, bool strict = false);

// One parsed ratings.dat line.
struct RatingRecord {
  std::string user;
  std::string item;
  int rating = 0;
  std::int64_t timestamp = 0;
};
std::optional<RatingRecord> ParseRatingLine(const std::string& line);

// Splits on a multi-character delimiter, keeping empty fields.
std::vector<std::string> SplitFields(const std::string& line, const std::string& delimiter);

// Per-field token -> dense index. Index 0 is reserved for unknown/rare tokens.
class Vocabulary {
 public:
  struct Field {
    std::string name;
    std::vector<std::string> tokens;  // tokens[0] is the unknown slot
    std::unordered_map<std::string, std::uint32_t> index;
  };

  Vocabulary() = default;
  explicit Vocabulary(std::vector<Field> fields);

  std::size_t num_fields() const { return fields_.size(); }
  const Field& field(std::size_t k) const { return fields_.at(k); }
  std::size_t cardinality(std::size_t k) const { return fields_.at(k).tokens.size(); }
  std::size_t total_cardinality() const;
  // Start of each field's block in a concatenated table.
  std::vector<std::size_t> offsets() const;

  std::uint32_t Encode(std::size_t k, const std::string& token) const;
  const std::string& Decode(std::size_t k, std::uint32_t index) const;

  static constexpr const char* kUnknownToken = "<unk>";

 private:
  std::vector<Field> fields_;
};

// Tokens seen fewer than `min_freq` times map to 0; the rest receive indices
// in order of first appearance.
Vocabulary BuildVocab(const RawTable& table, std::size_t min_freq);

struct EncodedDataset {
  std::vector<std::string> field_names;
  std::vector<std::size_t> cardinalities;
  std::size_t num_rows = 0;
  // Row-major [num_rows x S].
  std::vector<std::uint32_t> indices;
  std::vector<std::uint8_t> labels;
  // Dense entity ids (empty when the source has no such entity).
  std::vector<std::uint32_t> users;
  std::vector<std::uint32_t> ads;
  std::size_t num_users = 0;
  std::size_t num_ads = 0;

  std::size_t num_fields() const { return field_names.size(); }
  bool has_users() const { return !users.empty(); }
  bool has_ads() const { return !ads.empty(); }
  std::uint32_t at(std::size_t row, std::size_t field) const {
    return indices[row * num_fields() + field];
  }

  // Throws ContractError when an index or label is out of range.
  void Validate() const;
  std::uint64_t Fingerprint() const;
  EncodedDataset Select(const std::vector<std::size_t>& rows) const;

  void Save(const std::string& path) const;
  static EncodedDataset Load(const std::string& path);
};

// Entity ids are assigned densely by first appearance without a rare bucket.
EncodedDataset Encode(const RawTable& table, const Vocabulary& vocab);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

// Seeded permutation; validation and test each take floor(n / 10) rows and
// training keeps the rest.
Split MakeSplit(std::size_t n, std::uint64_t seed);

// Uniform subsample of min(cap, n) row indices in ascending order; cap 0
// keeps everything.
std::vector<std::size_t> SubsampleRows(std::size_t n, std::size_t cap, std::uint64_t seed);

void SaveSplitManifest(const std::string& path, const Split& split, std::size_t n);
Split LoadSplitManifest(const std::string& path);

void SaveVocabulary(const std::string& path, const Vocabulary& vocab);

}  // namespace cgnn
