#include "cgnn/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "cgnn/serialize.hpp"
#include "cgnn/tensor.hpp"

namespace cgnn {

namespace {

std::string Trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::optional<double> ParseDouble(const std::string& raw) {
  const std::string s = Trim(raw);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

// Collects per-row parse failures, throwing in strict mode.
class RowErrors {
 public:
  RowErrors(const std::string& path, const LoadOptions& options, LoadReport& report)
      : path_(path), options_(options), report_(report) {}

  void Skip(std::size_t line, const std::string& reason) {
    const std::string message = path_ + ":" + std::to_string(line) + ": " + reason;
    if (options_.strict) throw IngestionError(message);
    ++report_.rows_skipped;
    if (report_.skipped_examples.size() < options_.max_skipped_examples) {
      report_.skipped_examples.push_back(message);
    }
  }

 private:
  const std::string& path_;
  const LoadOptions& options_;
  LoadReport& report_;
};

RawTable EmptyTableFor(const FieldSchema& schema) {
  RawTable table;
  table.schema = schema;
  for (const auto& f : schema.fields()) {
    if (f.kind == FieldKind::kLabel) continue;
    table.column_names.push_back(f.name);
    table.columns.emplace_back();
  }
  return table;
}

// Appends one row given its raw column values; returns an error reason or an
// empty string.
std::string AppendRow(RawTable& table, const std::vector<std::string>& cells,
                      LabelMode label_mode) {
  const auto& fields = table.schema.fields();
  std::size_t max_column = 0;
  for (const auto& f : fields) max_column = std::max(max_column, f.column);
  if (cells.size() <= max_column) {
    return "expected at least " + std::to_string(max_column + 1) + " columns, found " +
           std::to_string(cells.size());
  }
  const auto& label_spec = fields[table.schema.label_field()];
  const auto label_value = ParseDouble(cells[label_spec.column]);
  if (!label_value) return "unparseable label '" + cells[label_spec.column] + "'";
  std::uint8_t label = 0;
  try {
    label = BinarizeLabel(*label_value, label_mode);
  } catch (const IngestionError& e) {
    return e.what();
  }
  std::vector<std::string> tokens;
  tokens.reserve(table.columns.size());
  for (const auto& f : fields) {
    if (f.kind == FieldKind::kLabel) continue;
    const std::string& cell = cells[f.column];
    if (f.kind == FieldKind::kNumeric) {
      tokens.push_back(DiscretizeNumeric(cell));
    } else {
      std::string token = Trim(cell);
      if ((f.kind == FieldKind::kEntityUser || f.kind == FieldKind::kEntityAd) && token.empty()) {
        return "empty entity id in column " + std::to_string(f.column);
      }
      tokens.push_back(std::move(token));
    }
  }
  for (std::size_t i = 0; i < tokens.size(); ++i) table.columns[i].Push(tokens[i]);
  table.labels.push_back(label);
  return {};
}

std::vector<std::string> SplitChar(const std::string& line, char delimiter) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delimiter, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string StripCr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

const char* FieldKindName(FieldKind kind) {
  switch (kind) {
    case FieldKind::kCategorical: return "categorical";
    case FieldKind::kNumeric: return "numeric";
    case FieldKind::kEntityUser: return "entity-user";
    case FieldKind::kEntityAd: return "entity-ad";
    case FieldKind::kLabel: return "label";
  }
  return "?";
}

FieldKind ParseFieldKind(const std::string& text) {
  for (auto kind : {FieldKind::kCategorical, FieldKind::kNumeric, FieldKind::kEntityUser,
                    FieldKind::kEntityAd, FieldKind::kLabel}) {
    if (text == FieldKindName(kind)) return kind;
  }
  throw ConfigError("unknown field kind '" + text + "'");
}

FieldSchema::FieldSchema(std::vector<FieldSpec> fields) : fields_(std::move(fields)) {
  std::size_t labels = 0, users = 0, ads = 0;
  for (const auto& f : fields_) {
    labels += f.kind == FieldKind::kLabel;
    users += f.kind == FieldKind::kEntityUser;
    ads += f.kind == FieldKind::kEntityAd;
  }
  if (labels != 1) throw ConfigError("schema must have exactly one label field");
  if (users > 1 || ads > 1) throw ConfigError("schema allows at most one entity-user and one entity-ad field");
  if (num_features() == 0) throw ConfigError("schema has no feature fields");
}

std::size_t FieldSchema::num_features() const {
  return static_cast<std::size_t>(std::count_if(fields_.begin(), fields_.end(), [](const FieldSpec& f) {
    return f.kind == FieldKind::kCategorical || f.kind == FieldKind::kNumeric;
  }));
}

namespace {

std::optional<std::size_t> FindKind(const std::vector<FieldSpec>& fields, FieldKind kind) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (fields[i].kind == kind) return i;
  }
  return std::nullopt;
}

}  // namespace

std::optional<std::size_t> FieldSchema::user_field() const { return FindKind(fields_, FieldKind::kEntityUser); }
std::optional<std::size_t> FieldSchema::ad_field() const { return FindKind(fields_, FieldKind::kEntityAd); }
std::size_t FieldSchema::label_field() const { return *FindKind(fields_, FieldKind::kLabel); }

FieldSchema FieldSchema::Parse(const std::string& text) {
  std::vector<FieldSpec> fields;
  for (const auto& entry : SplitChar(text, ',')) {
    const std::string e = Trim(entry);
    if (e.empty()) continue;
    const auto parts = SplitChar(e, ':');
    if (parts.size() != 3) throw ConfigError("schema entry '" + e + "' is not name:kind:column");
    FieldSpec spec;
    spec.name = Trim(parts[0]);
    spec.kind = ParseFieldKind(Trim(parts[1]));
    const std::string col = Trim(parts[2]);
    std::size_t index = 0;
    auto [ptr, ec] = std::from_chars(col.data(), col.data() + col.size(), index);
    if (ec == std::errc() && ptr == col.data() + col.size()) {
      spec.column = index;
    } else {
      spec.column_name = col;
    }
    fields.push_back(std::move(spec));
  }
  return FieldSchema(std::move(fields));
}

std::string FieldSchema::ToString() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    if (i) os << ',';
    const auto& f = fields_[i];
    os << f.name << ':' << FieldKindName(f.kind) << ':';
    if (f.column_name.empty()) {
      os << f.column;
    } else {
      os << f.column_name;
    }
  }
  return os.str();
}

std::string DiscretizeNumeric(std::optional<double> value) {
  if (!value) return "MISSING";
  const double v = *value;
  if (v <= 2.0) return std::to_string(static_cast<long long>(std::floor(v)));
  const double l = std::log(v);
  return std::to_string(static_cast<long long>(std::floor(l * l)));
}

std::string DiscretizeNumeric(const std::string& raw) { return DiscretizeNumeric(ParseDouble(raw)); }

std::uint8_t BinarizeLabel(double raw, LabelMode mode) {
  if (mode == LabelMode::kClick) {
    if (raw == 0.0) return 0;
    if (raw == 1.0) return 1;
    throw IngestionError("click label must be 0 or 1, got " + std::to_string(raw));
  }
  if (raw < 1.0 || raw > 5.0 || raw != std::floor(raw)) {
    throw IngestionError("rating out of range 1-5: " + std::to_string(raw));
  }
  return raw >= 4.0 ? 1 : 0;
}

void RawColumn::Push(const std::string& token) {
  auto [it, inserted] = lookup.try_emplace(token, static_cast<std::uint32_t>(tokens.size()));
  if (inserted) tokens.push_back(token);
  rows.push_back(it->second);
}

RawTable RawTable::Select(const std::vector<std::size_t>& rows) const {
  RawTable out = EmptyTableFor(schema);
  out.report = report;
  out.labels.reserve(rows.size());
  for (std::size_t r : rows) {
    if (r >= size()) throw ContractError("row " + std::to_string(r) + " out of range");
    for (std::size_t c = 0; c < columns.size(); ++c) out.columns[c].Push(columns[c].At(r));
    out.labels.push_back(labels[r]);
  }
  return out;
}

RawTable LoadDelimited(const std::string& path, const FieldSchema& schema_in, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path);
  FieldSchema schema = schema_in;
  std::string line;
  std::size_t line_no = 0;
  if (options.has_header) {
    if (!std::getline(in, line)) return EmptyTableFor(schema);
    ++line_no;
    const auto header = SplitChar(StripCr(line), options.delimiter);
    std::vector<FieldSpec> resolved = schema.fields();
    for (auto& f : resolved) {
      if (f.column_name.empty()) continue;
      const auto it = std::find(header.begin(), header.end(), f.column_name);
      if (it == header.end()) throw IngestionError(path + ": header has no column '" + f.column_name + "'");
      f.column = static_cast<std::size_t>(it - header.begin());
    }
    schema = FieldSchema(std::move(resolved));
  } else {
    for (const auto& f : schema.fields()) {
      if (!f.column_name.empty()) throw ConfigError("named column '" + f.column_name + "' needs a header");
    }
  }
  RawTable table = EmptyTableFor(schema);
  RowErrors errors(path, options, table.report);
  while (std::getline(in, line)) {
    ++line_no;
    line = StripCr(line);
    if (line.empty()) continue;
    ++table.report.lines_read;
    const std::string reason = AppendRow(table, SplitChar(line, options.delimiter), options.label_mode);
    if (!reason.empty()) errors.Skip(line_no, reason);
  }
  table.report.rows_loaded = table.size();
  return table;
}

FieldSchema CriteoSchema() {
  std::vector<FieldSpec> fields;
  fields.push_back({"label", FieldKind::kLabel, 0, ""});
  for (std::size_t i = 1; i <= 13; ++i) fields.push_back({"I" + std::to_string(i), FieldKind::kNumeric, i, ""});
  for (std::size_t i = 1; i <= 26; ++i) fields.push_back({"C" + std::to_string(i), FieldKind::kCategorical, 13 + i, ""});
  return FieldSchema(std::move(fields));
}

RawTable LoadCriteo(const std::string& path, bool strict) {
  LoadOptions options;
  options.strict = strict;
  options.delimiter = '\t';
  return LoadDelimited(path, CriteoSchema(), options);
}

RawTable LoadAvazu(const std::string& path, bool strict) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path);
  std::string header;
  if (!std::getline(in, header)) throw IngestionError(path + ": missing header");
  std::vector<FieldSpec> fields;
  for (const auto& name : SplitChar(StripCr(header), ',')) {
    if (name == "id") continue;
    fields.push_back({name, name == "click" ? FieldKind::kLabel : FieldKind::kCategorical, 0, name});
  }
  LoadOptions options;
  options.strict = strict;
  options.delimiter = ',';
  options.has_header = true;
  return LoadDelimited(path, FieldSchema(std::move(fields)), options);
}

std::vector<std::string> SplitFields(const std::string& line, const std::string& delimiter) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delimiter, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + delimiter.size();
  }
  return out;
}

std::optional<RatingRecord> ParseRatingLine(const std::string& raw) {
  const auto parts = SplitFields(StripCr(raw), "::");
  if (parts.size() != 4) return std::nullopt;
  RatingRecord rec;
  rec.user = Trim(parts[0]);
  rec.item = Trim(parts[1]);
  if (rec.user.empty() || rec.item.empty()) return std::nullopt;
  const std::string r = Trim(parts[2]);
  const std::string t = Trim(parts[3]);
  auto [p1, e1] = std::from_chars(r.data(), r.data() + r.size(), rec.rating);
  auto [p2, e2] = std::from_chars(t.data(), t.data() + t.size(), rec.timestamp);
  if (e1 != std::errc() || p1 != r.data() + r.size() || e2 != std::errc() || p2 != t.data() + t.size()) {
    return std::nullopt;
  }
  return rec;
}

FieldSchema MovieLensSchema() {
  // Columns of the joined row: user, movie, rating, timestamp, gender, age,
  // occupation, zip, title, genres.
  return FieldSchema({
      {"user_id", FieldKind::kCategorical, 0, ""},
      {"movie_id", FieldKind::kCategorical, 1, ""},
      {"gender", FieldKind::kCategorical, 4, ""},
      {"age", FieldKind::kCategorical, 5, ""},
      {"occupation", FieldKind::kCategorical, 6, ""},
      {"zip", FieldKind::kCategorical, 7, ""},
      {"title", FieldKind::kCategorical, 8, ""},
      {"genres", FieldKind::kCategorical, 9, ""},
      {"user", FieldKind::kEntityUser, 0, ""},
      {"movie", FieldKind::kEntityAd, 1, ""},
      {"rating", FieldKind::kLabel, 2, ""},
  });
}

RawTable LoadMovieLens(const std::string& dir, bool strict) {
  LoadOptions options;
  options.strict = strict;
  options.label_mode = LabelMode::kRating;

  auto read_side = [&](const std::string& name, std::size_t width, LoadReport& report) {
    const std::string path = dir + "/" + name;
    std::ifstream in(path);
    if (!in) throw IngestionError("cannot open " + path);
    std::unordered_map<std::string, std::vector<std::string>> rows;
    RowErrors errors(path, options, report);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      line = StripCr(line);
      if (line.empty()) continue;
      auto parts = SplitFields(line, "::");
      if (parts.size() != width) {
        errors.Skip(line_no, "expected " + std::to_string(width) + " fields, found " + std::to_string(parts.size()));
        continue;
      }
      std::string key = Trim(parts[0]);
      parts.erase(parts.begin());
      rows.emplace(std::move(key), std::move(parts));
    }
    return rows;
  };

  RawTable table = EmptyTableFor(MovieLensSchema());
  const auto users = read_side("users.dat", 5, table.report);
  const auto movies = read_side("movies.dat", 3, table.report);

  const std::string path = dir + "/ratings.dat";
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path);
  RowErrors errors(path, options, table.report);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = StripCr(line);
    if (line.empty()) continue;
    ++table.report.lines_read;
    const auto rec = ParseRatingLine(line);
    if (!rec) {
      errors.Skip(line_no, "malformed rating line");
      continue;
    }
    const auto u = users.find(rec->user);
    const auto m = movies.find(rec->item);
    if (u == users.end() || m == movies.end()) {
      errors.Skip(line_no, u == users.end() ? "unknown user " + rec->user : "unknown movie " + rec->item);
      continue;
    }
    std::vector<std::string> cells = {rec->user, rec->item, std::to_string(rec->rating),
                                      std::to_string(rec->timestamp)};
    cells.insert(cells.end(), u->second.begin(), u->second.end());
    cells.insert(cells.end(), m->second.begin(), m->second.end());
    const std::string reason = AppendRow(table, cells, options.label_mode);
    if (!reason.empty()) errors.Skip(line_no, reason);
  }
  table.report.rows_loaded = table.size();
  return table;
}

Vocabulary::Vocabulary(std::vector<Field> fields) : fields_(std::move(fields)) {}

std::size_t Vocabulary::total_cardinality() const {
  std::size_t n = 0;
  for (const auto& f : fields_) n += f.tokens.size();
  return n;
}

std::vector<std::size_t> Vocabulary::offsets() const {
  std::vector<std::size_t> out(fields_.size());
  std::size_t acc = 0;
  for (std::size_t k = 0; k < fields_.size(); ++k) {
    out[k] = acc;
    acc += fields_[k].tokens.size();
  }
  return out;
}

std::uint32_t Vocabulary::Encode(std::size_t k, const std::string& token) const {
  const auto& f = fields_.at(k);
  const auto it = f.index.find(token);
  return it == f.index.end() ? 0 : it->second;
}

const std::string& Vocabulary::Decode(std::size_t k, std::uint32_t index) const {
  const auto& f = fields_.at(k);
  if (index >= f.tokens.size()) throw ContractError("vocabulary index out of range for field " + f.name);
  return f.tokens[index];
}

Vocabulary BuildVocab(const RawTable& table, std::size_t min_freq) {
  std::vector<Vocabulary::Field> fields;
  const auto& specs = table.schema.fields();
  std::size_t column = 0;
  for (const auto& spec : specs) {
    if (spec.kind == FieldKind::kLabel) continue;
    const RawColumn& raw = table.columns[column++];
    if (spec.kind != FieldKind::kCategorical && spec.kind != FieldKind::kNumeric) continue;
    std::vector<std::size_t> counts(raw.tokens.size(), 0);
    for (auto id : raw.rows) ++counts[id];
    Vocabulary::Field field;
    field.name = spec.name;
    field.tokens.push_back(Vocabulary::kUnknownToken);
    // Interned ids are already in order of first appearance.
    for (std::size_t id = 0; id < raw.tokens.size(); ++id) {
      if (counts[id] < std::max<std::size_t>(min_freq, 1)) continue;
      field.index.emplace(raw.tokens[id], static_cast<std::uint32_t>(field.tokens.size()));
      field.tokens.push_back(raw.tokens[id]);
    }
    fields.push_back(std::move(field));
  }
  return Vocabulary(std::move(fields));
}

void EncodedDataset::Validate() const {
  const std::size_t s = num_fields();
  if (indices.size() != num_rows * s || labels.size() != num_rows) {
    throw ContractError("encoded dataset arrays do not match row count");
  }
  for (std::size_t r = 0; r < num_rows; ++r) {
    for (std::size_t k = 0; k < s; ++k) {
      if (indices[r * s + k] >= cardinalities[k]) {
        throw ContractError("row " + std::to_string(r) + " field " + field_names[k] + " index out of range");
      }
    }
    if (labels[r] > 1) throw ContractError("label at row " + std::to_string(r) + " is not 0/1");
  }
  if (has_users() && users.size() != num_rows) throw ContractError("user id count mismatch");
  if (has_ads() && ads.size() != num_rows) throw ContractError("ad id count mismatch");
  for (auto u : users) {
    if (u >= num_users) throw ContractError("user id out of range");
  }
  for (auto a : ads) {
    if (a >= num_ads) throw ContractError("ad id out of range");
  }
}

std::uint64_t EncodedDataset::Fingerprint() const {
  std::uint64_t h = Fnv1a(&num_rows, sizeof num_rows);
  for (const auto& name : field_names) h = Fnv1a(name.data(), name.size(), h);
  for (auto c : cardinalities) h = Fnv1a(&c, sizeof c, h);
  h = Fnv1a(indices.data(), indices.size() * sizeof(std::uint32_t), h);
  h = Fnv1a(labels.data(), labels.size(), h);
  h = Fnv1a(users.data(), users.size() * sizeof(std::uint32_t), h);
  h = Fnv1a(ads.data(), ads.size() * sizeof(std::uint32_t), h);
  return h;
}

EncodedDataset EncodedDataset::Select(const std::vector<std::size_t>& rows) const {
  EncodedDataset out;
  out.field_names = field_names;
  out.cardinalities = cardinalities;
  out.num_users = num_users;
  out.num_ads = num_ads;
  out.num_rows = rows.size();
  const std::size_t s = num_fields();
  out.indices.reserve(rows.size() * s);
  for (std::size_t r : rows) {
    if (r >= num_rows) throw ContractError("row " + std::to_string(r) + " out of range");
    out.indices.insert(out.indices.end(), indices.begin() + static_cast<std::ptrdiff_t>(r * s),
                       indices.begin() + static_cast<std::ptrdiff_t>((r + 1) * s));
    out.labels.push_back(labels[r]);
    if (has_users()) out.users.push_back(users[r]);
    if (has_ads()) out.ads.push_back(ads[r]);
  }
  return out;
}

namespace {

constexpr char kDatasetMagic[] = "CGNNDATA1";

template <typename T>
void WriteVector(std::ostream& out, const std::vector<T>& v) {
  WriteU64(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <typename T>
std::vector<T> ReadVector(std::istream& in) {
  const std::uint64_t n = ReadU64(in);
  if (n > (1ULL << 34)) throw IngestionError("implausible array length in dataset file");
  std::vector<T> v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
  if (!in) throw IngestionError("truncated dataset file");
  return v;
}

}  // namespace

void EncodedDataset::Save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError("cannot write " + path);
  WriteString(out, kDatasetMagic);
  WriteU64(out, num_rows);
  WriteU64(out, field_names.size());
  for (std::size_t k = 0; k < field_names.size(); ++k) {
    WriteString(out, field_names[k]);
    WriteU64(out, cardinalities[k]);
  }
  WriteU64(out, num_users);
  WriteU64(out, num_ads);
  WriteVector(out, indices);
  WriteVector(out, labels);
  WriteVector(out, users);
  WriteVector(out, ads);
}

EncodedDataset EncodedDataset::Load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot read " + path);
  if (ReadString(in) != kDatasetMagic) throw IngestionError(path + " is not an encoded dataset");
  EncodedDataset d;
  d.num_rows = ReadU64(in);
  const std::uint64_t s = ReadU64(in);
  for (std::uint64_t k = 0; k < s; ++k) {
    d.field_names.push_back(ReadString(in));
    d.cardinalities.push_back(ReadU64(in));
  }
  d.num_users = ReadU64(in);
  d.num_ads = ReadU64(in);
  d.indices = ReadVector<std::uint32_t>(in);
  d.labels = ReadVector<std::uint8_t>(in);
  d.users = ReadVector<std::uint32_t>(in);
  d.ads = ReadVector<std::uint32_t>(in);
  d.Validate();
  return d;
}

EncodedDataset Encode(const RawTable& table, const Vocabulary& vocab) {
  EncodedDataset d;
  const std::size_t s = vocab.num_fields();
  for (std::size_t k = 0; k < s; ++k) {
    d.field_names.push_back(vocab.field(k).name);
    d.cardinalities.push_back(vocab.cardinality(k));
  }
  d.num_rows = table.size();
  d.indices.resize(d.num_rows * s);
  d.labels = table.labels;

  std::size_t column = 0, feature = 0;
  for (const auto& spec : table.schema.fields()) {
    if (spec.kind == FieldKind::kLabel) continue;
    const RawColumn& raw = table.columns[column++];
    if (spec.kind == FieldKind::kCategorical || spec.kind == FieldKind::kNumeric) {
      std::vector<std::uint32_t> code(raw.tokens.size());
      for (std::size_t id = 0; id < raw.tokens.size(); ++id) code[id] = vocab.Encode(feature, raw.tokens[id]);
      for (std::size_t r = 0; r < d.num_rows; ++r) d.indices[r * s + feature] = code[raw.rows[r]];
      ++feature;
    } else {
      // Interned ids are dense in first-appearance order already.
      auto& ids = spec.kind == FieldKind::kEntityUser ? d.users : d.ads;
      ids.assign(raw.rows.begin(), raw.rows.end());
      (spec.kind == FieldKind::kEntityUser ? d.num_users : d.num_ads) = raw.tokens.size();
    }
  }
  d.Validate();
  return d;
}

Split MakeSplit(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(perm[i - 1], perm[pick(rng)]);
  }
  const std::size_t n_val = n / 10;
  const std::size_t n_test = n / 10;
  const std::size_t n_train = n - n_val - n_test;
  Split s;
  s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
               perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), perm.end());
  for (auto* part : {&s.train, &s.val, &s.test}) std::sort(part->begin(), part->end());
  return s;
}

std::vector<std::size_t> SubsampleRows(std::size_t n, std::size_t cap, std::uint64_t seed) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  if (cap == 0 || cap >= n) return rows;
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first `cap` slots become a uniform sample.
  for (std::size_t i = 0; i < cap; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(rows[i], rows[pick(rng)]);
  }
  rows.resize(cap);
  std::sort(rows.begin(), rows.end());
  return rows;
}

void SaveSplitManifest(const std::string& path, const Split& split, std::size_t n) {
  std::vector<const char*> tag(n, nullptr);
  for (auto r : split.train) tag.at(r) = "train";
  for (auto r : split.val) tag.at(r) = "val";
  for (auto r : split.test) tag.at(r) = "test";
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write " + path);
  out << "row\tsplit\n";
  for (std::size_t r = 0; r < n; ++r) {
    if (!tag[r]) throw ContractError("split does not cover row " + std::to_string(r));
    out << r << '\t' << tag[r] << '\n';
  }
}

Split LoadSplitManifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot read " + path);
  std::string line;
  std::getline(in, line);
  Split s;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::size_t row = 0;
    std::string tag;
    if (!(ls >> row >> tag)) throw IngestionError(path + ":" + std::to_string(line_no) + ": malformed manifest row");
    if (tag == "train") {
      s.train.push_back(row);
    } else if (tag == "val") {
      s.val.push_back(row);
    } else if (tag == "test") {
      s.test.push_back(row);
    } else {
      throw IngestionError(path + ":" + std::to_string(line_no) + ": unknown split '" + tag + "'");
    }
  }
  return s;
}

void SaveVocabulary(const std::string& path, const Vocabulary& vocab) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write " + path);
  out << "field\tindex\ttoken\n";
  for (std::size_t k = 0; k < vocab.num_fields(); ++k) {
    const auto& f = vocab.field(k);
    for (std::size_t i = 0; i < f.tokens.size(); ++i) out << f.name << '\t' << i << '\t' << f.tokens[i] << '\n';
  }
}

}  // namespace cgnn
