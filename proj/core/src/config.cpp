#include "cgnn/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace cgnn {

namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void BadValue(const std::string& key, const std::string& value, const char* expected) {
  throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as " + expected);
}

template <typename T>
T ParseNumber(const std::string& key, const std::string& value, const char* expected) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) BadValue(key, value, expected);
  return out;
}

std::string FormatDouble(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

bool ParseBool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  BadValue(key, value, "a boolean (true/false)");
}

std::string EscapeDelimiter(const std::string& d) { return d == "\t" ? "\\t" : d; }
std::string UnescapeDelimiter(const std::string& d) { return d == "\\t" ? "\t" : d; }

struct Entry {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <typename Member>
Entry SizeEntry(std::string key, Member member) {
  return {key, [member](const RunConfig& c) { return std::to_string(member(const_cast<RunConfig&>(c))); },
          [member, key](RunConfig& c, const std::string& v) {
            member(c) = ParseNumber<std::size_t>(key, v, "a nonnegative integer");
          }};
}

template <typename Member>
Entry U64Entry(std::string key, Member member) {
  return {key, [member](const RunConfig& c) { return std::to_string(member(const_cast<RunConfig&>(c))); },
          [member, key](RunConfig& c, const std::string& v) {
            member(c) = ParseNumber<std::uint64_t>(key, v, "a nonnegative integer");
          }};
}

template <typename Member>
Entry DoubleEntry(std::string key, Member member) {
  return {key, [member](const RunConfig& c) { return FormatDouble(member(const_cast<RunConfig&>(c))); },
          [member, key](RunConfig& c, const std::string& v) { member(c) = ParseNumber<double>(key, v, "a number"); }};
}

template <typename Member>
Entry BoolEntry(std::string key, Member member) {
  return {key, [member](const RunConfig& c) { return std::string(member(const_cast<RunConfig&>(c)) ? "true" : "false"); },
          [member, key](RunConfig& c, const std::string& v) { member(c) = ParseBool(key, v); }};
}

template <typename Member>
Entry StringEntry(std::string key, Member member) {
  return {key, [member](const RunConfig& c) { return member(const_cast<RunConfig&>(c)); },
          [member](RunConfig& c, const std::string& v) { member(c) = v; }};
}

#define CGNN_FIELD(expr) [](RunConfig& c) -> auto& { return c.expr; }

const std::vector<Entry>& Registry() {
  static const std::vector<Entry> entries = [] {
    std::vector<Entry> e;
    e.push_back(StringEntry("data.format", CGNN_FIELD(data.format)));
    e.push_back(StringEntry("data.path", CGNN_FIELD(data.path)));
    e.push_back(StringEntry("data.schema", CGNN_FIELD(data.schema)));
    e.push_back(BoolEntry("data.has_header", CGNN_FIELD(data.has_header)));
    e.push_back({"data.delimiter", [](const RunConfig& c) { return EscapeDelimiter(c.data.delimiter); },
                 [](RunConfig& c, const std::string& v) { c.data.delimiter = UnescapeDelimiter(v); }});
    e.push_back({"data.label_mode",
                 [](const RunConfig& c) { return std::string(c.data.label_mode == LabelMode::kRating ? "rating" : "click"); },
                 [](RunConfig& c, const std::string& v) {
                   if (v == "click") c.data.label_mode = LabelMode::kClick;
                   else if (v == "rating") c.data.label_mode = LabelMode::kRating;
                   else BadValue("data.label_mode", v, "click or rating");
                 }});
    e.push_back(BoolEntry("data.strict", CGNN_FIELD(data.strict)));
    e.push_back(SizeEntry("data.subsample", CGNN_FIELD(data.subsample)));
    e.push_back(SizeEntry("data.min_freq", CGNN_FIELD(data.min_freq)));
    e.push_back(U64Entry("data.seed", CGNN_FIELD(data.seed)));

    e.push_back(DoubleEntry("causal.l1", CGNN_FIELD(causal.l1)));
    e.push_back(DoubleEntry("causal.rho_init", CGNN_FIELD(causal.rho_init)));
    e.push_back(DoubleEntry("causal.rho_growth", CGNN_FIELD(causal.rho_growth)));
    e.push_back(DoubleEntry("causal.rho_max", CGNN_FIELD(causal.rho_max)));
    e.push_back(DoubleEntry("causal.h_shrink", CGNN_FIELD(causal.h_shrink)));
    e.push_back(DoubleEntry("causal.h_tol", CGNN_FIELD(causal.h_tol)));
    e.push_back(DoubleEntry("causal.w_tol", CGNN_FIELD(causal.w_tol)));
    e.push_back(SizeEntry("causal.inner_steps", CGNN_FIELD(causal.inner_steps)));
    e.push_back(SizeEntry("causal.max_outer", CGNN_FIELD(causal.max_outer)));
    e.push_back(SizeEntry("causal.hidden", CGNN_FIELD(causal.hidden)));
    e.push_back(DoubleEntry("causal.latent_logvar", CGNN_FIELD(causal.latent_logvar)));
    e.push_back(BoolEntry("causal.learn_variances", CGNN_FIELD(causal.learn_variances)));
    e.push_back(BoolEntry("causal.train_networks", CGNN_FIELD(causal.train_networks)));
    e.push_back(SizeEntry("causal.batch_size", CGNN_FIELD(causal.batch_size)));
    e.push_back(DoubleEntry("causal.learning_rate", CGNN_FIELD(causal.learning_rate)));
    e.push_back(DoubleEntry("causal.acyclic_c", CGNN_FIELD(causal.acyclic_c)));
    e.push_back(U64Entry("causal.seed", CGNN_FIELD(causal.seed)));

    e.push_back(SizeEntry("graph.max_in_degree", CGNN_FIELD(graph.max_in_degree)));
    e.push_back(DoubleEntry("graph.user_epsilon", CGNN_FIELD(graph.user_epsilon)));
    e.push_back(DoubleEntry("graph.ad_epsilon", CGNN_FIELD(graph.ad_epsilon)));
    e.push_back(SizeEntry("graph.causal_samples", CGNN_FIELD(graph.causal_samples)));
    e.push_back(SizeEntry("graph.causal_width", CGNN_FIELD(graph.causal_width)));

    e.push_back(SizeEntry("walk.length", CGNN_FIELD(walk.walk_length)));
    e.push_back(SizeEntry("walk.per_node", CGNN_FIELD(walk.walks_per_node)));
    e.push_back(SizeEntry("walk.window", CGNN_FIELD(walk.window)));
    e.push_back(SizeEntry("walk.epochs", CGNN_FIELD(walk.epochs)));
    e.push_back(SizeEntry("walk.negatives", CGNN_FIELD(walk.negatives)));
    e.push_back(DoubleEntry("walk.learning_rate", CGNN_FIELD(walk.learning_rate)));
    e.push_back(U64Entry("walk.seed", CGNN_FIELD(walk.seed)));

    e.push_back({"model.kind", [](const RunConfig& c) { return std::string(ModelKindName(c.model.kind)); },
                 [](RunConfig& c, const std::string& v) { c.model.kind = ParseModelKind(v); }});
    e.push_back(SizeEntry("model.field_dim", CGNN_FIELD(model.field_dim)));
    e.push_back(SizeEntry("model.feature_graph_dim", CGNN_FIELD(model.feature_graph_dim)));
    e.push_back(SizeEntry("model.user_dim", CGNN_FIELD(model.user_dim)));
    e.push_back(SizeEntry("model.ad_dim", CGNN_FIELD(model.ad_dim)));
    e.push_back(SizeEntry("model.feature_layers", CGNN_FIELD(model.feature_layers)));
    e.push_back(SizeEntry("model.user_layers", CGNN_FIELD(model.user_layers)));
    e.push_back(SizeEntry("model.ad_layers", CGNN_FIELD(model.ad_layers)));
    e.push_back(SizeEntry("model.heads", CGNN_FIELD(model.heads)));
    e.push_back(SizeEntry("model.sample_size", CGNN_FIELD(model.sample_size)));
    e.push_back({"model.aggregator", [](const RunConfig& c) { return std::string(AggregatorName(c.model.aggregator)); },
                 [](RunConfig& c, const std::string& v) { c.model.aggregator = ParseAggregator(v); }});
    e.push_back({"model.encoder", [](const RunConfig& c) { return std::string(FeatureEncoderName(c.model.encoder)); },
                 [](RunConfig& c, const std::string& v) { c.model.encoder = ParseFeatureEncoder(v); }});
    e.push_back(BoolEntry("model.use_user", CGNN_FIELD(model.use_user)));
    e.push_back(BoolEntry("model.use_ad", CGNN_FIELD(model.use_ad)));
    e.push_back(BoolEntry("model.use_feature", CGNN_FIELD(model.use_feature)));
    e.push_back(DoubleEntry("model.leaky_slope", CGNN_FIELD(model.leaky_slope)));

    e.push_back(DoubleEntry("train.learning_rate", CGNN_FIELD(train.learning_rate)));
    e.push_back(SizeEntry("train.batch_size", CGNN_FIELD(train.batch_size)));
    e.push_back(SizeEntry("train.max_epochs", CGNN_FIELD(train.max_epochs)));
    e.push_back(SizeEntry("train.patience", CGNN_FIELD(train.patience)));
    e.push_back(SizeEntry("train.repetitions", CGNN_FIELD(train.repetitions)));
    e.push_back(U64Entry("train.seed", CGNN_FIELD(train.seed)));
    e.push_back(DoubleEntry("train.tolerance", CGNN_FIELD(train.tolerance)));
    return e;
  }();
  return entries;
}

#undef CGNN_FIELD

const Entry& Find(const std::string& key) {
  for (const auto& e : Registry()) {
    if (e.key == key) return e;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

void SetConfigValue(RunConfig& config, const std::string& key, const std::string& value) {
  Find(key).set(config, value);
}

std::string GetConfigValue(const RunConfig& config, const std::string& key) { return Find(key).get(config); }

std::vector<std::string> ConfigKeys() {
  std::vector<std::string> keys;
  for (const auto& e : Registry()) keys.push_back(e.key);
  return keys;
}

RunConfig ParseConfig(const std::string& text, const std::string& origin) {
  RunConfig config;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      SetConfigValue(config, Trim(line.substr(0, eq)), Trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return config;
}

RunConfig LoadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return ParseConfig(text.str(), path);
}

std::string FormatConfig(const RunConfig& config) {
  std::string out;
  for (const auto& e : Registry()) out += e.key + " = " + e.get(config) + "\n";
  return out;
}

void SaveConfig(const std::string& path, const RunConfig& config) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config " + path);
  out << FormatConfig(config);
}

}  // namespace cgnn
