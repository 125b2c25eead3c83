#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "cgnn/datasets.hpp"
#include "synthetic.hpp"

namespace cgnn {
namespace {

std::string WriteFile(const std::string& dir, const std::string& name, const std::string& text) {
  const std::string path = dir + "/" + name;
  std::ofstream(path) << text;
  return path;
}

std::string ReadFile(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const FieldSchema kTwoFields = FieldSchema::Parse("y:label:0,a:categorical:1,b:categorical:2");

TEST(Schema, ParseRoundTripAndValidation) {
  const FieldSchema s = FieldSchema::Parse("y:label:0, u:entity-user:1, x:numeric:2, c:categorical:name");
  EXPECT_EQ(s.num_features(), 2u);
  EXPECT_EQ(*s.user_field(), 1u);
  EXPECT_FALSE(s.ad_field().has_value());
  EXPECT_EQ(FieldSchema::Parse(s.ToString()).ToString(), s.ToString());
  EXPECT_THROW(FieldSchema::Parse("a:categorical:0"), ConfigError);
  EXPECT_THROW(FieldSchema::Parse("y:label:0,z:label:1,a:categorical:2"), ConfigError);
  EXPECT_THROW(FieldSchema::Parse("y:label:0,a:bogus:1"), ConfigError);
  EXPECT_THROW(FieldSchema::Parse("y:label:0,u:entity-user:1,v:entity-user:2,a:categorical:3"), ConfigError);
}

TEST(Ratings, ParsesMovieLensLine) {
  const auto rec = ParseRatingLine("1::1193::5::978300760");
  ASSERT_TRUE(rec.has_value());
  EXPECT_EQ(rec->user, "1");
  EXPECT_EQ(rec->item, "1193");
  EXPECT_EQ(rec->rating, 5);
  EXPECT_EQ(rec->timestamp, 978300760);
  EXPECT_FALSE(ParseRatingLine("1::1193::5").has_value());
  EXPECT_FALSE(ParseRatingLine("1::1193::x::978300760").has_value());
}

TEST(Discretize, SentinelPassthroughAndLogSquareBuckets) {
  EXPECT_EQ(DiscretizeNumeric(std::nullopt), "MISSING");
  EXPECT_EQ(DiscretizeNumeric(std::optional<double>(1.0)), "1");
  EXPECT_EQ(DiscretizeNumeric(std::optional<double>(2.0)), "2");
  EXPECT_EQ(DiscretizeNumeric(std::optional<double>(100.0)), "21");
  EXPECT_EQ(DiscretizeNumeric(std::string("")), "MISSING");
  for (double v : {3.0, 17.0, 1e4, 123456.0}) {
    const auto want = std::to_string(static_cast<long long>(std::floor(std::log(v) * std::log(v))));
    EXPECT_EQ(DiscretizeNumeric(std::optional<double>(v)), want) << v;
  }
}

TEST(Labels, ClickPassthroughAndRatingThreshold) {
  EXPECT_EQ(BinarizeLabel(1.0, LabelMode::kClick), 1);
  EXPECT_EQ(BinarizeLabel(0.0, LabelMode::kClick), 0);
  EXPECT_EQ(BinarizeLabel(5.0, LabelMode::kRating), 1);
  EXPECT_EQ(BinarizeLabel(4.0, LabelMode::kRating), 1);
  EXPECT_EQ(BinarizeLabel(3.0, LabelMode::kRating), 0);
  EXPECT_EQ(BinarizeLabel(1.0, LabelMode::kRating), 0);
  EXPECT_THROW(BinarizeLabel(2.0, LabelMode::kClick), IngestionError);
}

TEST(Ingestion, EmptyFileGivesEmptyTable) {
  const std::string dir = testing::TempDir("ingest_empty");
  const RawTable t = LoadDelimited(WriteFile(dir, "empty.tsv", ""), kTwoFields, {});
  EXPECT_EQ(t.size(), 0u);
  EXPECT_EQ(t.report.rows_skipped, 0u);
}

TEST(Ingestion, MalformedRowIsSkippedAndCounted) {
  const std::string dir = testing::TempDir("ingest_malformed");
  std::string text;
  for (int i = 0; i < 10; ++i) text += i == 4 ? "1\tonly-two-columns\n" : std::to_string(i % 2) + "\tx\ty\n";
  const std::string path = WriteFile(dir, "rows.tsv", text);
  const RawTable t = LoadDelimited(path, kTwoFields, {});
  EXPECT_EQ(t.size(), 9u);
  EXPECT_EQ(t.report.rows_skipped, 1u);
  EXPECT_EQ(t.report.lines_read, 10u);
  LoadOptions strict;
  strict.strict = true;
  EXPECT_THROW(LoadDelimited(path, kTwoFields, strict), IngestionError);
}

TEST(Ingestion, MissingFileIsAnIngestionError) {
  EXPECT_THROW(LoadDelimited("/nonexistent/file.tsv", kTwoFields, {}), IngestionError);
}

TEST(Ingestion, CriteoRowsDiscretizeNumericColumns) {
  const std::string dir = testing::TempDir("ingest_criteo");
  std::string line = "1";
  for (int i = 1; i <= 13; ++i) line += i == 2 ? "\t" : "\t" + std::to_string(i == 1 ? 100 : i);
  for (int i = 1; i <= 26; ++i) line += "\tc" + std::to_string(i);
  const RawTable t = LoadCriteo(WriteFile(dir, "criteo.tsv", line + "\n" + line + "\n"));
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t.schema.num_features(), 39u);
  EXPECT_EQ(t.columns[0].At(0), "21");
  EXPECT_EQ(t.columns[1].At(0), "MISSING");
  EXPECT_EQ(t.labels[0], 1);
}

TEST(Ingestion, AvazuHeaderSelectsClickLabel) {
  const std::string dir = testing::TempDir("ingest_avazu");
  const RawTable t = LoadAvazu(
      WriteFile(dir, "avazu.csv", "id,click,hour,site\n7,0,14102100,s1\n8,1,14102100,s2\n9,1,14102101,s1\n"));
  ASSERT_EQ(t.size(), 3u);
  EXPECT_EQ(t.schema.num_features(), 2u);
  EXPECT_EQ(t.labels, (std::vector<std::uint8_t>{0, 1, 1}));
}

TEST(Ingestion, MovieLensJoinKeepsEveryRating) {
  const std::string dir = testing::TempDir("ingest_movielens");
  testing::WriteMovieLensFixture(dir, 30, 40, 500, 3);
  const RawTable t = LoadMovieLens(dir);
  EXPECT_EQ(t.size(), 500u);
  EXPECT_EQ(t.report.rows_skipped, 0u);
  const EncodedDataset d = Encode(t, BuildVocab(t, 1));
  EXPECT_TRUE(d.has_users());
  EXPECT_TRUE(d.has_ads());
  EXPECT_LE(d.num_users, 30u);
  EXPECT_EQ(d.num_fields(), 8u);
  // Labels follow the rating threshold row by row.
  std::ifstream ratings(dir + "/ratings.dat");
  std::string line;
  std::size_t row = 0;
  while (std::getline(ratings, line)) {
    EXPECT_EQ(d.labels[row++], ParseRatingLine(line)->rating >= 4 ? 1 : 0);
  }
}

RawTable TokenTable(const std::vector<std::string>& tokens) {
  RawTable t;
  t.schema = FieldSchema::Parse("y:label:0,f:categorical:1");
  t.column_names = {"f"};
  t.columns.resize(1);
  for (const auto& tok : tokens) {
    t.columns[0].Push(tok);
    t.labels.push_back(0);
  }
  return t;
}

TEST(Vocab, CountsAndThresholds) {
  const RawTable t = TokenTable({"a", "a", "b"});
  const Vocabulary v1 = BuildVocab(t, 1);
  EXPECT_EQ(v1.cardinality(0), 3u);
  EXPECT_EQ(v1.Encode(0, "a"), 1u);
  EXPECT_EQ(v1.Encode(0, "b"), 2u);
  EXPECT_EQ(v1.Encode(0, "never-seen"), 0u);
  const Vocabulary v2 = BuildVocab(t, 2);
  EXPECT_EQ(v2.cardinality(0), 2u);
  EXPECT_EQ(v2.Encode(0, "a"), 1u);
  EXPECT_EQ(v2.Encode(0, "b"), 0u);
}

TEST(Vocab, EncodeDecodeIsIdentityAboveThreshold) {
  std::vector<std::string> tokens;
  for (int i = 0; i < 200; ++i) tokens.push_back("t" + std::to_string(i % 37 * (i % 3)));
  const RawTable t = TokenTable(tokens);
  const Vocabulary v = BuildVocab(t, 2);
  std::map<std::string, int> counts;
  for (const auto& tok : tokens) ++counts[tok];
  for (const auto& [tok, n] : counts) {
    if (n >= 2) EXPECT_EQ(v.Decode(0, v.Encode(0, tok)), tok);
  }
}

TEST(Vocab, TotalCardinalityMatchesIndependentCount) {
  const std::string dir = testing::TempDir("vocab_count");
  testing::WriteMovieLensFixture(dir, 50, 60, 2000, 9);
  const RawTable t = LoadMovieLens(dir);
  const std::size_t min_freq = 3;
  std::size_t expected = 0;
  std::size_t c = 0;
  for (const auto& spec : t.schema.fields()) {
    if (spec.kind == FieldKind::kLabel) continue;
    const RawColumn& column = t.columns[c++];
    if (spec.kind == FieldKind::kEntityUser || spec.kind == FieldKind::kEntityAd) continue;
    std::map<std::string, std::size_t> counts;
    for (std::size_t r = 0; r < t.size(); ++r) ++counts[column.At(r)];
    expected += 1;
    for (const auto& [tok, n] : counts) expected += n >= min_freq;
  }
  EXPECT_EQ(BuildVocab(t, min_freq).total_cardinality(), expected);
}

TEST(Encode, IndicesAreDenseAndInRange) {
  const std::string dir = testing::TempDir("encode_dense");
  testing::WriteMovieLensFixture(dir, 20, 25, 300, 4);
  const RawTable t = LoadMovieLens(dir);
  const EncodedDataset d = Encode(t, BuildVocab(t, 2));
  EXPECT_NO_THROW(d.Validate());
  for (std::size_t k = 0; k < d.num_fields(); ++k) {
    std::set<std::uint32_t> seen;
    for (std::size_t r = 0; r < d.num_rows; ++r) seen.insert(d.at(r, k));
    for (auto idx : seen) EXPECT_LT(idx, d.cardinalities[k]);
    // Every non-unknown index is used.
    for (std::uint32_t idx = 1; idx < d.cardinalities[k]; ++idx) EXPECT_TRUE(seen.count(idx)) << k << " " << idx;
  }
}

TEST(Encode, SaveLoadRoundTripPreservesFingerprint) {
  const EncodedDataset d = testing::MakePlantedDataset({.rows = 300});
  const std::string path = testing::TempDir("encode_roundtrip") + "/data.bin";
  d.Save(path);
  const EncodedDataset back = EncodedDataset::Load(path);
  EXPECT_EQ(back.indices, d.indices);
  EXPECT_EQ(back.labels, d.labels);
  EXPECT_EQ(back.users, d.users);
  EXPECT_EQ(back.field_names, d.field_names);
  EXPECT_EQ(back.Fingerprint(), d.Fingerprint());
  EncodedDataset changed = d;
  changed.labels[0] ^= 1;
  EXPECT_NE(changed.Fingerprint(), d.Fingerprint());
}

TEST(Encode, ValidateRejectsOutOfRangeIndex) {
  EncodedDataset d = testing::MakePlantedDataset({.rows = 20});
  d.indices[0] = static_cast<std::uint32_t>(d.cardinalities[0]);
  EXPECT_THROW(d.Validate(), ContractError);
}

TEST(Split, SizesFollowTheRemainderPolicy) {
  const Split ten = MakeSplit(10, 1);
  EXPECT_EQ(ten.train.size(), 8u);
  EXPECT_EQ(ten.val.size(), 1u);
  EXPECT_EQ(ten.test.size(), 1u);
  const Split big = MakeSplit(1000209, 1);
  EXPECT_EQ(big.val.size(), 100020u);
  EXPECT_EQ(big.test.size(), 100020u);
  EXPECT_EQ(big.train.size(), 800169u);
}

TEST(Split, DisjointExhaustiveAndDeterministic) {
  for (std::size_t n : {1u, 7u, 103u, 1000u}) {
    const Split a = MakeSplit(n, 5), b = MakeSplit(n, 5);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.val, b.val);
    std::vector<std::size_t> all;
    for (const auto* part : {&a.train, &a.val, &a.test}) all.insert(all.end(), part->begin(), part->end());
    std::sort(all.begin(), all.end());
    ASSERT_EQ(all.size(), n);
    for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(all[i], i);
  }
  EXPECT_NE(MakeSplit(1000, 5).train, MakeSplit(1000, 6).train);
}

TEST(Split, ManifestRoundTripIsByteStable) {
  const std::string dir = testing::TempDir("split_manifest");
  const Split s = MakeSplit(57, 3);
  SaveSplitManifest(dir + "/a.tsv", s, 57);
  const Split back = LoadSplitManifest(dir + "/a.tsv");
  EXPECT_EQ(back.train, s.train);
  EXPECT_EQ(back.val, s.val);
  EXPECT_EQ(back.test, s.test);
  SaveSplitManifest(dir + "/b.tsv", MakeSplit(57, 3), 57);
  EXPECT_EQ(ReadFile(dir + "/a.tsv"), ReadFile(dir + "/b.tsv"));
}

TEST(Subsample, UniformSortedAndCapped) {
  const auto rows = SubsampleRows(1000, 100, 4);
  EXPECT_EQ(rows.size(), 100u);
  EXPECT_TRUE(std::is_sorted(rows.begin(), rows.end()));
  EXPECT_EQ(std::set<std::size_t>(rows.begin(), rows.end()).size(), 100u);
  EXPECT_EQ(SubsampleRows(50, 0, 4).size(), 50u);
  EXPECT_EQ(SubsampleRows(50, 80, 4).size(), 50u);
  EXPECT_EQ(SubsampleRows(1000, 100, 4), rows);
}

}  // namespace
}  // namespace cgnn
