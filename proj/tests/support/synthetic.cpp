#include "synthetic.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <unistd.h>

namespace cgnn::testing {

namespace {

std::size_t Draw(Rng& rng, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }

struct PlantedRow {
  std::uint8_t label;
  std::size_t user, ad, signal, noise_a, noise_b;
};

constexpr std::size_t kSignalValues = 4, kNoiseA = 6, kNoiseB = 5;

std::vector<PlantedRow> PlantedRows(const PlantedOptions& o) {
  Rng rng(MixSeed(o.seed, 0x91a7));
  std::vector<PlantedRow> rows(o.rows);
  for (auto& r : rows) {
    r.signal = Draw(rng, kSignalValues);
    r.label = r.signal >= kSignalValues / 2 ? 1 : 0;
    if (UniformReal(rng, 0, 1) >= o.accuracy) r.label = 1 - r.label;
    r.noise_a = Draw(rng, kNoiseA);
    r.noise_b = Draw(rng, kNoiseB);
    r.user = Draw(rng, o.users);
    r.ad = Draw(rng, o.ads);
  }
  return rows;
}

EncodedDataset EmptyDataset(std::vector<std::string> names, std::vector<std::size_t> cards, std::size_t rows) {
  EncodedDataset d;
  d.field_names = std::move(names);
  d.cardinalities = std::move(cards);
  d.num_rows = rows;
  d.indices.reserve(rows * d.field_names.size());
  d.labels.reserve(rows);
  return d;
}

}  // namespace

LinearSem MakeLinearSem(std::size_t nodes, std::size_t samples, double edge_prob, std::uint64_t seed) {
  Rng rng(MixSeed(seed, 77));
  std::vector<std::size_t> order(nodes);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  LinearSem sem{Tensor({nodes, nodes}), Tensor({samples, nodes})};
  for (std::size_t a = 0; a < nodes; ++a) {
    for (std::size_t b = a + 1; b < nodes; ++b) {
      if (UniformReal(rng, 0, 1) < edge_prob) {
        double w = UniformReal(rng, 0.5, 2.0);
        if (UniformReal(rng, 0, 1) < 0.5) w = -w;
        sem.truth.at(order[a], order[b]) = w;
      }
    }
  }
  for (std::size_t i = 0; i < samples; ++i) {
    for (std::size_t a = 0; a < nodes; ++a) {
      const std::size_t j = order[a];
      double v = StandardNormal(rng);
      for (std::size_t k = 0; k < nodes; ++k) v += sem.data.at(i, k) * sem.truth.at(k, j);
      sem.data.at(i, j) = v;
    }
  }
  return sem;
}

EncodedDataset MakePlantedDataset(const PlantedOptions& options) {
  const auto rows = PlantedRows(options);
  // Index 0 is the unknown bucket, so observed values start at 1.
  EncodedDataset d = EmptyDataset({"signal", "noise_a", "noise_b"}, {kSignalValues + 1, kNoiseA + 1, kNoiseB + 1},
                                  rows.size());
  for (const auto& r : rows) {
    d.indices.insert(d.indices.end(), {static_cast<std::uint32_t>(r.signal + 1),
                                       static_cast<std::uint32_t>(r.noise_a + 1),
                                       static_cast<std::uint32_t>(r.noise_b + 1)});
    d.labels.push_back(r.label);
    if (options.entities) {
      d.users.push_back(static_cast<std::uint32_t>(r.user));
      d.ads.push_back(static_cast<std::uint32_t>(r.ad));
    }
  }
  if (options.entities) {
    d.num_users = options.users;
    d.num_ads = options.ads;
  }
  d.Validate();
  return d;
}

std::string PlantedSchema(bool entities) {
  std::string s = "label:label:0,signal:categorical:3,noise_a:categorical:4,noise_b:categorical:5";
  if (entities) s += ",user:entity-user:1,ad:entity-ad:2";
  return s;
}

void WritePlantedTsv(const std::string& path, const PlantedOptions& options) {
  std::ofstream out(path);
  for (const auto& r : PlantedRows(options)) {
    out << int(r.label) << "\tu" << r.user << "\ta" << r.ad << "\ts" << r.signal << "\tn" << r.noise_a << "\tm"
        << r.noise_b << "\n";
  }
}

EncodedDataset MakeSeparableDataset(std::size_t rows, std::uint64_t seed) {
  Rng rng(MixSeed(seed, 0x5e9a));
  EncodedDataset d = EmptyDataset({"key", "other"}, {5, 5}, rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto key = static_cast<std::uint32_t>(1 + Draw(rng, 4));
    d.indices.insert(d.indices.end(), {key, static_cast<std::uint32_t>(1 + Draw(rng, 4))});
    d.labels.push_back(key >= 3 ? 1 : 0);
  }
  d.Validate();
  return d;
}

EncodedDataset MakeNoiseDataset(std::size_t rows, std::uint64_t seed) {
  Rng rng(MixSeed(seed, 0x401e));
  EncodedDataset d = EmptyDataset({"a", "b"}, {11, 11}, rows);
  for (std::size_t i = 0; i < rows; ++i) {
    d.indices.insert(d.indices.end(), {static_cast<std::uint32_t>(1 + Draw(rng, 10)),
                                       static_cast<std::uint32_t>(1 + Draw(rng, 10))});
    d.labels.push_back(UniformReal(rng, 0, 1) < 0.5 ? 1 : 0);
  }
  d.Validate();
  return d;
}

void WriteMovieLensFixture(const std::string& dir, std::size_t users, std::size_t movies, std::size_t ratings,
                           std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  Rng rng(MixSeed(seed, 0x3117));
  static const char* kGenres[] = {"Action", "Comedy", "Drama", "Horror", "Romance"};
  std::vector<double> user_bias(users), movie_bias(movies);
  std::vector<std::size_t> user_taste(users), movie_genre(movies);
  {
    std::ofstream out(dir + "/users.dat");
    for (std::size_t u = 0; u < users; ++u) {
      user_bias[u] = UniformReal(rng, -1, 1);
      user_taste[u] = Draw(rng, 5);
      out << u + 1 << "::" << (Draw(rng, 2) ? 'M' : 'F') << "::" << 18 + 7 * Draw(rng, 5) << "::" << Draw(rng, 21)
          << "::" << 10000 + Draw(rng, 50) << "\n";
    }
  }
  {
    std::ofstream out(dir + "/movies.dat");
    for (std::size_t m = 0; m < movies; ++m) {
      movie_bias[m] = UniformReal(rng, -1, 1);
      movie_genre[m] = Draw(rng, 5);
      out << m + 1 << "::Movie " << m + 1 << " (" << 1980 + Draw(rng, 20) << ")::" << kGenres[movie_genre[m]]
          << "\n";
    }
  }
  std::ofstream out(dir + "/ratings.dat");
  for (std::size_t i = 0; i < ratings; ++i) {
    const std::size_t u = Draw(rng, users), m = Draw(rng, movies);
    const double score = 3.2 + user_bias[u] + movie_bias[m] + (user_taste[u] == movie_genre[m] ? 1.0 : 0.0) +
                         0.7 * StandardNormal(rng);
    const int rating = std::clamp(static_cast<int>(std::lround(score)), 1, 5);
    out << u + 1 << "::" << m + 1 << "::" << rating << "::" << 978300000 + i << "\n";
  }
}

std::vector<std::vector<std::uint32_t>> RandomExposures(std::size_t entities, std::size_t items, double p,
                                                        std::uint64_t seed) {
  Rng rng(MixSeed(seed, 0xe4b0));
  std::vector<std::vector<std::uint32_t>> exposures(entities);
  for (auto& set : exposures) {
    for (std::size_t j = 0; j < items; ++j) {
      if (UniformReal(rng, 0, 1) < p) set.push_back(static_cast<std::uint32_t>(j));
    }
  }
  return exposures;
}

std::string TempDir(const std::string& tag) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("cgnn_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

}  // namespace cgnn::testing
