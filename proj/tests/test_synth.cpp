#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>

#include "entrosim/corpus.hpp"
#include "entrosim/entropy.hpp"
#include "entrosim/errors.hpp"
#include "entrosim/synth.hpp"
#include "fixtures.hpp"

using namespace entrosim;
using namespace entrosim::synth;
using entrosim::testing::slurp;
using entrosim::testing::TempDir;

namespace {

FamilySpec single_kind(RegionKind kind, std::size_t bytes_per_region) {
  FamilySpec spec;
  spec.name = "probe";
  spec.seed = 5;
  spec.layout = {{kind, bytes_per_region, 0.0}, {kind, bytes_per_region, 0.0}};
  return spec;
}

std::vector<double> stream_at(const std::vector<std::uint8_t>& bytes, std::size_t l) {
  ExtractConfig cfg;
  cfg.segment_len = l;
  return entropy_stream(bytes, cfg).values;
}

std::vector<double> profile(const std::vector<std::uint8_t>& bytes, std::size_t cells = 256) {
  ExtractConfig cfg;
  cfg.graph_h = 1;
  cfg.graph_w = cells;
  return build_entropy_graph(entropy_stream(bytes, cfg), cfg).cells;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

double l2(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("region kinds land in their entropy bands at 1024-byte segments") {
  struct Band {
    RegionKind kind;
    double lo, hi;
  };
  for (const auto& band : {Band{RegionKind::TextLike, 4.0, 5.0}, Band{RegionKind::CompressedLike, 7.0, 7.8},
                           Band{RegionKind::EncryptedLike, 7.8, 8.0}}) {
    INFO(to_string(band.kind));
    std::mt19937_64 rng(11);
    const auto values = stream_at(generate_sample(single_kind(band.kind, 50 * 1024), rng), 1024);
    REQUIRE(values.size() == 100);
    std::size_t inside = 0;
    for (double v : values) inside += v >= band.lo && v <= band.hi;
    CHECK(static_cast<double>(inside) >= 0.95 * static_cast<double>(values.size()));
  }
  std::mt19937_64 rng(12);
  for (double v : stream_at(generate_sample(single_kind(RegionKind::Constant, 10 * 1024), rng), 1024)) CHECK(v == 0.0);
}

TEST_CASE("encrypted-like regions average above 7.5 bits") {
  for (int trial = 0; trial < 30; ++trial) {
    std::mt19937_64 rng(100 + trial);
    const auto values = stream_at(generate_sample(single_kind(RegionKind::EncryptedLike, 50 * 1024), rng), 1024);
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    CHECK(mean > 7.5);
  }
}

TEST_CASE("one spec drawn twice gives correlated profiles") {
  const auto cfg = preset("separated", 7);
  for (const auto& spec : cfg.families) {
    INFO(spec.name);
    std::mt19937_64 r1(1), r2(2);
    const auto a = generate_sample(spec, r1);
    const auto b = generate_sample(spec, r2);
    CHECK(a != b);
    CHECK(pearson(profile(a), profile(b)) > 0.8);
  }
}

TEST_CASE("families are further apart than samples within a family") {
  const auto cfg = preset("separated", 7);
  std::vector<std::vector<std::vector<double>>> profiles(cfg.families.size());
  for (std::size_t f = 0; f < cfg.families.size(); ++f) {
    for (std::uint64_t s = 0; s < 4; ++s) {
      std::mt19937_64 rng(mix_seed(f, s));
      profiles[f].push_back(profile(generate_sample(cfg.families[f], rng), 64));
    }
  }
  double within = 0, between = 0;
  std::size_t nw = 0, nb = 0;
  for (std::size_t f = 0; f < profiles.size(); ++f) {
    for (std::size_t g = f; g < profiles.size(); ++g) {
      for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
          if (f == g && j <= i) continue;
          const double d = l2(profiles[f][i], profiles[g][j]);
          if (f == g) {
            within += d;
            ++nw;
          } else {
            between += d;
            ++nb;
          }
        }
      }
    }
  }
  CHECK(between / static_cast<double>(nb) > 2.0 * within / static_cast<double>(nw));
}

TEST_CASE("presets have the expected families and counts") {
  for (const auto& name : preset_names()) {
    const auto cfg = preset(name, 7);
    REQUIRE(cfg.families.size() == 11);
    std::size_t fourty = 0;
    std::map<std::string, std::size_t> by_name;
    for (std::size_t i = 0; i < cfg.families.size(); ++i) {
      by_name[cfg.families[i].name] = cfg.samples_per_family[i];
      fourty += cfg.samples_per_family[i] == 40;
    }
    CHECK(fourty == 8);
    CHECK(by_name.at("petya") == 6);
    CHECK(by_name.at("dalexis") == 9);
    CHECK(by_name.at("upatre") == 18);
    CHECK_NOTHROW(cfg.validate());
  }
  const auto hard = preset("paper-shape", 7);
  const auto easy = preset("separated", 7);
  auto kinds = [](const FamilySpec& s) {
    std::vector<RegionKind> k;
    for (const auto& r : s.layout) k.push_back(r.kind);
    return k;
  };
  CHECK(kinds(hard.families[0]) == kinds(hard.families[6]));
  CHECK(kinds(easy.families[0]) != kinds(easy.families[6]));
  CHECK_THROWS_AS(preset("cubist", 1), ConfigError);
}

TEST_CASE("corpus generation is a pure function of the config") {
  TempDir dir("synth");
  SynthCorpusConfig cfg = preset("separated", 3);
  for (auto& n : cfg.samples_per_family) n = 2;
  const auto a = generate_corpus(cfg, dir / "a");
  const auto b = generate_corpus(cfg, dir / "b");
  CHECK(a.files == 22);
  CHECK(a.labels == b.labels);
  CHECK(a.total_bytes == b.total_bytes);
  for (const auto& [rel, fam] : a.labels) CHECK(slurp(dir / "a" / rel) == slurp(dir / "b" / rel));
  CHECK(a.labels.contains("petya/petya_0001.bin"));
  CHECK(read_labels_csv(dir / "a" / "labels.csv") == a.labels);
  cfg.seed = 4;
  const auto c = generate_corpus(cfg, dir / "c");
  CHECK(slurp(dir / "a" / "bitman/bitman_0000.bin") != slurp(dir / "c" / "bitman/bitman_0000.bin"));
}

TEST_CASE("synth validation") {
  FamilySpec spec = single_kind(RegionKind::TextLike, 10);
  CHECK_NOTHROW(spec.validate());
  spec.layout.pop_back();
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = single_kind(RegionKind::TextLike, 0);
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = single_kind(RegionKind::TextLike, 10);
  spec.name.clear();
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  auto cfg = preset("separated", 1);
  cfg.samples_per_family.pop_back();
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = preset("separated", 1);
  cfg.families[1].name = cfg.families[0].name;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK(parse_region_kind(to_string(RegionKind::CompressedLike)) == RegionKind::CompressedLike);
  CHECK_THROWS_AS(parse_region_kind("noise"), ConfigError);
  CHECK(mix_seed(1, 2) != mix_seed(2, 1));
}
