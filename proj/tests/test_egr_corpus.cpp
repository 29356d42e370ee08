#include <doctest.h>

#include <cstring>
#include <random>

#include "entrosim/corpus.hpp"
#include "entrosim/egr_io.hpp"
#include "entrosim/errors.hpp"
#include "entrosim/synth.hpp"
#include "fixtures.hpp"

using namespace entrosim;
using entrosim::testing::slurp;
using entrosim::testing::TempDir;
using entrosim::testing::write_bytes;
namespace fs = std::filesystem;

namespace {

EntropyGraph sample_graph() {
  EntropyGraph g;
  g.height = 3;
  g.width = 2;
  g.fill_policy = FillPolicy::PadTruncate;
  g.cells = {0.0, 1.0 / 3.0, 2.5, 7.99, 8.0, 4.125};
  return g;
}

}  // namespace

TEST_CASE("egr header layout is exact") {
  const auto bytes = encode_egr(sample_graph());
  REQUIRE(bytes.size() == kEgrHeaderSize + 6 * 4);
  CHECK(std::memcmp(bytes.data(), "EGR1", 4) == 0);
  const std::vector<std::uint8_t> dims{3, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0};
  CHECK(std::equal(dims.begin(), dims.end(), bytes.begin() + 4));
  float third;
  std::memcpy(&third, bytes.data() + kEgrHeaderSize + 4, 4);
  CHECK(third == static_cast<float>(1.0 / 3.0));
}

TEST_CASE("egr round trip rounds once to f32") {
  const auto g = sample_graph();
  const auto back = decode_egr(encode_egr(g));
  CHECK(back.height == 3);
  CHECK(back.width == 2);
  CHECK(back.fill_policy == FillPolicy::PadTruncate);
  for (std::size_t i = 0; i < g.cells.size(); ++i) CHECK(back.cells[i] == static_cast<double>(static_cast<float>(g.cells[i])));
  CHECK(encode_egr(back) == encode_egr(g));
}

TEST_CASE("egr decoder rejects malformed input") {
  const auto good = encode_egr(sample_graph());
  auto bad_magic = good;
  bad_magic[3] = '2';
  CHECK_THROWS_AS(decode_egr(bad_magic), FormatError);
  auto bad_policy = good;
  bad_policy[12] = 7;
  CHECK_THROWS_AS(decode_egr(bad_policy), FormatError);
  auto bad_reserved = good;
  bad_reserved[14] = 1;
  CHECK_THROWS_AS(decode_egr(bad_reserved), FormatError);
  auto truncated = good;
  truncated.pop_back();
  CHECK_THROWS_AS(decode_egr(truncated), FormatError);
  CHECK_THROWS_AS(decode_egr(std::span<const std::uint8_t>(good.data(), 10)), FormatError);
}

TEST_CASE("egr files carry the sample id from the file stem") {
  TempDir dir("egr");
  write_egr(dir / "x.egr", sample_graph());
  const auto g = read_egr(dir / "x.egr");
  CHECK(g.sample_id == "x");
  CHECK_THROWS_AS(read_egr(dir / "nope.egr"), IoError);
}

TEST_CASE("labels csv parsing") {
  TempDir dir("labels");
  {
    std::ofstream out(dir / "labels.csv");
    out << "relative_path,family\n# comment\n\na/x.bin,alpha\n b/y.bin , beta \n";
  }
  const auto labels = read_labels_csv(dir / "labels.csv");
  CHECK(labels.size() == 2);
  CHECK(labels.at("a/x.bin") == "alpha");
  CHECK(labels.at("b/y.bin") == "beta");
  {
    std::ofstream out(dir / "bad.csv");
    out << "no comma here\n";
  }
  CHECK_THROWS_AS(read_labels_csv(dir / "bad.csv"), FormatError);
  write_labels_csv(dir / "out.csv", labels);
  CHECK(read_labels_csv(dir / "out.csv") == labels);
}

TEST_CASE("manifest round trip keeps the skipped section") {
  TempDir dir("manifest");
  CorpusManifest m;
  m.rows.push_back({"a/x", "alpha", "a/x.egr", 4000, 20, {}});
  m.rows.push_back({"b/y", "beta", "b/y.egr", 0, 0, {"empty_file", "empty_stream"}});
  m.skipped = {"c/z.bin"};
  write_manifest(dir / "m.jsonl", m);
  const auto back = read_manifest(dir / "m.jsonl");
  REQUIRE(back.rows.size() == 2);
  CHECK(back.rows[1].warnings == m.rows[1].warnings);
  CHECK(back.rows[0].source_len == 4000);
  CHECK(back.skipped == m.skipped);
  std::ifstream in(dir / "m.jsonl");
  std::string first;
  std::getline(in, first);
  CHECK(first == R"({"id":"a/x","family":"alpha","egr_path":"a/x.egr","source_len":4000,"n_segments":20,"warnings":[]})");
}

TEST_CASE("extract_corpus skips unlabeled files and is independent of worker count") {
  TempDir dir("corpus");
  const fs::path root = dir / "corpus";
  std::mt19937_64 rng(4);
  std::map<std::string, std::string> labels;
  for (int i = 0; i < 12; ++i) {
    std::vector<std::uint8_t> bytes(1000 + 373 * i);
    for (auto& b : bytes) b = static_cast<std::uint8_t>(rng() % (8 + 20 * (i % 4)));
    const std::string rel = (i % 2 ? "fam_b/" : "fam_a/") + std::to_string(i) + ".bin";
    write_bytes(root / rel, bytes);
    labels[rel] = i % 2 ? "fam_b" : "fam_a";
  }
  write_bytes(root / "stray.bin", {1, 2, 3});
  labels["ghost/missing.bin"] = "fam_a";
  write_labels_csv(root / "labels.csv", labels);

  ExtractConfig cfg;
  cfg.graph_h = 16;
  cfg.graph_w = 16;
  const auto m1 = extract_corpus(root, root / "labels.csv", cfg, dir / "out1", 1);
  const auto m4 = extract_corpus(root, root / "labels.csv", cfg, dir / "out4", 4);
  CHECK(m1.rows.size() == 12);
  CHECK(m1.skipped == std::vector<std::string>{"ghost/missing.bin", "stray.bin"});
  CHECK(std::is_sorted(m1.rows.begin(), m1.rows.end(),
                       [](const auto& a, const auto& b) { return a.egr_path < b.egr_path; }));
  CHECK(slurp(dir / "out1" / kManifestName) == slurp(dir / "out4" / kManifestName));
  for (const auto& row : m1.rows) {
    CHECK(slurp(dir / "out1" / row.egr_path) == slurp(dir / "out4" / row.egr_path));
    CHECK(row.n_segments == (row.source_len + 199) / 200);
  }
  CHECK(m1.rows.front().id == "fam_a/0");
}
