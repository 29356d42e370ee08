#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "entrosim/entropy.hpp"

namespace entrosim {

struct ManifestRow {
  std::string id;        // relative sample path without extension
  std::string family;
  std::string egr_path;  // relative to the manifest's directory
  std::uint64_t source_len = 0;
  std::size_t n_segments = 0;
  std::vector<std::string> warnings;
};

struct CorpusManifest {
  std::vector<ManifestRow> rows;      // sorted by egr_path
  std::vector<std::string> skipped;   // relative paths without a usable label
};

/// `relative_path,family` per line; an optional `relative_path,family`
/// header line is accepted. Paths use '/' separators.
std::map<std::string, std::string> read_labels_csv(const std::filesystem::path& path);
void write_labels_csv(const std::filesystem::path& path, const std::map<std::string, std::string>& labels);

void write_manifest(const std::filesystem::path& path, const CorpusManifest& manifest);
CorpusManifest read_manifest(const std::filesystem::path& path);

/// Extracts every regular file under `root_dir` that has a label into
/// `out_dir/<id>.egr` and writes `out_dir/manifest.jsonl`. Files without a
/// label, and labels whose file is absent, end up in `skipped`. Output is
/// independent of `workers`.
CorpusManifest extract_corpus(const std::filesystem::path& root_dir,
                              const std::filesystem::path& labels_file,
                              const ExtractConfig& config,
                              const std::filesystem::path& out_dir,
                              unsigned workers = 1);

inline constexpr const char* kManifestName = "manifest.jsonl";

}  // namespace entrosim
