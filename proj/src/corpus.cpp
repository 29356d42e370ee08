#include "entrosim/corpus.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "entrosim/egr_io.hpp"
#include "entrosim/errors.hpp"
#include "entrosim/log.hpp"

namespace entrosim {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::string strip_extension(const std::string& rel) {
  const auto slash = rel.rfind('/');
  const auto dot = rel.rfind('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash) || dot == 0 ||
      (slash != std::string::npos && dot == slash + 1)) {
    return rel;
  }
  return rel.substr(0, dot);
}

}  // namespace

std::map<std::string, std::string> read_labels_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open labels file");
  std::map<std::string, std::string> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected relative_path,family");
    }
    std::string rel = trim(line.substr(0, comma));
    std::string family = trim(line.substr(comma + 1));
    if (lineno == 1 && rel == "relative_path" && family == "family") continue;
    if (rel.empty() || family.empty()) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": empty path or family");
    }
    labels[rel] = family;
  }
  return labels;
}

void write_labels_csv(const fs::path& path, const std::map<std::string, std::string>& labels) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  out << "relative_path,family\n";
  for (const auto& [rel, family] : labels) out << rel << ',' << family << '\n';
  if (!out) throw IoError(path, "write failed");
}

void write_manifest(const fs::path& path, const CorpusManifest& manifest) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  for (const auto& row : manifest.rows) {
    ojson j;
    j["id"] = row.id;
    j["family"] = row.family;
    j["egr_path"] = row.egr_path;
    j["source_len"] = row.source_len;
    j["n_segments"] = row.n_segments;
    j["warnings"] = row.warnings;
    out << j.dump() << '\n';
  }
  if (!manifest.skipped.empty()) {
    ojson j;
    j["skipped"] = manifest.skipped;
    out << j.dump() << '\n';
  }
  if (!out) throw IoError(path, "write failed");
}

CorpusManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open manifest");
  CorpusManifest manifest;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.contains("skipped")) {
        manifest.skipped = j.at("skipped").get<std::vector<std::string>>();
        continue;
      }
      ManifestRow row;
      row.id = j.at("id").get<std::string>();
      row.family = j.at("family").get<std::string>();
      row.egr_path = j.at("egr_path").get<std::string>();
      row.source_len = j.at("source_len").get<std::uint64_t>();
      row.n_segments = j.at("n_segments").get<std::size_t>();
      row.warnings = j.value("warnings", std::vector<std::string>{});
      manifest.rows.push_back(std::move(row));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return manifest;
}

CorpusManifest extract_corpus(const fs::path& root_dir, const fs::path& labels_file,
                              const ExtractConfig& config, const fs::path& out_dir, unsigned workers) {
  config.validate();
  std::error_code ec;
  if (!fs::is_directory(root_dir, ec)) throw IoError(root_dir, "corpus root is not a directory");
  const auto labels = read_labels_csv(labels_file);

  std::set<std::string> on_disk;
  for (auto it = fs::recursive_directory_iterator(root_dir, ec); !ec && it != fs::recursive_directory_iterator();
       it.increment(ec)) {
    if (!it->is_regular_file()) continue;
    on_disk.insert(fs::relative(it->path(), root_dir).generic_string());
  }
  if (ec) throw IoError(root_dir, "directory walk failed: " + ec.message());

  struct Job {
    std::string rel;
    std::string family;
    std::string id;
  };
  std::vector<Job> jobs;
  CorpusManifest manifest;
  std::set<std::string> ids;
  std::error_code canon_ec;
  const auto labels_abs = fs::weakly_canonical(labels_file, canon_ec);
  for (const auto& rel : on_disk) {
    if (fs::weakly_canonical(root_dir / rel, canon_ec) == labels_abs) continue;  // the labels file itself
    const auto it = labels.find(rel);
    if (it == labels.end()) {
      manifest.skipped.push_back(rel);
      continue;
    }
    std::string id = strip_extension(rel);
    if (!ids.insert(id).second) id = rel;  // a.bin next to a.exe
    jobs.push_back({rel, it->second, id});
  }
  for (const auto& [rel, family] : labels) {
    if (!on_disk.contains(rel)) manifest.skipped.push_back(rel);
  }
  std::sort(manifest.skipped.begin(), manifest.skipped.end());

  fs::create_directories(out_dir, ec);
  if (ec) throw IoError(out_dir, "cannot create output directory: " + ec.message());

  std::vector<ManifestRow> rows(jobs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        const auto& job = jobs[i];
        auto extracted = extract_file(root_dir / job.rel, config);
        const fs::path egr_rel = fs::path(job.id + ".egr");
        const fs::path target = out_dir / egr_rel;
        fs::create_directories(target.parent_path());
        write_egr(target, extracted.graph);
        rows[i] = ManifestRow{job.id, job.family, egr_rel.generic_string(), extracted.source_len,
                              extracted.n_segments, extracted.graph.warnings};
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(jobs.size());
      }
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(jobs.size())));
  if (n_threads <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);

  std::sort(rows.begin(), rows.end(), [](const ManifestRow& a, const ManifestRow& b) { return a.egr_path < b.egr_path; });
  manifest.rows = std::move(rows);
  write_manifest(out_dir / kManifestName, manifest);
  log::info("extracted {} samples ({} skipped) into {}", manifest.rows.size(), manifest.skipped.size(),
            out_dir.string());
  return manifest;
}

}  // namespace entrosim
