#include "entrosim/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "entrosim/corpus.hpp"
#include "entrosim/egr_io.hpp"
#include "entrosim/errors.hpp"

namespace entrosim::training {

namespace fs = std::filesystem;

std::vector<std::size_t> Dataset::counts() const {
  std::vector<std::size_t> c(n_classes(), 0);
  for (const auto& s : samples) ++c.at(static_cast<std::size_t>(s.label));
  return c;
}

std::vector<std::vector<std::size_t>> Dataset::indices_by_class() const {
  std::vector<std::vector<std::size_t>> by(n_classes());
  for (std::size_t i = 0; i < samples.size(); ++i) by.at(static_cast<std::size_t>(samples[i].label)).push_back(i);
  return by;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.family_names = family_names;
  out.samples.reserve(indices.size());
  for (std::size_t i : indices) out.samples.push_back(samples.at(i));
  return out;
}

void Dataset::validate() const {
  if (family_names.empty()) throw ConfigError("dataset: no families");
  for (const auto& s : samples) {
    if (s.label < 0 || static_cast<std::size_t>(s.label) >= n_classes()) {
      throw ConfigError("dataset: sample '" + s.id + "' has label " + std::to_string(s.label) + " outside 0.." +
                        std::to_string(n_classes() - 1));
    }
    if (s.graph.height != samples.front().graph.height || s.graph.width != samples.front().graph.width) {
      throw ConfigError("dataset: sample '" + s.id + "' graph size differs from the first sample");
    }
  }
}

Dataset load_dataset(const fs::path& manifest_path, const std::vector<std::string>* family_names) {
  const auto manifest = read_manifest(manifest_path);
  Dataset ds;
  if (family_names) {
    ds.family_names = *family_names;
  } else {
    std::set<std::string> names;
    for (const auto& row : manifest.rows) names.insert(row.family);
    ds.family_names.assign(names.begin(), names.end());
  }
  std::map<std::string, int> label_of;
  for (std::size_t i = 0; i < ds.family_names.size(); ++i) label_of[ds.family_names[i]] = static_cast<int>(i);

  const fs::path base = manifest_path.parent_path();
  for (const auto& row : manifest.rows) {
    const auto it = label_of.find(row.family);
    if (it == label_of.end()) {
      throw ConfigError(manifest_path.string() + ": family '" + row.family + "' of sample '" + row.id +
                        "' is not known to the model");
    }
    Sample s;
    s.id = row.id;
    s.label = it->second;
    s.graph = read_egr(base / row.egr_path);
    s.graph.sample_id = row.id;
    ds.samples.push_back(std::move(s));
  }
  if (!ds.samples.empty()) ds.validate();
  return ds;
}

std::pair<Dataset, Dataset> stratified_split(const Dataset& dataset, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("stratified_split: ratio must be in (0, 1)");
  std::vector<std::vector<std::size_t>> originals(dataset.n_classes());
  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const auto& s = dataset.samples[i];
    if (s.augmented) {
      train_idx.push_back(i);
    } else {
      originals.at(static_cast<std::size_t>(s.label)).push_back(i);
    }
  }
  std::mt19937_64 rng(seed);
  for (std::size_t c = 0; c < originals.size(); ++c) {
    auto& idx = originals[c];
    if (idx.empty()) continue;
    if (idx.size() < 2) {
      throw ConfigError("stratified_split: class '" + dataset.family_names[c] + "' has " + std::to_string(idx.size()) +
                        " sample; need at least 2 (augment or merge the class)");
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n = static_cast<double>(idx.size());
    std::size_t n_train = static_cast<std::size_t>(std::llround(ratio * n));
    n_train = std::clamp<std::size_t>(n_train, 1, idx.size() - 1);
    train_idx.insert(train_idx.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    test_idx.insert(test_idx.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  return {dataset.subset(train_idx), dataset.subset(test_idx)};
}

Dataset bootstrap_resample(const Dataset& train, std::uint64_t seed) {
  if (train.samples.empty()) throw ConfigError("bootstrap_resample: empty training set");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> picks;
  picks.reserve(train.size());
  for (const auto& members : train.indices_by_class()) {
    if (members.empty()) continue;
    std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
    for (std::size_t k = 0; k < members.size(); ++k) picks.push_back(members[pick(rng)]);
  }
  return train.subset(picks);
}

std::size_t median_class_count(const Dataset& dataset) {
  auto counts = dataset.counts();
  if (counts.empty()) return 0;
  std::sort(counts.begin(), counts.end());
  return counts[counts.size() / 2];
}

Dataset augment_minority(const Dataset& dataset, std::mt19937_64& rng, std::size_t threshold, std::size_t target) {
  if (threshold > target) throw ConfigError("augment_minority: threshold must not exceed target");
  Dataset out = dataset;
  const auto by_class = dataset.indices_by_class();
  std::uniform_real_distribution<double> jitter(-kAugmentLengthJitter, kAugmentLengthJitter);
  std::normal_distribution<double> noise(0.0, kAugmentNoiseSigma);

  for (std::size_t c = 0; c < by_class.size(); ++c) {
    std::vector<std::size_t> sources;
    for (std::size_t i : by_class[c]) {
      if (!dataset.samples[i].augmented) sources.push_back(i);
    }
    const std::size_t have = by_class[c].size();
    if (sources.empty() || have >= threshold || have >= target) continue;
    std::uniform_int_distribution<std::size_t> pick(0, sources.size() - 1);
    for (std::size_t k = 0; k < target - have; ++k) {
      const Sample& src = dataset.samples[sources[pick(rng)]];
      const auto& cells = src.graph.cells;
      const std::size_t n = cells.size();

      const auto stretched_len =
          std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(n) * (1.0 + jitter(rng)))));
      std::vector<double> stream = resample_linear(cells, stretched_len);
      std::uniform_int_distribution<std::size_t> shift(0, stretched_len - 1);
      std::rotate(stream.begin(), stream.begin() + static_cast<std::ptrdiff_t>(shift(rng)), stream.end());

      Sample aug;
      aug.id = src.id + "#aug" + std::to_string(k);
      aug.label = src.label;
      aug.augmented = true;
      aug.graph = src.graph;
      aug.graph.sample_id = aug.id;
      aug.graph.fill_policy = FillPolicy::Resample;
      aug.graph.cells = resample_linear(stream, n);
      for (double& v : aug.graph.cells) v = std::clamp(v + noise(rng), 0.0, 8.0);
      out.samples.push_back(std::move(aug));
    }
  }
  return out;
}

}  // namespace entrosim::training
