#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "entrosim/entropy.hpp"

namespace entrosim::training {

struct Sample {
  std::string id;
  int label = 0;
  EntropyGraph graph;
  bool augmented = false;
};

struct Dataset {
  std::vector<Sample> samples;
  std::vector<std::string> family_names;  // label -> name

  std::size_t n_classes() const noexcept { return family_names.size(); }
  std::size_t size() const noexcept { return samples.size(); }
  std::vector<std::size_t> counts() const;
  /// Per-class sample indices, in dataset order.
  std::vector<std::vector<std::size_t>> indices_by_class() const;
  Dataset subset(std::span<const std::size_t> indices) const;

  /// Throws ConfigError on an out-of-range label or graphs of mixed size.
  void validate() const;
};

/// Loads every row of a manifest. Labels follow `family_names` when given
/// (rows of other families are an error), otherwise the sorted set of
/// families present.
Dataset load_dataset(const std::filesystem::path& manifest_path,
                     const std::vector<std::string>* family_names = nullptr);

/// Per-class shuffle, then round(ratio * n_c) samples per class go to
/// train, clamped so both sides keep at least one. Augmented samples always
/// stay in train. Throws ConfigError if a class has fewer than 2 originals.
std::pair<Dataset, Dataset> stratified_split(const Dataset& dataset, double ratio, std::uint64_t seed);

/// Draws, within each class, as many samples with replacement as the class
/// holds. Size and class counts are preserved.
Dataset bootstrap_resample(const Dataset& train, std::uint64_t seed);

inline constexpr double kAugmentNoiseSigma = 0.05;
inline constexpr double kAugmentLengthJitter = 0.05;

/// Grows each class holding fewer than `threshold` samples to `target`
/// samples. A synthetic sample starts from a random original of its class:
/// its row-major stream is resampled to a length within +-5%, circularly
/// shifted by a uniform offset, resampled back onto the grid, then given
/// N(0, 0.05^2) noise clipped to [0, 8]. Originals are kept.
Dataset augment_minority(const Dataset& dataset, std::mt19937_64& rng, std::size_t threshold, std::size_t target);

/// Median class count (upper median), used as the default augmentation target.
std::size_t median_class_count(const Dataset& dataset);

}  // namespace entrosim::training
