#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "entrosim/dataset.hpp"
#include "entrosim/nn/checkpoint.hpp"
#include "entrosim/nn/encoder.hpp"

namespace entrosim::training {

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 24;  // graphs per batch, i.e. batch_size / 2 pairs
  double lr = 1e-4;
  double alpha = 0.3;
  double gamma_center = 0.5;
  std::uint64_t seed = 0;
  double split_ratio = 0.8;
  std::size_t augment_threshold = 20;
  std::size_t augment_target = 0;  // 0: median class count of the training set

  void validate() const;

  /// Applies `key=value` pairs; keys are the field names above. Unknown keys
  /// and unparsable values throw ConfigError naming the key.
  void apply(const std::map<std::string, std::string>& values);
};

/// Parses a key=value file (`#` comments, blank lines and `[section]`
/// headers are ignored).
std::map<std::string, std::string> read_key_value_file(const std::filesystem::path& path);

/// Positive pairs: both members of every pair share one class.
struct PairBatch {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // sample indices into the source dataset
  std::vector<int> labels;
};

/// batch_size / 2 pairs. Each pair's class is drawn uniformly over the
/// classes present in `train`; its two members are distinct samples of that
/// class. Throws ConfigError if a present class has a single sample.
PairBatch select_positive_pairs(const Dataset& train, std::size_t batch_size, std::mt19937_64& rng);

struct EpochLoss {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN when no validation set was given
  double softmax_loss = 0.0;
  double center_loss = 0.0;
};

struct TrainResult {
  nn::Checkpoint checkpoint;
  std::vector<EpochLoss> history;
};

/// ceil(|train| / batch_size) pair batches per epoch; Adam on the encoder and
/// head, count-normalized updates on the centers. Class weights come from
/// the class counts of `train_set`. `validation`, when given, is scored each
/// epoch but never used for stopping. Fully determined by (data, config).
TrainResult train(const Dataset& train_set, const TrainConfig& config, const nn::EncoderConfig& encoder,
                  const Dataset* validation = nullptr);

/// Split-independent preparation used by both `train` callers: keep the given
/// training set, then grow minority classes per the config.
Dataset prepare_training_set(const Dataset& train_set, const TrainConfig& config, std::uint64_t seed);

/// Mean combined loss of single samples (each fused with itself).
double evaluation_loss(const nn::SiameseNet<float>& net, const nn::CenterBank& bank, double alpha, const Dataset& data);

void write_loss_history(const std::filesystem::path& path, const std::vector<EpochLoss>& history);

}  // namespace entrosim::training
