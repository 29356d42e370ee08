#include "entrosim/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "entrosim/errors.hpp"
#include "entrosim/log.hpp"
#include "entrosim/nn/adam.hpp"
#include "entrosim/synth.hpp"

namespace entrosim::training {

namespace fs = std::filesystem;
using synth::mix_seed;

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("epochs must be >= 1");
  if (batch_size < 2 || batch_size % 2 != 0) throw ConfigError("batch_size must be even and >= 2 (pairs)");
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
  if (!(gamma_center > 0.0 && gamma_center <= 1.0)) throw ConfigError("gamma_center must be in (0, 1]");
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ConfigError("split_ratio must be in (0, 1)");
  if (augment_target != 0 && augment_threshold > augment_target) {
    throw ConfigError("augment_threshold must not exceed augment_target");
  }
}

namespace {

template <typename V>
V parse_value(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  V value{};
  in >> value;
  if (!in || !(in >> std::ws).eof()) throw ConfigError("config key '" + key + "': cannot parse '" + text + "'");
  return value;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

void TrainConfig::apply(const std::map<std::string, std::string>& values) {
  for (const auto& [key, text] : values) {
    if (key == "epochs") epochs = parse_value<std::size_t>(key, text);
    else if (key == "batch_size") batch_size = parse_value<std::size_t>(key, text);
    else if (key == "lr") lr = parse_value<double>(key, text);
    else if (key == "alpha") alpha = parse_value<double>(key, text);
    else if (key == "gamma_center") gamma_center = parse_value<double>(key, text);
    else if (key == "seed") seed = parse_value<std::uint64_t>(key, text);
    else if (key == "split_ratio") split_ratio = parse_value<double>(key, text);
    else if (key == "augment_threshold") augment_threshold = parse_value<std::size_t>(key, text);
    else if (key == "augment_target") augment_target = parse_value<std::size_t>(key, text);
    else throw ConfigError("unknown config key '" + key + "'");
  }
}

std::map<std::string, std::string> read_key_value_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open config file");
  std::map<std::string, std::string> values;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    }
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    values[trim(line.substr(0, eq))] = value;
  }
  return values;
}

PairBatch select_positive_pairs(const Dataset& train, std::size_t batch_size, std::mt19937_64& rng) {
  if (batch_size < 2 || batch_size % 2 != 0) throw ConfigError("select_positive_pairs: batch_size must be even and >= 2");
  const auto by_class = train.indices_by_class();
  std::vector<std::size_t> classes;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    if (by_class[c].empty()) continue;
    if (by_class[c].size() == 1) {
      throw ConfigError("select_positive_pairs: class '" + train.family_names[c] +
                        "' has a single sample; a positive pair needs two");
    }
    classes.push_back(c);
  }
  if (classes.empty()) throw ConfigError("select_positive_pairs: empty training set");
  std::uniform_int_distribution<std::size_t> pick_class(0, classes.size() - 1);
  PairBatch batch;
  const std::size_t n_pairs = batch_size / 2;
  batch.pairs.reserve(n_pairs);
  batch.labels.reserve(n_pairs);
  for (std::size_t p = 0; p < n_pairs; ++p) {
    const std::size_t c = classes[pick_class(rng)];
    const auto& members = by_class[c];
    std::uniform_int_distribution<std::size_t> first(0, members.size() - 1);
    std::uniform_int_distribution<std::size_t> second(0, members.size() - 2);
    const std::size_t i = first(rng);
    std::size_t j = second(rng);
    if (j >= i) ++j;
    batch.pairs.emplace_back(members[i], members[j]);
    batch.labels.push_back(static_cast<int>(c));
  }
  return batch;
}

Dataset prepare_training_set(const Dataset& train_set, const TrainConfig& config, std::uint64_t seed) {
  std::size_t target = config.augment_target != 0 ? config.augment_target : median_class_count(train_set);
  target = std::max<std::size_t>(target, 2);
  const std::size_t threshold = std::min(config.augment_threshold, target);
  std::mt19937_64 rng(seed);
  return augment_minority(train_set, rng, threshold, target);
}

double evaluation_loss(const nn::SiameseNet<float>& net, const nn::CenterBank& bank, double alpha, const Dataset& data) {
  constexpr std::size_t kChunk = 64;
  double weighted = 0.0;
  for (std::size_t start = 0; start < data.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, data.size() - start);
    std::vector<const EntropyGraph*> graphs;
    std::vector<int> labels;
    for (std::size_t i = start; i < start + n; ++i) {
      graphs.push_back(&data.samples[i].graph);
      labels.push_back(data.samples[i].label);
    }
    const auto batch = nn::make_input_batch<float>(graphs, net.config());
    const auto z = net.embed(batch);
    const auto logits = net.logits(z);
    const auto obj = nn::combined_loss(logits, labels, z, bank, alpha);
    weighted += obj.loss.total * static_cast<double>(n);
  }
  return data.size() ? weighted / static_cast<double>(data.size()) : std::numeric_limits<double>::quiet_NaN();
}

TrainResult train(const Dataset& train_set, const TrainConfig& config, const nn::EncoderConfig& encoder,
                  const Dataset* validation) {
  config.validate();
  if (train_set.samples.empty()) throw ConfigError("train: empty training set");
  train_set.validate();
  nn::EncoderConfig enc = encoder;
  enc.n_classes = train_set.n_classes();
  enc.validate();

  auto net = nn::SiameseNet<float>::initialized(enc, mix_seed(config.seed, 1));
  nn::CenterBank bank = nn::make_center_bank(enc.n_classes, enc.embed_units, mix_seed(config.seed, 2));
  {
    auto counts = train_set.counts();
    for (auto& c : counts) c = std::max<std::size_t>(c, 1);  // absent classes keep a finite weight
    bank.class_weights = nn::class_weights(counts);
  }
  std::mt19937_64 pair_rng(mix_seed(config.seed, 3));
  auto grads = net.params().zeros_like();
  auto adam = nn::AdamState<float>::for_params(net.params());
  const nn::AdamConfig adam_cfg{config.lr, 0.9, 0.999, 1e-8};

  const std::size_t batches = (train_set.size() + config.batch_size - 1) / config.batch_size;
  TrainResult result;
  result.history.reserve(config.epochs);
  std::vector<const EntropyGraph*> side_a, side_b;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    double total = 0.0, ls = 0.0, lc = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      const auto pb = select_positive_pairs(train_set, config.batch_size, pair_rng);
      side_a.clear();
      side_b.clear();
      for (const auto& [i, j] : pb.pairs) {
        side_a.push_back(&train_set.samples[i].graph);
        side_b.push_back(&train_set.samples[j].graph);
      }
      const auto xa = nn::make_input_batch<float>(side_a, enc);
      const auto xb = nn::make_input_batch<float>(side_b, enc);
      grads.set_zero();
      const auto step = net.pair_step(xa, xb, pb.labels, bank, config.alpha, &grads);
      if (!std::isfinite(step.loss.total)) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b + 1));
      }
      try {
        nn::adam_step(net.params(), grads, adam, adam_cfg);
      } catch (const NumericError& e) {
        throw NumericError("train: epoch " + std::to_string(epoch) + ", batch " + std::to_string(b + 1) + ": " + e.what());
      }
      nn::update_centers(bank, step.fused, pb.labels, config.gamma_center);
      total += step.loss.total;
      ls += step.loss.softmax_loss;
      lc += step.loss.center_loss;
    }
    EpochLoss row;
    row.epoch = epoch;
    row.train_loss = total / static_cast<double>(batches);
    row.softmax_loss = ls / static_cast<double>(batches);
    row.center_loss = lc / static_cast<double>(batches);
    row.val_loss = (validation && !validation->samples.empty())
                       ? evaluation_loss(net, bank, config.alpha, *validation)
                       : std::numeric_limits<double>::quiet_NaN();
    log::debug("epoch {:3d}  train {:.5f}  val {:.5f}  softmax {:.5f}  center {:.5f}", epoch, row.train_loss,
               row.val_loss, row.softmax_loss, row.center_loss);
    result.history.push_back(row);
  }

  result.checkpoint.encoder = enc;
  result.checkpoint.alpha = config.alpha;
  result.checkpoint.family_names = train_set.family_names;
  result.checkpoint.params = net.params();
  result.checkpoint.bank = std::move(bank);
  return result;
}

void write_loss_history(const fs::path& path, const std::vector<EpochLoss>& history) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  out << "epoch,train_loss,val_loss,softmax_loss,center_loss\n";
  char buf[256];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g,%.10g,%.10g\n", r.epoch, r.train_loss, r.val_loss, r.softmax_loss,
                  r.center_loss);
    out << buf;
  }
  if (!out) throw IoError(path, "write failed");
}

}  // namespace entrosim::training
