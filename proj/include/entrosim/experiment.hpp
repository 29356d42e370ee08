#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "entrosim/dataset.hpp"
#include "entrosim/evaluation.hpp"
#include "entrosim/nn/encoder.hpp"
#include "entrosim/training.hpp"

namespace entrosim::training {

struct ExperimentConfig {
  TrainConfig train;
  nn::EncoderConfig encoder = nn::EncoderConfig::desk(2);
  std::size_t repetitions = 30;
  std::size_t workers = 1;
  bool bootstrap = true;  // false: plain re-split per repetition
};

struct RepResult {
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  eval::EvalReport report;
  std::vector<EpochLoss> history;
};

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1); 0 for n = 1
  double min = 0.0;
  double max = 0.0;
  std::size_t n = 0;
};

MetricSummary summarize(std::span<const double> values);

struct ExperimentResult {
  std::vector<RepResult> reps;
  MetricSummary f1, recall, precision, auc_macro, auc_micro;
};

/// One repetition: split with seed, resample the training side, grow
/// minority classes, train, evaluate on the held-out side.
RepResult run_repetition(const Dataset& dataset, const ExperimentConfig& config, std::size_t rep);

/// Repetition r uses seed config.train.seed + r. Repetitions run on
/// `workers` threads; results do not depend on the thread count.
/// `on_done`, when set, is called once per finished repetition (from the
/// worker thread, serialized).
ExperimentResult run_bootstrap_experiment(const Dataset& dataset, const ExperimentConfig& config,
                                          const std::function<void(const RepResult&)>& on_done = {});

struct RatioRow {
  double ratio = 0.0;
  ExperimentResult result;
};

/// One experiment per training ratio, each with `config.repetitions` seeds.
std::vector<RatioRow> run_ratio_sweep(const Dataset& dataset, const ExperimentConfig& config,
                                      std::span<const double> ratios,
                                      const std::function<void(double, const RepResult&)>& on_done = {});

/// Parses "a:b:step" into a, a+step, ... up to b inclusive (rounded to 1e-9).
std::vector<double> parse_ratio_range(const std::string& text);

/// rep,seed,weighted_f1,weighted_recall,weighted_precision,auc_micro,auc_macro,accuracy
void write_repetitions_csv(const std::filesystem::path& path, const ExperimentResult& result);
/// metric,mean,std,min,max,n
void write_summary_csv(const std::filesystem::path& path, const ExperimentResult& result);
/// ratio,n,f1_mean,f1_std,f1_min,f1_max,auc_macro_mean,auc_macro_std
void write_sweep_csv(const std::filesystem::path& path, const std::vector<RatioRow>& rows);

}  // namespace entrosim::training
