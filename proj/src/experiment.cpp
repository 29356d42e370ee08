#include "entrosim/experiment.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#include "entrosim/errors.hpp"
#include "entrosim/log.hpp"
#include "entrosim/synth.hpp"

namespace entrosim::training {

namespace fs = std::filesystem;
using synth::mix_seed;

MetricSummary summarize(std::span<const double> values) {
  MetricSummary s;
  s.n = values.size();
  if (values.empty()) {
    s.mean = s.std = s.min = s.max = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  s.min = s.max = values[0];
  double sum = 0.0;
  for (double v : values) {
    sum += v;
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
  }
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  return s;
}

RepResult run_repetition(const Dataset& dataset, const ExperimentConfig& config, std::size_t rep) {
  RepResult out;
  out.rep = rep;
  out.seed = config.train.seed + rep;
  TrainConfig tc = config.train;
  tc.seed = out.seed;

  auto [train_side, test_side] = stratified_split(dataset, tc.split_ratio, mix_seed(out.seed, 11));
  if (config.bootstrap) train_side = bootstrap_resample(train_side, mix_seed(out.seed, 12));
  const Dataset prepared = prepare_training_set(train_side, tc, mix_seed(out.seed, 13));
  auto trained = train(prepared, tc, config.encoder, &test_side);
  out.history = std::move(trained.history);
  out.report = eval::evaluate(trained.checkpoint, test_side);
  return out;
}

namespace {

ExperimentResult collect(std::vector<RepResult> reps) {
  ExperimentResult r;
  r.reps = std::move(reps);
  std::vector<double> f1, rec, prec, macro, micro;
  for (const auto& rep : r.reps) {
    f1.push_back(rep.report.weighted.f1);
    rec.push_back(rep.report.weighted.recall);
    prec.push_back(rep.report.weighted.precision);
    macro.push_back(rep.report.auc.macro);
    micro.push_back(rep.report.auc.micro);
  }
  r.f1 = summarize(f1);
  r.recall = summarize(rec);
  r.precision = summarize(prec);
  r.auc_macro = summarize(macro);
  r.auc_micro = summarize(micro);
  return r;
}

}  // namespace

ExperimentResult run_bootstrap_experiment(const Dataset& dataset, const ExperimentConfig& config,
                                          const std::function<void(const RepResult&)>& on_done) {
  if (config.repetitions == 0) throw ConfigError("experiment: repetitions must be >= 1");
  config.train.validate();
  std::vector<RepResult> reps(config.repetitions);
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr failure;

  auto work = [&] {
    for (;;) {
      const std::size_t r = next.fetch_add(1);
      if (r >= config.repetitions) return;
      {
        std::lock_guard lock(mu);
        if (failure) return;
      }
      try {
        reps[r] = run_repetition(dataset, config, r);
        std::lock_guard lock(mu);
        log::info("rep {:2d} seed {}  weighted F1 {:.4f}  macro AUC {:.4f}", r, reps[r].seed, reps[r].report.weighted.f1,
                  reps[r].report.auc.macro);
        if (on_done) on_done(reps[r]);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(config.workers, 1, config.repetitions);
  if (n_threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
  return collect(std::move(reps));
}

std::vector<RatioRow> run_ratio_sweep(const Dataset& dataset, const ExperimentConfig& config,
                                      std::span<const double> ratios,
                                      const std::function<void(double, const RepResult&)>& on_done) {
  std::vector<RatioRow> rows;
  for (double ratio : ratios) {
    ExperimentConfig c = config;
    c.train.split_ratio = ratio;
    RatioRow row;
    row.ratio = ratio;
    row.result = run_bootstrap_experiment(dataset, c, [&](const RepResult& r) {
      if (on_done) on_done(ratio, r);
    });
    log::info("ratio {:.2f}  mean F1 {:.4f}  std {:.4f}", ratio, row.result.f1.mean, row.result.f1.std);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<double> parse_ratio_range(const std::string& text) {
  double a = 0, b = 0, step = 0;
  char c1 = 0, c2 = 0;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%lf%c%lf%c%lf%c", &a, &c1, &b, &c2, &step, &tail) != 5 || c1 != ':' || c2 != ':') {
    throw ConfigError("--ratios: expected a:b:step, got '" + text + "'");
  }
  if (!(step > 0.0) || b < a) throw ConfigError("--ratios: need step > 0 and a <= b in '" + text + "'");
  std::vector<double> out;
  for (std::size_t i = 0;; ++i) {
    const double r = std::round((a + static_cast<double>(i) * step) * 1e9) / 1e9;
    if (r > b + 1e-9) break;
    if (!(r > 0.0 && r < 1.0)) throw ConfigError("--ratios: ratio " + std::to_string(r) + " outside (0, 1)");
    out.push_back(r);
  }
  return out;
}

namespace {

std::ofstream open_csv(const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  return out;
}

}  // namespace

void write_repetitions_csv(const fs::path& path, const ExperimentResult& result) {
  auto out = open_csv(path);
  out << "rep,seed,weighted_f1,weighted_recall,weighted_precision,auc_micro,auc_macro,accuracy\n";
  char buf[256];
  for (const auto& r : result.reps) {
    std::snprintf(buf, sizeof buf, "%zu,%llu,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n", r.rep,
                  static_cast<unsigned long long>(r.seed), r.report.weighted.f1, r.report.weighted.recall,
                  r.report.weighted.precision, r.report.auc.micro, r.report.auc.macro, r.report.accuracy);
    out << buf;
  }
  if (!out) throw IoError(path, "write failed");
}

void write_summary_csv(const fs::path& path, const ExperimentResult& result) {
  auto out = open_csv(path);
  out << "metric,mean,std,min,max,n\n";
  char buf[256];
  const std::pair<const char*, const MetricSummary*> rows[] = {{"weighted_f1", &result.f1},
                                                                {"weighted_recall", &result.recall},
                                                                {"weighted_precision", &result.precision},
                                                                {"auc_micro", &result.auc_micro},
                                                                {"auc_macro", &result.auc_macro}};
  for (const auto& [name, s] : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.10g,%.10g,%.10g,%.10g,%zu\n", name, s->mean, s->std, s->min, s->max, s->n);
    out << buf;
  }
  if (!out) throw IoError(path, "write failed");
}

void write_sweep_csv(const fs::path& path, const std::vector<RatioRow>& rows) {
  auto out = open_csv(path);
  out << "ratio,n,f1_mean,f1_std,f1_min,f1_max,auc_macro_mean,auc_macro_std\n";
  char buf[256];
  for (const auto& row : rows) {
    const auto& f = row.result.f1;
    const auto& a = row.result.auc_macro;
    std::snprintf(buf, sizeof buf, "%.4g,%zu,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n", row.ratio, f.n, f.mean, f.std, f.min,
                  f.max, a.mean, a.std);
    out << buf;
  }
  if (!out) throw IoError(path, "write failed");
}

}  // namespace entrosim::training
