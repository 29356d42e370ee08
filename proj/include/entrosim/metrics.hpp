#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace entrosim::eval {

/// K x K counts; rows are actual classes, columns predicted classes.
struct ConfusionMatrix {
  std::size_t k = 0;
  std::vector<std::int64_t> counts;  // row-major

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t n_classes) : k(n_classes), counts(n_classes * n_classes, 0) {}

  std::int64_t& at(std::size_t actual, std::size_t predicted) { return counts[actual * k + predicted]; }
  std::int64_t at(std::size_t actual, std::size_t predicted) const { return counts[actual * k + predicted]; }
  std::int64_t total() const;
  std::int64_t trace() const;
  std::int64_t support(std::size_t actual) const;     // row sum
  std::int64_t predicted(std::size_t column) const;   // column sum

  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion_matrix(std::span<const int> predictions, std::span<const int> truths, std::size_t k);

struct ClassMetrics {
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  std::int64_t support = 0;
  // set when the corresponding ratio was 0/0 and reported as 0
  bool recall_undefined = false;
  bool precision_undefined = false;
  bool f1_undefined = false;

  bool operator==(const ClassMetrics&) const = default;
};

std::vector<ClassMetrics> prf_per_class(const ConfusionMatrix& cm);

struct WeightedMetrics {
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;

  bool operator==(const WeightedMetrics&) const = default;
};

/// Support-weighted means. Throws ConfigError on a zero total or a size mismatch.
WeightedMetrics weighted_metrics(std::span<const ClassMetrics> per_class, std::span<const std::int64_t> supports);
WeightedMetrics weighted_metrics(std::span<const ClassMetrics> per_class);
/// Same means taken straight from the counts: recall is trace / N, and the
/// precision and F1 sums run in extended precision, so a hand-worked rational
/// value comes back correctly rounded.
WeightedMetrics weighted_metrics(const ConfusionMatrix& cm);

/// Mann-Whitney AUC with midranks for ties. Throws ConfigError unless both
/// positives and negatives are present.
double binary_auc(std::span<const double> scores, std::span<const std::uint8_t> positive);

struct AucResult {
  std::vector<double> per_class;   // NaN where degenerate
  std::vector<bool> degenerate;    // class had no positives or no negatives
  double micro = 0.0;
  double macro = 0.0;              // mean over non-degenerate classes
};

/// One-vs-rest AUC from an N x K row-major score matrix. Throws ConfigError
/// if every truth is the same class.
AucResult roc_auc(std::span<const double> scores, std::size_t n, std::size_t k, std::span<const int> truths);

}  // namespace entrosim::eval
