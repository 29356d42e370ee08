#include "entrosim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "entrosim/errors.hpp"

namespace entrosim::eval {

std::int64_t ConfusionMatrix::total() const { return std::accumulate(counts.begin(), counts.end(), std::int64_t{0}); }

std::int64_t ConfusionMatrix::trace() const {
  std::int64_t t = 0;
  for (std::size_t j = 0; j < k; ++j) t += at(j, j);
  return t;
}

std::int64_t ConfusionMatrix::support(std::size_t actual) const {
  std::int64_t s = 0;
  for (std::size_t p = 0; p < k; ++p) s += at(actual, p);
  return s;
}

std::int64_t ConfusionMatrix::predicted(std::size_t column) const {
  std::int64_t s = 0;
  for (std::size_t a = 0; a < k; ++a) s += at(a, column);
  return s;
}

ConfusionMatrix confusion_matrix(std::span<const int> predictions, std::span<const int> truths, std::size_t k) {
  if (predictions.size() != truths.size()) {
    throw ConfigError("confusion_matrix: " + std::to_string(predictions.size()) + " predictions vs " +
                      std::to_string(truths.size()) + " truths");
  }
  if (k == 0) throw ConfigError("confusion_matrix: k must be >= 1");
  ConfusionMatrix cm(k);
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const int a = truths[i], p = predictions[i];
    if (a < 0 || static_cast<std::size_t>(a) >= k || p < 0 || static_cast<std::size_t>(p) >= k) {
      throw ConfigError("confusion_matrix: label out of range at index " + std::to_string(i));
    }
    ++cm.at(static_cast<std::size_t>(a), static_cast<std::size_t>(p));
  }
  return cm;
}

std::vector<ClassMetrics> prf_per_class(const ConfusionMatrix& cm) {
  std::vector<ClassMetrics> out(cm.k);
  for (std::size_t j = 0; j < cm.k; ++j) {
    auto& m = out[j];
    const auto tp = static_cast<double>(cm.at(j, j));
    const auto row = cm.support(j);
    const auto col = cm.predicted(j);
    m.support = row;
    if (row == 0) m.recall_undefined = true;
    else m.recall = tp / static_cast<double>(row);
    if (col == 0) m.precision_undefined = true;
    else m.precision = tp / static_cast<double>(col);
    // 2PR/(P+R) written over the integer counts: 2TP / (2TP + FP + FN)
    if (cm.at(j, j) == 0) m.f1_undefined = true;
    else m.f1 = 2.0 * tp / static_cast<double>(row + col);
  }
  return out;
}

WeightedMetrics weighted_metrics(std::span<const ClassMetrics> per_class, std::span<const std::int64_t> supports) {
  if (per_class.size() != supports.size()) throw ConfigError("weighted_metrics: size mismatch");
  std::int64_t total = 0;
  for (auto s : supports) {
    if (s < 0) throw ConfigError("weighted_metrics: negative support");
    total += s;
  }
  if (total == 0) throw ConfigError("weighted_metrics: total support is zero");
  WeightedMetrics w;
  for (std::size_t j = 0; j < per_class.size(); ++j) {
    const double f = static_cast<double>(supports[j]) / static_cast<double>(total);
    w.recall += f * per_class[j].recall;
    w.precision += f * per_class[j].precision;
    w.f1 += f * per_class[j].f1;
  }
  return w;
}

WeightedMetrics weighted_metrics(std::span<const ClassMetrics> per_class) {
  std::vector<std::int64_t> supports;
  for (const auto& m : per_class) supports.push_back(m.support);
  return weighted_metrics(per_class, supports);
}

WeightedMetrics weighted_metrics(const ConfusionMatrix& cm) {
  const std::int64_t total = cm.total();
  if (total == 0) throw ConfigError("weighted_metrics: total support is zero");
  long double precision = 0.0L, f1 = 0.0L;
  for (std::size_t j = 0; j < cm.k; ++j) {
    const auto tp = static_cast<long double>(cm.at(j, j));
    const auto n = static_cast<long double>(cm.support(j));
    const auto col = static_cast<long double>(cm.predicted(j));
    if (tp == 0.0L) continue;
    precision += n * tp / col;
    f1 += 2.0L * n * tp / (n + col);
  }
  const auto nt = static_cast<long double>(total);
  WeightedMetrics w;
  w.recall = static_cast<double>(cm.trace()) / static_cast<double>(total);
  w.precision = static_cast<double>(precision / nt);
  w.f1 = static_cast<double>(f1 / nt);
  return w;
}

double binary_auc(std::span<const double> scores, std::span<const std::uint8_t> positive) {
  if (scores.size() != positive.size()) throw ConfigError("binary_auc: size mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t t = i; t < j; ++t) {
      if (positive[order[t]]) {
        rank_sum += midrank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw ConfigError("binary_auc: need both positives and negatives");
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

AucResult roc_auc(std::span<const double> scores, std::size_t n, std::size_t k, std::span<const int> truths) {
  if (scores.size() != n * k) throw ConfigError("roc_auc: score matrix size does not match N x K");
  if (truths.size() != n) throw ConfigError("roc_auc: truths size does not match N");
  if (n < 2) throw ConfigError("roc_auc: need at least 2 samples");
  for (int t : truths) {
    if (t < 0 || static_cast<std::size_t>(t) >= k) throw ConfigError("roc_auc: truth label out of range");
  }
  if (std::all_of(truths.begin(), truths.end(), [&](int t) { return t == truths[0]; })) {
    throw ConfigError("roc_auc: all truths belong to one class");
  }
  AucResult r;
  r.per_class.assign(k, std::numeric_limits<double>::quiet_NaN());
  r.degenerate.assign(k, false);
  std::vector<double> column(n);
  std::vector<std::uint8_t> indicator(n);
  double macro_sum = 0.0;
  std::size_t macro_n = 0;
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
      column[i] = scores[i * k + c];
      indicator[i] = truths[i] == static_cast<int>(c);
      pos += indicator[i];
    }
    if (pos == 0 || pos == n) {
      r.degenerate[c] = true;
      continue;
    }
    r.per_class[c] = binary_auc(column, indicator);
    macro_sum += r.per_class[c];
    ++macro_n;
  }
  r.macro = macro_sum / static_cast<double>(macro_n);

  std::vector<std::uint8_t> flat(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) flat[i * k + c] = truths[i] == static_cast<int>(c);
  }
  r.micro = binary_auc(scores, flat);
  return r;
}

}  // namespace entrosim::eval
