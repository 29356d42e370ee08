#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "entrosim/nn/tensor.hpp"

namespace entrosim::nn {

/// Per-class learned centers and the fixed per-class scalar weights that
/// scale them inside the center loss.
struct CenterBank {
  std::size_t n_classes = 0;
  std::size_t dim = 0;
  std::vector<double> centers;        // n_classes x dim, row-major
  std::vector<double> class_weights;  // n_classes, all > 0
  std::vector<std::int64_t> counts;   // samples absorbed per class by update_centers

  CenterBank() = default;
  CenterBank(std::size_t k, std::size_t d)
      : n_classes(k), dim(d), centers(k * d, 0.0), class_weights(k, 1.0), counts(k, 0) {}

  std::span<double> center(std::size_t j) { return {centers.data() + j * dim, dim}; }
  std::span<const double> center(std::size_t j) const { return {centers.data() + j * dim, dim}; }

  /// Throws ConfigError if sizes disagree, a weight is not > 0, or a center is non-finite.
  void validate() const;
};

/// Centers drawn from N(0, stddev^2), unit class weights.
CenterBank make_center_bank(std::size_t n_classes, std::size_t dim, std::uint64_t seed, double stddev = 0.01);

/// Inverse-frequency weights N / (K * n_j), rescaled so their mean is 1.
/// Throws ConfigError on an empty list or a zero count.
std::vector<double> class_weights(std::span<const std::size_t> counts);

struct LossBreakdown {
  double softmax_loss = 0.0;
  double center_loss = 0.0;
  double alpha = 0.0;
  double total = 0.0;
};

template <typename T>
std::vector<T> softmax(std::span<const T> logits) {
  std::vector<T> p(logits.size());
  if (logits.empty()) return p;
  const T mx = *std::max_element(logits.begin(), logits.end());
  T sum = T{0};
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

template <typename T>
struct SoftmaxXent {
  T loss;
  std::vector<T> grad;  // d loss / d logits = softmax - onehot
};

/// -log softmax(logits)[label], via max-subtraction and log-sum-exp.
template <typename T>
SoftmaxXent<T> softmax_cross_entropy(std::span<const T> logits, std::size_t label) {
  if (logits.size() < 2) throw ShapeError("softmax_cross_entropy: need at least 2 logits");
  if (label >= logits.size()) {
    throw ConfigError("softmax_cross_entropy: label " + std::to_string(label) + " out of range 0.." +
                      std::to_string(logits.size() - 1));
  }
  const T mx = *std::max_element(logits.begin(), logits.end());
  T sum = T{0};
  for (T v : logits) sum += std::exp(v - mx);
  const T log_z = mx + std::log(sum);
  SoftmaxXent<T> out{log_z - logits[label], std::vector<T>(logits.size())};
  for (std::size_t i = 0; i < logits.size(); ++i) out.grad[i] = std::exp(logits[i] - log_z);
  out.grad[label] -= T{1};
  return out;
}

template <typename T>
struct CenterLossResult {
  double loss;
  Tensor<T> grad;  // [N, D]
};

/// L_c = 1/(2N) * sum_i ||z_i - w_{y_i} c_{y_i}||^2 with gradient
/// (z_i - w_{y_i} c_{y_i}) / N. Accumulates in double.
template <typename T>
CenterLossResult<T> weighted_center_loss(const Tensor<T>& z, std::span<const int> labels, const CenterBank& bank) {
  if (z.rank() != 2) throw ShapeError("weighted_center_loss: embeddings must be [N,D]");
  const std::size_t n = z.dim(0), d = z.dim(1);
  if (n == 0) throw ShapeError("weighted_center_loss: empty batch");
  if (labels.size() != n) throw ShapeError("weighted_center_loss: label count does not match batch");
  if (d != bank.dim) {
    throw ShapeError("weighted_center_loss: embedding dim " + std::to_string(d) + " != center dim " +
                     std::to_string(bank.dim));
  }
  CenterLossResult<T> out{0.0, Tensor<T>(z.shape())};
  const double inv_n = 1.0 / static_cast<double>(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= bank.n_classes) {
      throw ConfigError("weighted_center_loss: unknown label " + std::to_string(y));
    }
    const double w = bank.class_weights[static_cast<std::size_t>(y)];
    const auto c = bank.center(static_cast<std::size_t>(y));
    for (std::size_t k = 0; k < d; ++k) {
      const double diff = static_cast<double>(z[i * d + k]) - w * c[k];
      acc += diff * diff;
      out.grad[i * d + k] = static_cast<T>(diff * inv_n);
    }
  }
  out.loss = 0.5 * inv_n * acc;
  return out;
}

template <typename T>
struct CombinedLossResult {
  LossBreakdown loss;
  Tensor<T> grad_logits;  // [N, K]
  Tensor<T> grad_z;       // [N, D], center-loss path only, already scaled by alpha
};

/// total = mean_i softmax_xent(logits_i, y_i) + alpha * L_c(z, y).
template <typename T>
CombinedLossResult<T> combined_loss(const Tensor<T>& logits, std::span<const int> labels, const Tensor<T>& z,
                                    const CenterBank& bank, double alpha) {
  if (alpha < 0.0) throw ConfigError("combined_loss: alpha must be >= 0");
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
    throw ShapeError("combined_loss: logits must be [N,K] matching the label count");
  }
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  CombinedLossResult<T> out{{}, Tensor<T>(logits.shape()), Tensor<T>{}};
  double ls = 0.0;
  const T inv_n = T{1} / static_cast<T>(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0) throw ConfigError("combined_loss: negative label");
    const auto xent = softmax_cross_entropy<T>({logits.data() + i * k, k}, static_cast<std::size_t>(labels[i]));
    ls += static_cast<double>(xent.loss);
    for (std::size_t j = 0; j < k; ++j) out.grad_logits[i * k + j] = xent.grad[j] * inv_n;
  }
  ls /= static_cast<double>(n);

  auto center = weighted_center_loss(z, labels, bank);
  for (auto& g : center.grad.storage()) g = static_cast<T>(alpha * static_cast<double>(g));
  out.grad_z = std::move(center.grad);
  out.loss.softmax_loss = ls;
  out.loss.center_loss = center.loss;
  out.loss.alpha = alpha;
  out.loss.total = ls + alpha * center.loss;
  return out;
}

/// Count-normalized center step for every class present in the batch:
///   c_j <- c_j - gamma * sum_{i: y_i = j} (c_j - z_i) / (1 + n_j)
/// where n_j is the number of batch rows labelled j. Other classes are untouched.
template <typename T>
void update_centers(CenterBank& bank, const Tensor<T>& z, std::span<const int> labels, double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("update_centers: gamma must be in (0, 1]");
  if (z.rank() != 2 || z.dim(0) != labels.size() || z.dim(1) != bank.dim) {
    throw ShapeError("update_centers: embeddings do not match labels/center dim");
  }
  const std::size_t d = bank.dim;
  std::vector<double> delta(bank.n_classes * d, 0.0);
  std::vector<std::int64_t> in_batch(bank.n_classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= bank.n_classes) {
      throw ConfigError("update_centers: unknown label " + std::to_string(y));
    }
    const auto j = static_cast<std::size_t>(y);
    ++in_batch[j];
    const auto c = bank.center(j);
    for (std::size_t k = 0; k < d; ++k) delta[j * d + k] += c[k] - static_cast<double>(z[i * d + k]);
  }
  for (std::size_t j = 0; j < bank.n_classes; ++j) {
    if (in_batch[j] == 0) continue;
    const double step = gamma / (1.0 + static_cast<double>(in_batch[j]));
    auto c = bank.center(j);
    for (std::size_t k = 0; k < d; ++k) c[k] -= step * delta[j * d + k];
    bank.counts[j] += in_batch[j];
  }
}

}  // namespace entrosim::nn
