#include <cmath>
#include <numeric>
#include <random>

#include "entrosim/errors.hpp"
#include "entrosim/nn/losses.hpp"

namespace entrosim::nn {

void CenterBank::validate() const {
  if (centers.size() != n_classes * dim || class_weights.size() != n_classes || counts.size() != n_classes) {
    throw ConfigError("center bank: inconsistent sizes");
  }
  for (std::size_t j = 0; j < n_classes; ++j) {
    if (!(class_weights[j] > 0.0) || !std::isfinite(class_weights[j])) {
      throw ConfigError("center bank: class weight " + std::to_string(j) + " must be finite and > 0");
    }
  }
  for (double c : centers) {
    if (!std::isfinite(c)) throw NumericError("center bank: non-finite center value");
  }
}

CenterBank make_center_bank(std::size_t n_classes, std::size_t dim, std::uint64_t seed, double stddev) {
  CenterBank bank(n_classes, dim);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, stddev);
  for (double& c : bank.centers) c = normal(rng);
  return bank;
}

std::vector<double> class_weights(std::span<const std::size_t> counts) {
  if (counts.empty()) throw ConfigError("class_weights: no classes");
  const double k = static_cast<double>(counts.size());
  double total = 0.0;
  for (std::size_t j = 0; j < counts.size(); ++j) {
    if (counts[j] == 0) throw ConfigError("class_weights: class " + std::to_string(j) + " has zero samples");
    total += static_cast<double>(counts[j]);
  }
  std::vector<double> w(counts.size());
  for (std::size_t j = 0; j < counts.size(); ++j) w[j] = total / (k * static_cast<double>(counts[j]));
  const double mean = std::accumulate(w.begin(), w.end(), 0.0) / k;
  for (double& v : w) v /= mean;
  return w;
}

}  // namespace entrosim::nn
