#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace entrosim::testing {

struct Frac {
  std::int64_t num;
  std::int64_t den;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

struct HandClass {
  Frac recall, precision, f1;
  std::int64_t support;
  bool recall_undefined, precision_undefined, f1_undefined;
};

/// A confusion matrix with its metrics worked out by exact rational arithmetic.
struct HandCase {
  std::string name;
  std::size_t k;
  std::vector<std::int64_t> cm;  // row-major, rows actual
  std::vector<HandClass> per_class;
  Frac weighted_recall, weighted_precision, weighted_f1;
};

std::vector<HandCase> hand_cases();

/// Pairwise Mann-Whitney count: P(s_pos > s_neg) + 0.5 P(tie).
double brute_force_auc(std::span<const double> scores, std::span<const std::uint8_t> positive);

struct AucInstance {
  std::size_t n = 0, k = 0;
  std::vector<double> scores;  // n x k
  std::vector<int> truths;
};

/// Small multi-class instance with heavy ties (scores on a coarse grid) and
/// at least two distinct truth classes.
AucInstance random_auc_instance(std::mt19937_64& rng);

}  // namespace entrosim::testing
