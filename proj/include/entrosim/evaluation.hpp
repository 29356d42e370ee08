#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "entrosim/dataset.hpp"
#include "entrosim/entropy.hpp"
#include "entrosim/metrics.hpp"
#include "entrosim/nn/checkpoint.hpp"
#include "entrosim/nn/encoder.hpp"

namespace entrosim::eval {

/// Inference wrapper around a checkpoint. A single sample goes through one
/// branch; fusing an embedding with itself is the identity.
class Classifier {
 public:
  explicit Classifier(const nn::Checkpoint& checkpoint);

  const nn::EncoderConfig& config() const noexcept { return net_.config(); }
  const std::vector<std::string>& family_names() const noexcept { return family_names_; }

  /// K probabilities. ShapeError if the graph does not match the model input.
  std::vector<double> predict(const EntropyGraph& graph) const;
  /// N x K row-major probabilities.
  std::vector<double> predict_batch(const std::vector<const EntropyGraph*>& graphs) const;
  /// N x embed_units row-major embeddings.
  std::vector<double> embed_batch(const std::vector<const EntropyGraph*>& graphs) const;

 private:
  nn::SiameseNet<float> net_;
  std::vector<std::string> family_names_;
};

struct EvalReport {
  std::vector<std::string> family_names;
  std::vector<ClassMetrics> per_class;
  WeightedMetrics weighted;
  AucResult auc;
  ConfusionMatrix cm;
  double accuracy = 0.0;
};

/// Metrics from an N x K score matrix (argmax is the prediction, lowest
/// index on ties).
EvalReport evaluate_scores(std::span<const double> scores, std::span<const int> truths,
                           const std::vector<std::string>& family_names);

/// Scores every sample of `dataset` with the checkpoint. The dataset's
/// family list must equal the checkpoint's.
EvalReport evaluate(const nn::Checkpoint& checkpoint, const training::Dataset& dataset);

inline constexpr const char* kReportName = "report.json";
inline constexpr const char* kConfusionName = "cm.csv";

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);

/// Writes dir/report.json and dir/cm.csv.
void export_report(const EvalReport& report, const std::filesystem::path& dir);
EvalReport read_report(const std::filesystem::path& report_json);

/// CSV rows `id,family,e_0..e_{d-1}` in dataset order.
void export_embeddings(const nn::Checkpoint& checkpoint, const training::Dataset& dataset,
                       const std::filesystem::path& path);

}  // namespace entrosim::eval
