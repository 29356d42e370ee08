#include "entrosim/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "entrosim/errors.hpp"
#include "entrosim/nn/losses.hpp"

namespace entrosim::eval {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr std::size_t kChunk = 32;

nn::SiameseNet<float> net_from(const nn::Checkpoint& checkpoint) {
  if (checkpoint.family_names.size() != checkpoint.encoder.n_classes) {
    throw FormatError("checkpoint lists " + std::to_string(checkpoint.family_names.size()) + " families but the model has " +
                      std::to_string(checkpoint.encoder.n_classes) + " classes");
  }
  return nn::SiameseNet<float>(checkpoint.encoder, checkpoint.params);
}

void check_graph(const EntropyGraph& g, const nn::EncoderConfig& cfg) {
  if (g.height != cfg.input_h || g.width != cfg.input_w) {
    throw ShapeError("graph '" + g.sample_id + "' is " + std::to_string(g.height) + "x" + std::to_string(g.width) +
                     " but the model expects " + std::to_string(cfg.input_h) + "x" + std::to_string(cfg.input_w));
  }
}

}  // namespace

Classifier::Classifier(const nn::Checkpoint& checkpoint)
    : net_(net_from(checkpoint)), family_names_(checkpoint.family_names) {}

std::vector<double> Classifier::predict(const EntropyGraph& graph) const {
  return predict_batch({&graph});
}

std::vector<double> Classifier::predict_batch(const std::vector<const EntropyGraph*>& graphs) const {
  const std::size_t k = config().n_classes;
  std::vector<double> out;
  out.reserve(graphs.size() * k);
  for (std::size_t start = 0; start < graphs.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, graphs.size() - start);
    std::vector<const EntropyGraph*> chunk(graphs.begin() + static_cast<std::ptrdiff_t>(start),
                                           graphs.begin() + static_cast<std::ptrdiff_t>(start + n));
    for (const auto* g : chunk) check_graph(*g, config());
    const auto z = net_.embed(nn::make_input_batch<float>(chunk, config()));
    const auto lg = net_.logits(nn::fuse_embeddings(z, z));
    std::vector<double> row(k);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < k; ++c) row[c] = lg.data()[i * k + c];
      const auto p = nn::softmax<double>(row);
      out.insert(out.end(), p.begin(), p.end());
    }
  }
  return out;
}

std::vector<double> Classifier::embed_batch(const std::vector<const EntropyGraph*>& graphs) const {
  std::vector<double> out;
  for (std::size_t start = 0; start < graphs.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, graphs.size() - start);
    std::vector<const EntropyGraph*> chunk(graphs.begin() + static_cast<std::ptrdiff_t>(start),
                                           graphs.begin() + static_cast<std::ptrdiff_t>(start + n));
    for (const auto* g : chunk) check_graph(*g, config());
    const auto z = net_.embed(nn::make_input_batch<float>(chunk, config()));
    out.insert(out.end(), z.data(), z.data() + z.size());
  }
  return out;
}

EvalReport evaluate_scores(std::span<const double> scores, std::span<const int> truths,
                           const std::vector<std::string>& family_names) {
  const std::size_t k = family_names.size();
  const std::size_t n = truths.size();
  if (scores.size() != n * k) throw ConfigError("evaluate: score matrix size does not match N x K");
  std::vector<int> preds(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < k; ++c) {
      if (scores[i * k + c] > scores[i * k + best]) best = c;
    }
    preds[i] = static_cast<int>(best);
  }
  EvalReport r;
  r.family_names = family_names;
  r.cm = confusion_matrix(preds, truths, k);
  r.per_class = prf_per_class(r.cm);
  r.weighted = weighted_metrics(r.cm);
  r.auc = roc_auc(scores, n, k, truths);
  r.accuracy = static_cast<double>(r.cm.trace()) / static_cast<double>(r.cm.total());
  return r;
}

EvalReport evaluate(const nn::Checkpoint& checkpoint, const training::Dataset& dataset) {
  if (dataset.family_names != checkpoint.family_names) {
    throw ConfigError("evaluate: dataset families differ from the checkpoint's");
  }
  if (dataset.samples.empty()) throw ConfigError("evaluate: empty dataset");
  const Classifier clf(checkpoint);
  std::vector<const EntropyGraph*> graphs;
  std::vector<int> truths;
  for (const auto& s : dataset.samples) {
    graphs.push_back(&s.graph);
    truths.push_back(s.label);
  }
  const auto scores = clf.predict_batch(graphs);
  return evaluate_scores(scores, truths, dataset.family_names);
}

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_from(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

std::string cm_csv(const EvalReport& r) {
  std::ostringstream out;
  out << "actual\\predicted";
  for (const auto& name : r.family_names) out << ',' << name;
  out << '\n';
  for (std::size_t a = 0; a < r.cm.k; ++a) {
    out << r.family_names[a];
    for (std::size_t p = 0; p < r.cm.k; ++p) out << ',' << r.cm.at(a, p);
    out << '\n';
  }
  return out.str();
}

}  // namespace

std::string report_to_json(const EvalReport& r) {
  json j;
  j["families"] = r.family_names;
  j["n_samples"] = r.cm.total();
  j["accuracy"] = r.accuracy;
  j["weighted"] = {{"recall", r.weighted.recall}, {"precision", r.weighted.precision}, {"f1", r.weighted.f1}};
  json per_auc = json::object();
  for (std::size_t c = 0; c < r.family_names.size(); ++c) per_auc[r.family_names[c]] = number_or_null(r.auc.per_class.at(c));
  json degenerate = json::array();
  for (std::size_t c = 0; c < r.family_names.size(); ++c) {
    if (r.auc.degenerate.at(c)) degenerate.push_back(r.family_names[c]);
  }
  j["auc"] = {{"micro", number_or_null(r.auc.micro)},
              {"macro", number_or_null(r.auc.macro)},
              {"per_class", per_auc},
              {"degenerate", degenerate}};
  json per = json::object();
  for (std::size_t c = 0; c < r.family_names.size(); ++c) {
    const auto& m = r.per_class.at(c);
    per[r.family_names[c]] = {{"recall", m.recall},
                              {"precision", m.precision},
                              {"f1", m.f1},
                              {"support", m.support},
                              {"recall_undefined", m.recall_undefined},
                              {"precision_undefined", m.precision_undefined},
                              {"f1_undefined", m.f1_undefined}};
  }
  j["per_class"] = per;
  json rows = json::array();
  for (std::size_t a = 0; a < r.cm.k; ++a) {
    json row = json::array();
    for (std::size_t p = 0; p < r.cm.k; ++p) row.push_back(r.cm.at(a, p));
    rows.push_back(row);
  }
  j["cm"] = rows;
  j["cm_csv"] = kConfusionName;
  return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  EvalReport r;
  try {
    const json j = json::parse(text);
    r.family_names = j.at("families").get<std::vector<std::string>>();
    const std::size_t k = r.family_names.size();
    r.accuracy = j.at("accuracy").get<double>();
    const auto& w = j.at("weighted");
    r.weighted = {w.at("recall").get<double>(), w.at("precision").get<double>(), w.at("f1").get<double>()};
    const auto& auc = j.at("auc");
    r.auc.micro = number_from(auc.at("micro"));
    r.auc.macro = number_from(auc.at("macro"));
    r.auc.per_class.resize(k);
    r.auc.degenerate.assign(k, false);
    for (std::size_t c = 0; c < k; ++c) r.auc.per_class[c] = number_from(auc.at("per_class").at(r.family_names[c]));
    for (const auto& name : auc.at("degenerate")) {
      for (std::size_t c = 0; c < k; ++c) {
        if (r.family_names[c] == name.get<std::string>()) r.auc.degenerate[c] = true;
      }
    }
    for (const auto& name : r.family_names) {
      const auto& m = j.at("per_class").at(name);
      ClassMetrics cm;
      cm.recall = m.at("recall").get<double>();
      cm.precision = m.at("precision").get<double>();
      cm.f1 = m.at("f1").get<double>();
      cm.support = m.at("support").get<std::int64_t>();
      cm.recall_undefined = m.at("recall_undefined").get<bool>();
      cm.precision_undefined = m.at("precision_undefined").get<bool>();
      cm.f1_undefined = m.at("f1_undefined").get<bool>();
      r.per_class.push_back(cm);
    }
    r.cm = ConfusionMatrix(k);
    const auto& rows = j.at("cm");
    if (rows.size() != k) throw FormatError("report: confusion matrix has " + std::to_string(rows.size()) + " rows");
    for (std::size_t a = 0; a < k; ++a) {
      if (rows[a].size() != k) throw FormatError("report: confusion matrix row " + std::to_string(a) + " has wrong length");
      for (std::size_t p = 0; p < k; ++p) r.cm.at(a, p) = rows[a][p].get<std::int64_t>();
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("report: ") + e.what());
  }
  return r;
}

void export_report(const EvalReport& report, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir, "cannot create report directory: " + ec.message());
  const auto write = [](const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError(path, "cannot open for writing");
    out << text;
    if (!out) throw IoError(path, "write failed");
  };
  write(dir / kReportName, report_to_json(report));
  write(dir / kConfusionName, cm_csv(report));
}

EvalReport read_report(const fs::path& report_json) {
  std::ifstream in(report_json);
  if (!in) throw IoError(report_json, "cannot open report");
  std::ostringstream text;
  text << in.rdbuf();
  return report_from_json(text.str());
}

void export_embeddings(const nn::Checkpoint& checkpoint, const training::Dataset& dataset, const fs::path& path) {
  const Classifier clf(checkpoint);
  std::vector<const EntropyGraph*> graphs;
  for (const auto& s : dataset.samples) graphs.push_back(&s.graph);
  const auto z = clf.embed_batch(graphs);
  const std::size_t d = checkpoint.encoder.embed_units;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  out << "id,family";
  for (std::size_t i = 0; i < d; ++i) out << ",e_" << i;
  out << '\n';
  char buf[32];
  for (std::size_t s = 0; s < dataset.samples.size(); ++s) {
    const auto& sample = dataset.samples[s];
    out << sample.id << ',' << dataset.family_names.at(static_cast<std::size_t>(sample.label));
    for (std::size_t i = 0; i < d; ++i) {
      std::snprintf(buf, sizeof buf, ",%.9g", z[s * d + i]);
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError(path, "write failed");
}

}  // namespace entrosim::eval
