// entrosim: synthetic corpus generation, entropy-graph extraction, Siamese
// training, classification and evaluation from one binary.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "entrosim/corpus.hpp"
#include "entrosim/egr_io.hpp"
#include "entrosim/entropy.hpp"
#include "entrosim/errors.hpp"
#include "entrosim/evaluation.hpp"
#include "entrosim/experiment.hpp"
#include "entrosim/log.hpp"
#include "entrosim/nn/checkpoint.hpp"
#include "entrosim/synth.hpp"
#include "entrosim/training.hpp"

namespace fs = std::filesystem;
using namespace entrosim;
using json = nlohmann::ordered_json;

namespace {

/// Bad flags or flag combinations; exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GraphSize {
  std::size_t h = 0, w = 0;
};

GraphSize parse_graph(const std::string& text) {
  GraphSize g;
  char x = 0, tail = 0;
  if (std::sscanf(text.c_str(), "%zu%c%zu%c", &g.h, &x, &g.w, &tail) != 3 || (x != 'x' && x != 'X') || g.h == 0 ||
      g.w == 0) {
    throw UsageError("--graph: expected HxW with positive sizes, got '" + text + "'");
  }
  return g;
}

nn::EncoderConfig model_preset(const std::string& name, std::size_t n_classes) {
  if (name == "desk") return nn::EncoderConfig::desk(n_classes);
  if (name == "paper") return nn::EncoderConfig::paper(n_classes);
  throw UsageError("--preset: expected desk|paper, got '" + name + "'");
}

// Options shared by the commands that extract.
struct ExtractFlags {
  std::size_t segment_len = 200;
  std::string graph;  // empty: follow the model preset
  std::string fill = "resample";
  std::string preset = "desk";

  void add(CLI::App* cmd) {
    cmd->add_option("--segment-len", segment_len, "Bytes per entropy segment")->capture_default_str();
    cmd->add_option("--graph", graph, "Entropy graph size HxW (default: 64x64 desk, 224x224 paper)");
    cmd->add_option("--fill", fill, "Stream-to-graph policy: resample|pad")->capture_default_str();
    cmd->add_option("--preset", preset, "Model scale: desk|paper")->capture_default_str();
  }

  ExtractConfig resolve(const std::map<std::string, std::string>& file, const CLI::App* cmd) const {
    ExtractConfig c;
    const auto enc = model_preset(preset, 2);
    c.graph_h = enc.input_h;
    c.graph_w = enc.input_w;
    try {
      if (auto it = file.find("segment_len"); it != file.end()) c.segment_len = std::stoul(it->second);
      if (auto it = file.find("graph_h"); it != file.end()) c.graph_h = std::stoul(it->second);
      if (auto it = file.find("graph_w"); it != file.end()) c.graph_w = std::stoul(it->second);
      if (auto it = file.find("fill_policy"); it != file.end()) c.fill_policy = parse_fill_policy(it->second);
      if (cmd->count("--segment-len")) c.segment_len = segment_len;
      if (!graph.empty()) {
        const auto g = parse_graph(graph);
        c.graph_h = g.h;
        c.graph_w = g.w;
      }
      if (cmd->count("--fill")) c.fill_policy = parse_fill_policy(fill);
      c.validate();
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    } catch (const std::logic_error& e) {
      throw UsageError(std::string("config file: bad extraction value (") + e.what() + ")");
    }
    return c;
  }
};

// Options shared by train and experiment.
struct TrainFlags {
  training::TrainConfig defaults;
  training::TrainConfig v;
  std::string config_path;

  void add(CLI::App* cmd) {
    v = defaults;
    cmd->add_option("--config", config_path, "key=value file with training (and extraction) settings");
    cmd->add_option("--epochs", v.epochs, "Training epochs")->capture_default_str();
    cmd->add_option("--batch", v.batch_size, "Graphs per batch (batch/2 positive pairs)")->capture_default_str();
    cmd->add_option("--lr", v.lr, "Adam learning rate")->capture_default_str();
    cmd->add_option("--alpha", v.alpha, "Center-loss weight")->capture_default_str();
    cmd->add_option("--gamma", v.gamma_center, "Center update rate")->capture_default_str();
    cmd->add_option("--seed", v.seed, "Seed for every random choice")->capture_default_str();
    cmd->add_option("--split", v.split_ratio, "Training fraction of each class")->capture_default_str();
    cmd->add_option("--augment-threshold", v.augment_threshold, "Grow classes with fewer samples than this")
        ->capture_default_str();
    cmd->add_option("--augment-target", v.augment_target, "Size to grow them to (0: median class count)")
        ->capture_default_str();
  }

  std::map<std::string, std::string> file_values() const {
    if (config_path.empty()) return {};
    return training::read_key_value_file(config_path);
  }

  training::TrainConfig resolve(std::map<std::string, std::string> file, const CLI::App* cmd) const {
    for (const char* k : {"segment_len", "graph_h", "graph_w", "fill_policy"}) file.erase(k);
    training::TrainConfig c = defaults;
    try {
      c.apply(file);
    } catch (const ConfigError& e) {
      throw UsageError(config_path + ": " + e.what());
    }
    if (cmd->count("--epochs")) c.epochs = v.epochs;
    if (cmd->count("--batch")) c.batch_size = v.batch_size;
    if (cmd->count("--lr")) c.lr = v.lr;
    if (cmd->count("--alpha")) c.alpha = v.alpha;
    if (cmd->count("--gamma")) c.gamma_center = v.gamma_center;
    if (cmd->count("--seed")) c.seed = v.seed;
    if (cmd->count("--split")) c.split_ratio = v.split_ratio;
    if (cmd->count("--augment-threshold")) c.augment_threshold = v.augment_threshold;
    if (cmd->count("--augment-target")) c.augment_target = v.augment_target;
    try {
      c.validate();
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }
    return c;
  }
};

fs::path manifest_path(const fs::path& p) {
  if (fs::is_directory(p)) return p / kManifestName;
  return p;
}

void create_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir, "cannot create directory: " + ec.message());
}

void check_graphs(const training::Dataset& ds, const nn::EncoderConfig& enc, const fs::path& manifest) {
  if (ds.samples.empty()) throw UsageError(manifest.string() + ": manifest has no samples");
  const auto& g = ds.samples.front().graph;
  if (g.height != enc.input_h || g.width != enc.input_w) {
    throw UsageError(manifest.string() + ": graphs are " + std::to_string(g.height) + "x" + std::to_string(g.width) +
                     " but the model preset expects " + std::to_string(enc.input_h) + "x" + std::to_string(enc.input_w) +
                     " (re-extract with --graph or pick another --preset)");
  }
}

// ---- synth ----

struct SynthCmd {
  std::string preset = "paper-shape";
  std::uint64_t seed = 7;
  std::string out;

  void add(CLI::App& app) {
    auto* cmd = app.add_subcommand("synth", "Generate a labeled synthetic corpus");
    cmd->add_option("--preset", preset, "Family set: paper-shape|separated")->capture_default_str();
    cmd->add_option("--seed", seed, "Corpus seed")->capture_default_str();
    cmd->add_option("-o,--out", out, "Output directory")->required();
    cmd->callback([this] { run(); });
  }

  void run() const {
    synth::SynthCorpusConfig cfg;
    try {
      cfg = synth::preset(preset, seed);
    } catch (const ConfigError& e) {
      throw UsageError(std::string("--preset: ") + e.what());
    }
    const auto summary = synth::generate_corpus(cfg, out);
    log::info("wrote {} files ({} bytes) under {}", summary.files, summary.total_bytes, out);
  }
};

// ---- extract ----

struct ExtractCmd {
  std::string root;
  std::string labels;
  std::string out;
  unsigned workers = 1;
  ExtractFlags ex;
  std::string config_path;
  CLI::App* cmd = nullptr;

  void add(CLI::App& app) {
    cmd = app.add_subcommand("extract", "Turn a labeled corpus into entropy graphs and a manifest");
    cmd->add_option("root", root, "Corpus directory")->required();
    cmd->add_option("--labels", labels, "Labels CSV (default: <root>/labels.csv)");
    cmd->add_option("-o,--out", out, "Output directory for .egr files and manifest.jsonl")->required();
    cmd->add_option("--workers", workers, "Extraction threads")->capture_default_str();
    cmd->add_option("--config", config_path, "key=value file (segment_len, graph_h, graph_w, fill_policy)");
    ex.add(cmd);
    cmd->callback([this] { run(); });
  }

  void run() const {
    std::map<std::string, std::string> file;
    if (!config_path.empty()) file = training::read_key_value_file(config_path);
    const auto cfg = ex.resolve(file, cmd);
    if (workers == 0) throw UsageError("--workers must be >= 1");
    const fs::path labels_path = labels.empty() ? fs::path(root) / "labels.csv" : fs::path(labels);
    const auto manifest = extract_corpus(root, labels_path, cfg, out, workers);
    for (const auto& s : manifest.skipped) log::warn("skipped: {}", s);
  }
};

// ---- train ----

struct TrainCmd {
  std::string data;
  std::string out;
  std::string preset = "desk";
  bool no_holdout = false;
  TrainFlags tf;
  CLI::App* cmd = nullptr;

  void add(CLI::App& app) {
    cmd = app.add_subcommand("train", "Train a model on an extracted manifest");
    cmd->add_option("manifest", data, "manifest.jsonl or the directory holding it")->required();
    cmd->add_option("-o,--out", out, "Output directory (model.ntc, loss_history.csv, split.json)")->required();
    cmd->add_option("--preset", preset, "Model scale: desk|paper")->capture_default_str();
    cmd->add_flag("--no-holdout", no_holdout, "Train on every sample; no validation split");
    tf.add(cmd);
    cmd->callback([this] { run(); });
  }

  void run() const {
    const auto tc = tf.resolve(tf.file_values(), cmd);
    const auto mpath = manifest_path(data);
    const auto ds = training::load_dataset(mpath);
    const auto enc = model_preset(preset, ds.n_classes());
    check_graphs(ds, enc, mpath);
    create_dir(out);

    training::Dataset train_side = ds, test_side;
    test_side.family_names = ds.family_names;
    if (!no_holdout) std::tie(train_side, test_side) = training::stratified_split(ds, tc.split_ratio, synth::mix_seed(tc.seed, 11));
    const auto prepared = training::prepare_training_set(train_side, tc, synth::mix_seed(tc.seed, 13));
    log::info("training on {} samples ({} augmented), {} held out", prepared.size(), prepared.size() - train_side.size(),
              test_side.size());
    const auto result = training::train(prepared, tc, enc, no_holdout ? nullptr : &test_side);

    nn::save_checkpoint(result.checkpoint, fs::path(out) / "model.ntc");
    training::write_loss_history(fs::path(out) / "loss_history.csv", result.history);
    json split;
    split["manifest"] = fs::absolute(mpath).lexically_normal().string();
    split["seed"] = tc.seed;
    split["split_ratio"] = no_holdout ? 1.0 : tc.split_ratio;
    split["train"] = json::array();
    split["test"] = json::array();
    for (const auto& s : train_side.samples) split["train"].push_back(s.id);
    for (const auto& s : test_side.samples) split["test"].push_back(s.id);
    const fs::path split_path = fs::path(out) / "split.json";
    std::ofstream so(split_path, std::ios::trunc);
    if (!so) throw IoError(split_path, "cannot open for writing");
    so << split.dump(2) << '\n';
    log::info("final train loss {:.5f}; wrote {}", result.history.back().train_loss, (fs::path(out) / "model.ntc").string());
  }
};

// ---- classify ----

struct ClassifyCmd {
  std::string model;
  std::string input;
  std::string out;
  ExtractFlags ex;
  CLI::App* cmd = nullptr;

  void add(CLI::App& app) {
    cmd = app.add_subcommand("classify", "Print class probabilities as JSON lines");
    cmd->add_option("checkpoint", model, ".ntc model")->required();
    cmd->add_option("input", input, "Raw file, .egr graph, manifest.jsonl, or directory of raw files")->required();
    cmd->add_option("-o,--out", out, "Write JSON lines here instead of stdout");
    cmd->add_option("--segment-len", ex.segment_len, "Bytes per entropy segment (raw inputs)")->capture_default_str();
    cmd->add_option("--fill", ex.fill, "Stream-to-graph policy for raw inputs: resample|pad")->capture_default_str();
    cmd->callback([this] { run(); });
  }

  void run() const {
    const auto ckpt = nn::load_checkpoint(model);
    const eval::Classifier clf(ckpt);
    ExtractConfig ec;
    try {
      ec.segment_len = ex.segment_len;
      ec.fill_policy = parse_fill_policy(ex.fill);
      ec.graph_h = clf.config().input_h;
      ec.graph_w = clf.config().input_w;
      ec.validate();
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }

    std::vector<EntropyGraph> graphs;
    const fs::path in(input);
    auto add_raw = [&](const fs::path& p, const std::string& id) {
      auto x = extract_file(p, ec);
      x.graph.sample_id = id;
      graphs.push_back(std::move(x.graph));
    };
    if (fs::is_directory(in) && fs::exists(in / kManifestName)) {
      const auto ds = training::load_dataset(in / kManifestName, &ckpt.family_names);
      for (const auto& s : ds.samples) graphs.push_back(s.graph);
    } else if (fs::is_directory(in)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::recursive_directory_iterator(in)) {
        if (e.is_regular_file()) files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& p : files) add_raw(p, fs::relative(p, in).generic_string());
    } else if (in.extension() == ".jsonl") {
      const auto ds = training::load_dataset(in, &ckpt.family_names);
      for (const auto& s : ds.samples) graphs.push_back(s.graph);
    } else if (in.extension() == ".egr") {
      graphs.push_back(read_egr(in));
    } else {
      add_raw(in, in.filename().string());
    }

    std::ofstream file;
    if (!out.empty()) {
      file.open(out, std::ios::trunc);
      if (!file) throw IoError(out, "cannot open for writing");
    }
    std::ostream& os = out.empty() ? std::cout : file;
    const auto& names = ckpt.family_names;
    for (const auto& g : graphs) {
      const auto p = clf.predict(g);
      std::size_t best = 0;
      for (std::size_t c = 1; c < p.size(); ++c) {
        if (p[c] > p[best]) best = c;
      }
      json row;
      row["id"] = g.sample_id;
      row["predicted"] = names[best];
      json probs = json::object();
      for (std::size_t c = 0; c < p.size(); ++c) probs[names[c]] = p[c];
      row["probabilities"] = probs;
      if (!g.warnings.empty()) row["warnings"] = g.warnings;
      os << row.dump() << '\n';
    }
  }
};

// ---- evaluate ----

struct EvaluateCmd {
  std::string model;
  std::string data;
  std::string split_file;
  std::string out;

  void add(CLI::App& app) {
    auto* cmd = app.add_subcommand("evaluate", "Score a manifest: report.json, cm.csv, embeddings.csv");
    cmd->add_option("checkpoint", model, ".ntc model")->required();
    cmd->add_option("manifest", data, "manifest.jsonl or the directory holding it")->required();
    cmd->add_option("--split-file", split_file, "split.json from train; restricts scoring to its test ids");
    cmd->add_option("-o,--out", out, "Output directory")->required();
    cmd->callback([this] { run(); });
  }

  void run() const {
    const auto ckpt = nn::load_checkpoint(model);
    auto ds = training::load_dataset(manifest_path(data), &ckpt.family_names);
    if (!split_file.empty()) {
      std::ifstream in(split_file);
      if (!in) throw IoError(split_file, "cannot open split file");
      std::set<std::string> keep;
      try {
        const json split = json::parse(in);
        for (const auto& id : split.at("test")) keep.insert(id.get<std::string>());
      } catch (const json::exception& e) {
        throw FormatError(split_file + ": " + e.what());
      }
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < ds.size(); ++i) {
        if (keep.count(ds.samples[i].id)) idx.push_back(i);
      }
      if (idx.empty()) throw UsageError(split_file + ": no test ids match the manifest");
      ds = ds.subset(idx);
    }
    const auto report = eval::evaluate(ckpt, ds);
    eval::export_report(report, out);
    eval::export_embeddings(ckpt, ds, fs::path(out) / "embeddings.csv");
    log::info("{} samples  weighted F1 {:.4f}  macro AUC {:.4f}  micro AUC {:.4f}", ds.size(), report.weighted.f1,
              report.auc.macro, report.auc.micro);
  }
};

// ---- experiment ----

struct ExperimentCmd {
  std::string data;
  std::string out;
  std::string preset = "desk";
  std::size_t reps = 30;
  std::size_t workers = 1;
  std::string ratios;
  bool no_bootstrap = false;
  TrainFlags tf;
  CLI::App* cmd = nullptr;

  void add(CLI::App& app) {
    cmd = app.add_subcommand("experiment", "Bootstrap repetitions and an optional training-ratio sweep");
    cmd->add_option("manifest", data, "manifest.jsonl or the directory holding it")->required();
    cmd->add_option("-o,--out", out, "Output directory")->required();
    cmd->add_option("--preset", preset, "Model scale: desk|paper")->capture_default_str();
    cmd->add_option("--reps", reps, "Repetitions (per ratio when sweeping)")->capture_default_str();
    cmd->add_option("--workers", workers, "Repetitions trained in parallel")->capture_default_str();
    cmd->add_option("--ratios", ratios, "Training-ratio sweep a:b:step, e.g. 0.1:0.9:0.1");
    cmd->add_flag("--no-bootstrap", no_bootstrap, "Re-split only; do not resample the training side");
    tf.add(cmd);
    cmd->callback([this] { run(); });
  }

  void run() const {
    training::ExperimentConfig xc;
    xc.train = tf.resolve(tf.file_values(), cmd);
    if (reps == 0) throw UsageError("--reps must be >= 1");
    if (workers == 0) throw UsageError("--workers must be >= 1");
    std::vector<double> sweep;
    if (!ratios.empty()) {
      try {
        sweep = training::parse_ratio_range(ratios);
      } catch (const ConfigError& e) {
        throw UsageError(e.what());
      }
    }
    const auto mpath = manifest_path(data);
    const auto ds = training::load_dataset(mpath);
    xc.encoder = model_preset(preset, ds.n_classes());
    check_graphs(ds, xc.encoder, mpath);
    xc.repetitions = reps;
    xc.workers = workers;
    xc.bootstrap = !no_bootstrap;
    create_dir(out);

    auto save_rep = [](const fs::path& dir, const training::RepResult& r) {
      char name[32];
      std::snprintf(name, sizeof name, "rep_%03zu", r.rep);
      const fs::path d = dir / name;
      eval::export_report(r.report, d);
      training::write_loss_history(d / "loss_history.csv", r.history);
    };

    if (sweep.empty()) {
      const fs::path reps_dir = fs::path(out) / "reps";
      const auto result =
          training::run_bootstrap_experiment(ds, xc, [&](const training::RepResult& r) { save_rep(reps_dir, r); });
      training::write_repetitions_csv(fs::path(out) / "repetitions.csv", result);
      training::write_summary_csv(fs::path(out) / "summary.csv", result);
      log::info("weighted F1 mean {:.4f} std {:.4f} over {} reps", result.f1.mean, result.f1.std, result.f1.n);
    } else {
      const auto rows = training::run_ratio_sweep(ds, xc, sweep, [&](double ratio, const training::RepResult& r) {
        char name[32];
        std::snprintf(name, sizeof name, "ratio_%.2f", ratio);
        save_rep(fs::path(out) / name, r);
      });
      training::write_sweep_csv(fs::path(out) / "ratio_sweep.csv", rows);
    }
  }
};

}  // namespace

int main(int argc, char** argv) {
  log::init_from_env();
  CLI::App app{"entrosim: entropy-graph malware family classification toolkit"};
  app.require_subcommand(1);
  SynthCmd synth_cmd;
  ExtractCmd extract_cmd;
  TrainCmd train_cmd;
  ClassifyCmd classify_cmd;
  EvaluateCmd evaluate_cmd;
  ExperimentCmd experiment_cmd;
  synth_cmd.add(app);
  extract_cmd.add(app);
  train_cmd.add(app);
  classify_cmd.add(app);
  evaluate_cmd.add(app);
  experiment_cmd.add(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
