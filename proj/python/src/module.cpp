#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "entrosim/corpus.hpp"
#include "entrosim/egr_io.hpp"
#include "entrosim/entropy.hpp"
#include "entrosim/errors.hpp"
#include "entrosim/evaluation.hpp"
#include "entrosim/metrics.hpp"
#include "entrosim/nn/checkpoint.hpp"
#include "entrosim/synth.hpp"
#include "entrosim/training.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace entrosim;

namespace {

std::span<const std::uint8_t> as_bytes(const py::bytes& b, std::string& holder) {
  holder = b;
  return {reinterpret_cast<const std::uint8_t*>(holder.data()), holder.size()};
}

ExtractConfig extract_config(std::size_t segment_len, std::size_t h, std::size_t w, const std::string& fill) {
  ExtractConfig c;
  c.segment_len = segment_len;
  c.graph_h = h;
  c.graph_w = w;
  c.fill_policy = parse_fill_policy(fill);
  c.validate();
  return c;
}

py::array_t<double> graph_array(const EntropyGraph& g) {
  py::array_t<double> a({g.height, g.width});
  std::copy(g.cells.begin(), g.cells.end(), a.mutable_data());
  return a;
}

EntropyGraph graph_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw ShapeError("graph array must be 2-D");
  EntropyGraph g;
  g.height = static_cast<std::size_t>(a.shape(0));
  g.width = static_cast<std::size_t>(a.shape(1));
  g.cells.assign(a.data(), a.data() + a.size());
  return g;
}

py::object report_dict(const eval::EvalReport& r) {
  return py::module_::import("json").attr("loads")(eval::report_to_json(r));
}

class PyClassifier {
 public:
  explicit PyClassifier(const fs::path& path) : ckpt_(nn::load_checkpoint(path)), clf_(ckpt_) {}

  std::vector<std::string> families() const { return ckpt_.family_names; }
  std::pair<std::size_t, std::size_t> input_shape() const { return {clf_.config().input_h, clf_.config().input_w}; }

  py::array_t<double> predict(const py::array_t<double, py::array::c_style | py::array::forcecast>& graph) const {
    const auto g = graph_from_array(graph);
    const auto p = clf_.predict(g);
    py::array_t<double> out(static_cast<py::ssize_t>(p.size()));
    std::copy(p.begin(), p.end(), out.mutable_data());
    return out;
  }

  py::array_t<double> embed(const py::array_t<double, py::array::c_style | py::array::forcecast>& graph) const {
    const auto g = graph_from_array(graph);
    const auto z = clf_.embed_batch({&g});
    py::array_t<double> out(static_cast<py::ssize_t>(z.size()));
    std::copy(z.begin(), z.end(), out.mutable_data());
    return out;
  }

  py::object evaluate(const fs::path& manifest) const {
    const auto ds = training::load_dataset(manifest, &ckpt_.family_names);
    return report_dict(eval::evaluate(ckpt_, ds));
  }

 private:
  nn::Checkpoint ckpt_;
  eval::Classifier clf_;
};

}  // namespace

PYBIND11_MODULE(_entrosim, m) {
  m.doc() = "Entropy-graph extraction, Siamese center-loss training and evaluation";

  py::register_exception<Error>(m, "EntrosimError", PyExc_RuntimeError);

  m.def(
      "segment_entropy",
      [](const py::bytes& data) {
        std::string h;
        return segment_entropy(as_bytes(data, h));
      },
      py::arg("data"), "Shannon entropy (bits per byte) of one segment.");

  m.def(
      "entropy_stream",
      [](const py::bytes& data, std::size_t segment_len) {
        std::string h;
        ExtractConfig c;
        c.segment_len = segment_len;
        return entropy_stream(as_bytes(data, h), c).values;
      },
      py::arg("data"), py::arg("segment_len") = 200);

  m.def(
      "entropy_graph",
      [](const std::vector<double>& stream, std::size_t height, std::size_t width, const std::string& fill) {
        EntropyStream s;
        s.values = stream;
        return graph_array(build_entropy_graph(s, extract_config(200, height, width, fill)));
      },
      py::arg("stream"), py::arg("height") = 64, py::arg("width") = 64, py::arg("fill") = "resample");

  m.def(
      "extract_file",
      [](const fs::path& path, std::size_t segment_len, std::size_t height, std::size_t width, const std::string& fill) {
        return graph_array(extract_file(path, extract_config(segment_len, height, width, fill)).graph);
      },
      py::arg("path"), py::arg("segment_len") = 200, py::arg("height") = 64, py::arg("width") = 64,
      py::arg("fill") = "resample");

  m.def("read_egr", [](const fs::path& path) { return graph_array(read_egr(path)); }, py::arg("path"));
  m.def(
      "write_egr",
      [](const fs::path& path, const py::array_t<double, py::array::c_style | py::array::forcecast>& graph) {
        write_egr(path, graph_from_array(graph));
      },
      py::arg("path"), py::arg("graph"));

  m.def(
      "generate_corpus",
      [](const fs::path& out_dir, const std::string& preset, std::uint64_t seed) {
        const auto s = synth::generate_corpus(synth::preset(preset, seed), out_dir);
        return py::dict(py::arg("files") = s.files, py::arg("total_bytes") = s.total_bytes);
      },
      py::arg("out_dir"), py::arg("preset") = "paper-shape", py::arg("seed") = 7);

  m.def(
      "extract_corpus",
      [](const fs::path& root, const fs::path& out_dir, std::optional<fs::path> labels, std::size_t segment_len,
         std::size_t height, std::size_t width, const std::string& fill, unsigned workers) {
        const auto cfg = extract_config(segment_len, height, width, fill);
        py::gil_scoped_release release;
        const auto m = extract_corpus(root, labels ? *labels : root / "labels.csv", cfg, out_dir, workers);
        return m.rows.size();
      },
      py::arg("root"), py::arg("out_dir"), py::arg("labels") = py::none(), py::arg("segment_len") = 200,
      py::arg("height") = 64, py::arg("width") = 64, py::arg("fill") = "resample", py::arg("workers") = 1,
      "Extracts a labeled corpus; returns the number of manifest rows.");

  m.def(
      "train",
      [](const fs::path& manifest, const fs::path& checkpoint, std::size_t epochs, std::size_t batch_size, double lr,
         double alpha, std::uint64_t seed, double split_ratio, const std::string& preset) {
        training::TrainConfig tc;
        tc.epochs = epochs;
        tc.batch_size = batch_size;
        tc.lr = lr;
        tc.alpha = alpha;
        tc.seed = seed;
        tc.split_ratio = split_ratio;
        tc.validate();
        const auto ds = training::load_dataset(manifest);
        auto enc = preset == "paper" ? nn::EncoderConfig::paper(ds.n_classes()) : nn::EncoderConfig::desk(ds.n_classes());
        training::TrainResult result;
        eval::EvalReport report;
        {
          py::gil_scoped_release release;
          auto [train_side, test_side] = training::stratified_split(ds, tc.split_ratio, tc.seed);
          const auto prepared = training::prepare_training_set(train_side, tc, synth::mix_seed(tc.seed, 13));
          result = training::train(prepared, tc, enc, &test_side);
          nn::save_checkpoint(result.checkpoint, checkpoint);
          report = eval::evaluate(result.checkpoint, test_side);
        }
        py::list history;
        for (const auto& h : result.history) {
          history.append(py::dict(py::arg("epoch") = h.epoch, py::arg("train_loss") = h.train_loss,
                                  py::arg("val_loss") = h.val_loss, py::arg("softmax_loss") = h.softmax_loss,
                                  py::arg("center_loss") = h.center_loss));
        }
        return py::make_tuple(history, report_dict(report));
      },
      py::arg("manifest"), py::arg("checkpoint"), py::arg("epochs") = 50, py::arg("batch_size") = 24,
      py::arg("lr") = 1e-4, py::arg("alpha") = 0.3, py::arg("seed") = 0, py::arg("split_ratio") = 0.8,
      py::arg("preset") = "desk",
      "Splits, trains, saves the checkpoint; returns (loss history, held-out report).");

  py::class_<PyClassifier>(m, "Classifier")
      .def(py::init<const fs::path&>(), py::arg("checkpoint"))
      .def_property_readonly("families", &PyClassifier::families)
      .def_property_readonly("input_shape", &PyClassifier::input_shape)
      .def("predict", &PyClassifier::predict, py::arg("graph"))
      .def("embed", &PyClassifier::embed, py::arg("graph"))
      .def("evaluate", &PyClassifier::evaluate, py::arg("manifest"));

  m.def(
      "confusion_matrix",
      [](const std::vector<int>& predictions, const std::vector<int>& truths, std::size_t k) {
        const auto cm = eval::confusion_matrix(predictions, truths, k);
        py::array_t<std::int64_t> a({k, k});
        std::copy(cm.counts.begin(), cm.counts.end(), a.mutable_data());
        return a;
      },
      py::arg("predictions"), py::arg("truths"), py::arg("k"));

  m.def(
      "prf_per_class",
      [](const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& counts) {
        if (counts.ndim() != 2 || counts.shape(0) != counts.shape(1)) throw ShapeError("confusion matrix must be K x K");
        eval::ConfusionMatrix cm(static_cast<std::size_t>(counts.shape(0)));
        std::copy(counts.data(), counts.data() + counts.size(), cm.counts.begin());
        py::list out;
        for (const auto& c : eval::prf_per_class(cm)) {
          out.append(py::dict(py::arg("recall") = c.recall, py::arg("precision") = c.precision, py::arg("f1") = c.f1,
                              py::arg("support") = c.support));
        }
        return out;
      },
      py::arg("cm"));

  m.def(
      "roc_auc",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& scores, const std::vector<int>& truths) {
        if (scores.ndim() != 2) throw ShapeError("scores must be N x K");
        const auto n = static_cast<std::size_t>(scores.shape(0)), k = static_cast<std::size_t>(scores.shape(1));
        const auto r = eval::roc_auc({scores.data(), n * k}, n, k, truths);
        return py::dict(py::arg("per_class") = r.per_class, py::arg("micro") = r.micro, py::arg("macro") = r.macro);
      },
      py::arg("scores"), py::arg("truths"));
}
