#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <random>

#include "entrosim/errors.hpp"
#include "entrosim/experiment.hpp"
#include "entrosim/training.hpp"
#include "fixtures.hpp"

using namespace entrosim;
using namespace entrosim::training;
using entrosim::testing::TempDir;

namespace {

nn::EncoderConfig toy_encoder() {
  nn::EncoderConfig c;
  c.input_h = 8;
  c.input_w = 8;
  c.blocks = {{1, 4}, {1, 4}};
  c.fc1_units = 16;
  c.embed_units = 8;
  return c;
}

// Low-entropy graphs for class 0, high-entropy for class 1, with noise.
Dataset two_class(std::size_t per_class, std::uint64_t seed) {
  Dataset ds;
  ds.family_names = {"low", "high"};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.3);
  for (int c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      Sample s;
      s.id = ds.family_names[c] + std::to_string(i);
      s.label = c;
      s.graph.height = 8;
      s.graph.width = 8;
      for (std::size_t k = 0; k < 64; ++k) {
        const double base = c == 0 ? 2.0 + (k % 8) * 0.1 : 7.0 - (k / 8) * 0.1;
        s.graph.cells.push_back(std::clamp(base + noise(rng), 0.0, 8.0));
      }
      ds.samples.push_back(std::move(s));
    }
  }
  return ds;
}

TrainConfig toy_train_config() {
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.batch_size = 8;
  cfg.lr = 1e-3;
  cfg.seed = 3;
  return cfg;
}

}  // namespace

TEST_CASE("training on a separable toy set cuts the loss by 90 percent") {
  const auto ds = two_class(16, 1);
  const auto result = train(ds, toy_train_config(), toy_encoder());
  REQUIRE(result.history.size() == 50);
  const double first = result.history.front().train_loss;
  const double last = result.history.back().train_loss;
  INFO("first ", first, " last ", last);
  CHECK(last <= 0.1 * first);
  CHECK(std::isnan(result.history.front().val_loss));
  CHECK(result.checkpoint.family_names == ds.family_names);
  CHECK(result.checkpoint.encoder.n_classes == 2);
  for (auto c : result.checkpoint.bank.counts) CHECK(c > 0);
}

TEST_CASE("with alpha = 0 the center step has no effect on the trajectory") {
  const auto ds = two_class(6, 2);
  auto a = toy_train_config();
  a.epochs = 4;
  a.alpha = 0.0;
  auto b = a;
  b.gamma_center = 0.05;
  const auto ra = train(ds, a, toy_encoder());
  const auto rb = train(ds, b, toy_encoder());
  for (std::size_t e = 0; e < ra.history.size(); ++e) {
    CHECK(ra.history[e].train_loss == rb.history[e].train_loss);
    CHECK(ra.history[e].train_loss == ra.history[e].softmax_loss);
  }
  CHECK(ra.checkpoint.params == rb.checkpoint.params);
  CHECK(ra.checkpoint.bank.centers != rb.checkpoint.bank.centers);
}

TEST_CASE("same seed gives a bit-identical checkpoint, a different seed does not") {
  const auto ds = two_class(6, 3);
  auto cfg = toy_train_config();
  cfg.epochs = 3;
  const auto a = train(ds, cfg, toy_encoder());
  const auto b = train(ds, cfg, toy_encoder());
  CHECK(nn::encode_checkpoint(a.checkpoint) == nn::encode_checkpoint(b.checkpoint));
  cfg.seed = 4;
  const auto c = train(ds, cfg, toy_encoder());
  CHECK(nn::encode_checkpoint(a.checkpoint) != nn::encode_checkpoint(c.checkpoint));
}

TEST_CASE("validation loss is reported per epoch") {
  const auto ds = two_class(8, 4);
  const auto [tr, te] = stratified_split(ds, 0.75, 1);
  auto cfg = toy_train_config();
  cfg.epochs = 2;
  const auto r = train(tr, cfg, toy_encoder(), &te);
  for (const auto& h : r.history) CHECK(std::isfinite(h.val_loss));
  TempDir dir("hist");
  write_loss_history(dir / "h.csv", r.history);
  std::ifstream in(dir / "h.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header.rfind("epoch,", 0) == 0);
  std::size_t lines = 0;
  for (std::string l; std::getline(in, l);) lines += !l.empty();
  CHECK(lines == 2);
}

TEST_CASE("non-finite inputs stop training with a NumericError") {
  auto ds = two_class(4, 5);
  for (auto& s : ds.samples) s.graph.cells[0] = std::numeric_limits<double>::infinity();
  auto cfg = toy_train_config();
  cfg.epochs = 1;
  CHECK_THROWS_AS(train(ds, cfg, toy_encoder()), NumericError);
}

TEST_CASE("train config validation and key=value application") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.epochs == 50);
  CHECK(cfg.batch_size == 24);
  CHECK(cfg.lr == 1e-4);
  CHECK(cfg.alpha == 0.3);
  CHECK(cfg.gamma_center == 0.5);
  CHECK(cfg.split_ratio == 0.8);

  cfg.apply({{"epochs", "7"}, {"lr", "0.002"}, {"alpha", "0"}, {"augment_target", "30"}});
  CHECK(cfg.epochs == 7);
  CHECK(cfg.lr == 0.002);
  CHECK(cfg.alpha == 0.0);
  CHECK(cfg.augment_target == 30);
  CHECK_THROWS_AS(cfg.apply({{"epoch", "3"}}), ConfigError);
  CHECK_THROWS_AS(cfg.apply({{"lr", "fast"}}), ConfigError);
  CHECK_THROWS_AS(cfg.apply({{"epochs", "3x"}}), ConfigError);

  for (auto mutate : std::vector<std::function<void(TrainConfig&)>>{
           [](TrainConfig& c) { c.batch_size = 3; }, [](TrainConfig& c) { c.batch_size = 0; },
           [](TrainConfig& c) { c.epochs = 0; }, [](TrainConfig& c) { c.lr = 0; },
           [](TrainConfig& c) { c.alpha = -1; }, [](TrainConfig& c) { c.gamma_center = 0; },
           [](TrainConfig& c) { c.split_ratio = 1.0; },
           [](TrainConfig& c) {
             c.augment_threshold = 50;
             c.augment_target = 10;
           }}) {
    TrainConfig c;
    mutate(c);
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }
}

TEST_CASE("key=value files") {
  TempDir dir("kv");
  {
    std::ofstream out(dir / "c.ini");
    out << "# run settings\n[train]\nepochs = 12\nlr=3e-4  # faster\n\nfill_policy = \"pad\"\n";
  }
  const auto kv = read_key_value_file(dir / "c.ini");
  CHECK(kv.size() == 3);
  CHECK(kv.at("epochs") == "12");
  CHECK(kv.at("lr") == "3e-4");
  CHECK(kv.at("fill_policy") == "pad");
  {
    std::ofstream out(dir / "bad.ini");
    out << "epochs 12\n";
  }
  CHECK_THROWS_AS(read_key_value_file(dir / "bad.ini"), ConfigError);
  CHECK_THROWS_AS(read_key_value_file(dir / "missing.ini"), IoError);
}

TEST_CASE("prepare_training_set applies the median target rule") {
  Dataset ds;
  ds.family_names = {"a", "b", "c"};
  for (int c = 0; c < 3; ++c) {
    const std::size_t n = c == 0 ? 3 : (c == 1 ? 10 : 30);
    for (std::size_t i = 0; i < n; ++i) {
      Sample s;
      s.id = std::to_string(c) + "_" + std::to_string(i);
      s.label = c;
      s.graph.height = 2;
      s.graph.width = 2;
      s.graph.cells = {1.0, 2.0, 3.0, 4.0};
      ds.samples.push_back(s);
    }
  }
  TrainConfig cfg;
  CHECK(prepare_training_set(ds, cfg, 1).counts() == std::vector<std::size_t>{10, 10, 30});
  cfg.augment_target = 15;
  CHECK(prepare_training_set(ds, cfg, 1).counts() == std::vector<std::size_t>{15, 15, 30});
  cfg.augment_threshold = 5;
  CHECK(prepare_training_set(ds, cfg, 1).counts() == std::vector<std::size_t>{15, 10, 30});
}

TEST_CASE("bootstrap experiment over two repetitions") {
  const auto ds = two_class(10, 6);
  ExperimentConfig cfg;
  cfg.train = toy_train_config();
  cfg.train.epochs = 3;
  cfg.encoder = toy_encoder();
  cfg.repetitions = 2;
  std::size_t calls = 0;
  const auto r = run_bootstrap_experiment(ds, cfg, [&](const RepResult&) { ++calls; });
  CHECK(calls == 2);
  REQUIRE(r.reps.size() == 2);
  CHECK(r.reps[0].seed == cfg.train.seed);
  CHECK(r.reps[1].seed == cfg.train.seed + 1);
  CHECK(r.f1.n == 2);
  CHECK(r.f1.mean == doctest::Approx((r.reps[0].report.weighted.f1 + r.reps[1].report.weighted.f1) / 2));
  CHECK(r.reps[0].history.size() == 3);

  cfg.workers = 2;
  const auto r2 = run_bootstrap_experiment(ds, cfg);
  for (std::size_t i = 0; i < 2; ++i) CHECK(r2.reps[i].report.weighted.f1 == r.reps[i].report.weighted.f1);

  TempDir dir("exp");
  write_repetitions_csv(dir / "reps.csv", r);
  write_summary_csv(dir / "summary.csv", r);
  std::ifstream in(dir / "reps.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "rep,seed,weighted_f1,weighted_recall,weighted_precision,auc_micro,auc_macro,accuracy");
}

TEST_CASE("summaries use the sample standard deviation") {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  const auto s = summarize(v);
  CHECK(s.mean == 2.5);
  CHECK(s.std == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-15));
  CHECK(s.min == 1.0);
  CHECK(s.max == 4.0);
  CHECK(s.n == 4);
  const std::vector<double> one{0.7};
  CHECK(summarize(one).std == 0.0);
}

TEST_CASE("ratio ranges") {
  const auto r = parse_ratio_range("0.1:0.9:0.1");
  REQUIRE(r.size() == 9);
  CHECK(r.front() == doctest::Approx(0.1));
  CHECK(r[4] == doctest::Approx(0.5));
  CHECK(r.back() == doctest::Approx(0.9));
  CHECK(parse_ratio_range("0.5:0.5:0.1").size() == 1);
  CHECK_THROWS_AS(parse_ratio_range("0.1:0.9"), ConfigError);
  CHECK_THROWS_AS(parse_ratio_range("0.1:0.9:0"), ConfigError);
  CHECK_THROWS_AS(parse_ratio_range("0:0.9:0.1"), ConfigError);
  CHECK_THROWS_AS(parse_ratio_range("0.9:0.1:0.1"), ConfigError);
}
