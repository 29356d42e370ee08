#include <doctest.h>

#include <cmath>
#include <random>

#include "entrosim/errors.hpp"
#include "entrosim/nn/encoder.hpp"

using namespace entrosim;
using namespace entrosim::nn;

namespace {

EncoderConfig toy_config(std::size_t k = 3) {
  EncoderConfig c;
  c.input_h = 8;
  c.input_w = 8;
  c.blocks = {{1, 3}, {1, 4}};
  c.fc1_units = 6;
  c.embed_units = 5;
  c.n_classes = k;
  return c;
}

Tensor<double> random_batch(const EncoderConfig& c, std::size_t n, std::uint64_t seed) {
  Tensor<double> b({n, 1, c.input_h, c.input_w});
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 8.0);
  for (auto& v : b.storage()) v = u(rng);
  return b;
}

}  // namespace

TEST_CASE("preset layouts") {
  const auto desk = EncoderConfig::desk(11);
  CHECK(desk.input_h == 64);
  CHECK(desk.flat_features() == 32 * 8 * 8);
  const auto desk_layout = parameter_layout(desk);
  CHECK(desk_layout.front().name == "enc.block1.conv1.w");
  CHECK(desk_layout.front().shape == Shape{8, 1, 3, 3});
  CHECK(desk_layout.back().shape == Shape{11});

  const auto paper = EncoderConfig::paper(11);
  CHECK(paper.input_h == 224);
  CHECK(paper.flat_features() == 512 * 7 * 7);
  std::size_t convs = 0;
  for (const auto& b : paper.blocks) convs += b.n_conv;
  CHECK(convs == 13);
  const auto layout = parameter_layout(paper);
  CHECK(layout.size() == 2 * 13 + 6);
  bool saw = false;
  for (const auto& s : layout) {
    if (s.name == "head.embed.w") {
      CHECK(s.shape == Shape{512, 1024});
      saw = true;
    }
  }
  CHECK(saw);
}

TEST_CASE("encoder config validation") {
  auto c = toy_config();
  c.n_classes = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = toy_config();
  c.input_h = 2;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = toy_config();
  c.blocks.clear();
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = toy_config();
  c.blocks[0].filters = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("initialization is seeded and biases start at zero") {
  const auto c = toy_config();
  const auto a = initialize_parameters<double>(c, 5);
  const auto b = initialize_parameters<double>(c, 5);
  const auto d = initialize_parameters<double>(c, 6);
  CHECK(a == b);
  CHECK_FALSE(a == d);
  for (const auto& v : a.at("head.fc1.b").storage()) CHECK(v == 0.0);
  const auto f = initialize_parameters<float>(c, 5);
  CHECK(f.at("head.fc1.w")[3] == static_cast<float>(a.at("head.fc1.w")[3]));
}

TEST_CASE("both branches share one parameter set") {
  auto net = SiameseNet<double>::initialized(toy_config(), 3);
  const auto batch = random_batch(net.config(), 2, 1);
  const auto b0 = net.branch(0);
  const auto b1 = net.branch(1);
  CHECK(&b0.params() == &b1.params());
  CHECK(b0.forward(batch) == b1.forward(batch));
  const auto before = b1.forward(batch);
  b0.params().at("head.embed.b")[0] += 1.0;
  const auto after = b1.forward(batch);
  CHECK(after[0] == doctest::Approx(before[0] + 1.0));
  CHECK(net.params().at("head.embed.b")[0] == 1.0);
}

TEST_CASE("fusing an embedding with itself is the identity") {
  Tensor<double> z({2, 3}, std::vector<double>{0.1, -2.0, 3.3, 7.0, 1e-9, -0.5});
  CHECK(fuse_embeddings(z, z) == z);
  Tensor<double> w({2, 3}, std::vector<double>{0.3, 0.0, 0.7, -7.0, 1e-9, 0.5});
  const auto f = fuse_embeddings(z, w);
  CHECK(f[0] == doctest::Approx(0.2));
  CHECK(f[3] == 0.0);
  Tensor<double> bad({3, 2});
  CHECK_THROWS_AS(fuse_embeddings(z, bad), ShapeError);
}

TEST_CASE("a zeroed logit head gives uniform probabilities") {
  auto net = SiameseNet<double>::initialized(toy_config(4), 9);
  net.params().at("head.logits.w").fill(0.0);
  const auto p = net.probabilities(random_batch(net.config(), 3, 2));
  CHECK(p.shape() == Shape{3, 4});
  for (double v : p.storage()) CHECK(v == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("probabilities are a distribution per row") {
  auto net = SiameseNet<double>::initialized(toy_config(3), 4);
  const auto p = net.probabilities(random_batch(net.config(), 5, 3));
  for (std::size_t i = 0; i < 5; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(p[i * 3 + j] >= 0.0);
      s += p[i * 3 + j];
    }
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
}

TEST_CASE("pair_step without gradients matches the two branch forwards") {
  auto net = SiameseNet<double>::initialized(toy_config(3), 12);
  const auto a = random_batch(net.config(), 4, 5);
  const auto b = random_batch(net.config(), 4, 6);
  const std::vector<int> labels{0, 1, 2, 1};
  auto bank = make_center_bank(3, 5, 1);
  const auto step = net.pair_step(a, b, labels, bank, 0.3, nullptr);
  const auto fused = fuse_embeddings(net.embed(a), net.embed(b));
  CHECK(step.fused == fused);
  CHECK(step.loss.total == doctest::Approx(step.loss.softmax_loss + 0.3 * step.loss.center_loss));
  CHECK_THROWS_AS(net.pair_step(a, random_batch(net.config(), 3, 1), labels, bank, 0.3, nullptr), ShapeError);
}

TEST_CASE("constructing a net from incomplete parameters fails with the missing name") {
  auto params = initialize_parameters<float>(toy_config(), 1);
  ParamSet<float> partial;
  for (const auto& e : params.entries()) {
    if (e.name != "head.fc1.b") partial.add(e.name, e.value);
  }
  try {
    SiameseNet<float> net(toy_config(), partial);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("head.fc1.b") != std::string::npos);
  }
}

TEST_CASE("encoder rejects mis-sized input") {
  auto net = SiameseNet<float>::initialized(toy_config(), 1);
  Tensor<float> wrong({1, 1, 9, 8});
  CHECK_THROWS_AS(net.embed(wrong), ShapeError);
  EntropyGraph g;
  g.sample_id = "odd";
  g.height = 4;
  g.width = 4;
  g.cells.assign(16, 1.0);
  const EntropyGraph* ptrs[] = {&g};
  try {
    make_input_batch<float>(ptrs, net.config());
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("odd") != std::string::npos);
  }
}
