#include <doctest.h>

#include <limits>
#include <random>

#include "entrosim/errors.hpp"
#include "entrosim/nn/layers.hpp"
#include "gradcheck.hpp"

using namespace entrosim;
using namespace entrosim::nn;

TEST_CASE("finite-difference gradient suite") {
  for (unsigned seed : {1u, 2u}) {
    for (const auto& r : entrosim::testing::gradient_suite(seed)) {
      INFO(r.name, " seed ", seed, " max rel ", r.max_rel, " at ", r.worst);
      CHECK(r.checked > 0);
      CHECK(r.max_rel < r.tolerance);
    }
  }
}

TEST_CASE("conv2d with a centred delta kernel is the identity plus bias") {
  Tensor<double> x({1, 1, 3, 4}, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
  Tensor<double> w({1, 1, 3, 3});
  w[4] = 1.0;
  Tensor<double> b({1}, std::vector<double>{0.5});
  const auto y = conv2d(x, w, b, "delta");
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i] + 0.5);
}

TEST_CASE("conv2d zero-pads the border") {
  Tensor<double> x({1, 1, 2, 2}, std::vector<double>{1, 1, 1, 1});
  Tensor<double> w({1, 1, 3, 3}, 1.0);
  Tensor<double> b({1});
  const auto y = conv2d(x, w, b, "box");
  for (std::size_t i = 0; i < 4; ++i) CHECK(y[i] == 4.0);
}

TEST_CASE("maxpool2 routes ties to the first element in scan order and floors odd sizes") {
  Tensor<double> x({1, 1, 3, 4}, std::vector<double>{2, 2, 0, 1,  //
                                                     2, 2, 1, 0,  //
                                                     9, 9, 9, 9});
  const auto r = maxpool2(x);
  CHECK(r.output.shape() == Shape{1, 1, 1, 2});
  CHECK(r.output[0] == 2.0);
  CHECK(r.output[1] == 1.0);
  CHECK(r.argmax[0] == 0);
  CHECK(r.argmax[1] == 3);
  Tensor<double> g({1, 1, 1, 2}, std::vector<double>{1.0, 2.0});
  const auto gi = maxpool2_grad(g, r.argmax, x.shape());
  CHECK(gi[0] == 1.0);
  CHECK(gi[1] == 0.0);
  CHECK(gi[3] == 2.0);
  CHECK(gi[6] == 0.0);
  Tensor<double> tiny({1, 1, 1, 4});
  CHECK_THROWS(maxpool2(tiny));
}

TEST_CASE("relu derivative is zero at the kink") {
  Tensor<double> x({4}, std::vector<double>{-1.0, 0.0, 1e-300, 2.0});
  Tensor<double> g({4}, 1.0);
  const auto d = relu_grad(x, g);
  CHECK(d[0] == 0.0);
  CHECK(d[1] == 0.0);
  CHECK(d[2] == 1.0);
  CHECK(d[3] == 1.0);
  CHECK(relu(x)[0] == 0.0);
}

TEST_CASE("dense matches a hand product") {
  Tensor<double> x({1, 2}, std::vector<double>{1.0, 2.0});
  Tensor<double> w({2, 2}, std::vector<double>{1.0, -1.0, 0.5, 0.25});
  Tensor<double> b({2}, std::vector<double>{0.0, 1.0});
  const auto y = dense(x, w, b, "fc");
  CHECK(y[0] == -1.0);
  CHECK(y[1] == 2.0);
}

TEST_CASE("shape errors name the layer") {
  Tensor<float> x({1, 2, 4, 4});
  Tensor<float> w({3, 1, 3, 3});
  Tensor<float> b({3});
  try {
    conv2d(x, w, b, "enc.block1.conv1");
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("enc.block1.conv1") != std::string::npos);
  }
  Tensor<float> xd({2, 5});
  Tensor<float> wd({3, 4});
  Tensor<float> bd({3});
  CHECK_THROWS_AS(dense(xd, wd, bd, "head.fc1"), ShapeError);
}

TEST_CASE("float and double layers agree to float precision") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  Tensor<double> x({2, 2, 6, 6}), w({3, 2, 3, 3}), b({3});
  for (auto* t : {&x, &w, &b}) {
    for (auto& v : t->storage()) v = u(rng);
  }
  const auto yd = conv2d(x, w, b, "c");
  const auto yf = conv2d(x.cast<float>(), w.cast<float>(), b.cast<float>(), "c");
  for (std::size_t i = 0; i < yd.size(); ++i) CHECK(std::abs(yd[i] - static_cast<double>(yf[i])) < 1e-5);
}

TEST_CASE("check_finite trips on NaN and Inf") {
  Tensor<float> t({3}, std::vector<float>{1.0f, std::numeric_limits<float>::quiet_NaN(), 0.0f});
  CHECK_THROWS_AS(t.check_finite("t"), NumericError);
  t[1] = std::numeric_limits<float>::infinity();
  CHECK_THROWS_AS(t.check_finite("t"), NumericError);
  t[1] = 2.0f;
  CHECK_NOTHROW(t.check_finite("t"));
}
