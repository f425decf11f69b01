#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hdsrnn/errors.hpp"
#include "hdsrnn/grad_check.hpp"
#include "hdsrnn/layers.hpp"
#include "oracles.hpp"

using namespace hdsrnn;
using namespace hdsrnn::nn;
using ad::Shape;
using ad::Tape;

TEST_CASE("lstm_step zero algebra") {
  ParameterSet params;
  Rng rng(1);
  const LstmCell cell = LstmCell::create(params, "cell", 2, 3, rng);
  for (Tensor& t : params.values()) std::fill(t.values().begin(), t.values().end(), 0.0);
  Tape tape;
  const auto bound = params.bind(tape);
  const auto zeros = [&](std::size_t n) { return tape.constant(Tensor(Shape{n})); };
  const LstmState st = lstm_step(cell, bound, zeros(2), zeros(3), zeros(3));
  CHECK(st.h.value() == Tensor(Shape{3}));
  CHECK(st.s.value() == Tensor(Shape{3}));
}

TEST_CASE("lstm_step forget gate saturation keeps the cell state") {
  ParameterSet params;
  Rng rng(1);
  const LstmCell cell = LstmCell::create(params, "cell", 2, 3, rng);
  for (Tensor& t : params.values()) std::fill(t.values().begin(), t.values().end(), 0.0);
  for (std::size_t i = 3; i < 6; ++i) params.value(cell.bias)[i] = 10.0;
  Tape tape;
  const auto bound = params.bind(tape);
  const Var s_prev = tape.constant(Tensor::vector({500.0, 1e3, 2e4}));
  const LstmState st = lstm_step(cell, bound, tape.constant(Tensor(Shape{2})), tape.constant(Tensor(Shape{3})), s_prev);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(st.s.value()[i] == doctest::Approx(s_prev.value()[i]).epsilon(1e-4));
  }
}

TEST_CASE("lstm_step matches scalar LSTM oracle") {
  std::mt19937_64 rng(42);
  ParameterSet params;
  Rng init(3);
  const LstmCell cell = LstmCell::create(params, "cell", 2, 3, init);
  const auto w = oracle::random_mat(12, 5, rng);
  const auto b = oracle::random_vec(12, rng);
  params.value(cell.weight) = Tensor::matrix(12, 5, oracle::flatten(w));
  params.value(cell.bias) = Tensor::vector(b);
  const auto x = oracle::random_vec(2, rng), h = oracle::random_vec(3, rng), s = oracle::random_vec(3, rng);
  Tape tape;
  const auto bound = params.bind(tape);
  const LstmState st = lstm_step(cell, bound, tape.constant(Tensor::vector(x)), tape.constant(Tensor::vector(h)),
                                 tape.constant(Tensor::vector(s)));
  const auto ref = oracle::lstm(w, b, x, h, s);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(std::abs(st.h.value()[i] - ref.h[i]) < 1e-12);
    CHECK(std::abs(st.s.value()[i] - ref.s[i]) < 1e-12);
  }
  CHECK_THROWS_AS(lstm_step(cell, bound, tape.constant(Tensor(Shape{3})), tape.constant(Tensor::vector(h)),
                            tape.constant(Tensor::vector(s))),
                  DimensionError);
}

TEST_CASE("lstm_step gradients for weights, input and states") {
  Rng init(5);
  ParameterSet params;
  const LstmCell cell = LstmCell::create(params, "cell", 2, 3, init);
  std::mt19937_64 rng(6);
  std::vector<Tensor> values = params.values();
  values.push_back(Tensor::vector(oracle::random_vec(2, rng)));
  values.push_back(Tensor::vector(oracle::random_vec(3, rng)));
  values.push_back(Tensor::vector(oracle::random_vec(3, rng)));
  const auto target = oracle::random_vec(3, rng);
  const std::vector<std::string> names = {"weight", "bias", "x", "h_prev", "s_prev"};
  const auto report = ad::grad_check(
      [&](Tape& tape, std::span<const Var> p) {
        const LstmState st = lstm_step(cell, p.first(2), p[2], p[3], p[4]);
        return ad::mse_loss(ad::concat(st.h, st.s), tape.constant(Tensor::vector(
                                                        {target[0], target[1], target[2], 0.1, 0.2, 0.3})));
      },
      values, names);
  for (const auto& e : report.entries) INFO(e.name, " ", e.max_relative_error);
  CHECK(report.passed);
}

TEST_CASE("hidden state stays inside the tanh envelope") {
  std::mt19937_64 rng(8);
  Rng init(8);
  ParameterSet params;
  const LstmCell cell = LstmCell::create(params, "cell", 4, 5, init);
  for (Tensor& t : params.values())
    for (double& v : t.values()) v *= 5.0;
  Tape tape;
  const auto bound = params.bind(tape);
  Var h = tape.constant(Tensor(Shape{5})), s = tape.constant(Tensor(Shape{5}));
  for (int step = 0; step < 200; ++step) {
    const LstmState st = lstm_step(cell, bound, tape.constant(Tensor::vector(oracle::random_vec(4, rng, -10, 10))), h, s);
    h = st.h;
    s = st.s;
    for (double v : h.value().values()) CHECK(std::abs(v) <= 1.0);
  }
}

TEST_CASE("LstmStack feeds each layer from the one below") {
  Rng init(4);
  ParameterSet params;
  const LstmStack stack = LstmStack::create(params, "enc", 3, 4, 2, init);
  CHECK(stack.layers[1].input_dim == 4);
  Tape tape;
  const auto bound = params.bind(tape);
  auto state = stack.zero_state(tape);
  const Var x = tape.constant(Tensor::vector({0.1, -0.2, 0.3}));
  const LstmState top = stack.step(bound, x, state);
  const LstmState first = lstm_step(stack.layers[0], bound, x, tape.constant(Tensor(Shape{4})),
                                    tape.constant(Tensor(Shape{4})));
  const LstmState second = lstm_step(stack.layers[1], bound, first.h, tape.constant(Tensor(Shape{4})),
                                     tape.constant(Tensor(Shape{4})));
  CHECK(top.h.value() == second.h.value());
}

TEST_CASE("affine") {
  ParameterSet params;
  Rng init(1);
  const AffineLayer layer = AffineLayer::create(params, "fc", 3, 3, init);
  Tape tape;
  const Var x = tape.constant(Tensor::vector({1.5, -2.0, 0.25}));
  SUBCASE("identity") {
    params.value(layer.weight) = Tensor::identity(3);
    const auto bound = params.bind(tape);
    CHECK(affine(layer, bound, x).value() == x.value());
  }
  SUBCASE("zero weight gives bias") {
    params.value(layer.weight) = Tensor(Shape{3, 3});
    params.value(layer.bias) = Tensor::vector({4, 5, 6});
    const auto bound = params.bind(tape);
    CHECK(affine(layer, bound, x).value() == Tensor::vector({4, 5, 6}));
  }
  SUBCASE("random against loop") {
    std::mt19937_64 rng(12);
    const auto w = oracle::random_mat(3, 3, rng);
    const auto b = oracle::random_vec(3, rng);
    params.value(layer.weight) = Tensor::matrix(3, 3, oracle::flatten(w));
    params.value(layer.bias) = Tensor::vector(b);
    const auto bound = params.bind(tape);
    const Tensor got = affine(layer, bound, x).value();
    for (std::size_t i = 0; i < 3; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < 3; ++j) acc += w[i][j] * x.value()[j];
      CHECK(got[i] == acc + b[i]);
    }
    CHECK_THROWS_AS(affine(layer, bound, tape.constant(Tensor(Shape{2}))), DimensionError);
  }
}

TEST_CASE("dropout") {
  Rng rng(99);
  Tape tape;
  const Var x = tape.constant(Tensor(Shape{100000}, 1.0));
  CHECK(dropout({0.0, true}, x, rng).value() == x.value());
  CHECK(dropout({0.7, false}, x, rng).value() == x.value());
  const Tensor y = dropout({0.5, true}, x, rng).value();
  double mean = 0.0;
  std::size_t zeros = 0;
  for (double v : y.values()) {
    mean += v;
    zeros += v == 0.0;
    CHECK((v == 0.0 || v == 2.0));
  }
  mean /= static_cast<double>(y.size());
  CHECK(std::abs(mean - 1.0) < 0.02);
  CHECK(zeros > 0);
  CHECK_THROWS_AS(dropout({1.0, true}, x, rng), ConfigError);
  CHECK_THROWS_AS(dropout({-0.1, false}, x, rng), ConfigError);
}

TEST_CASE("dropout preserves the expectation elementwise") {
  Rng rng(7);
  const Tensor base = Tensor::vector({0.5, -1.0, 3.0});
  std::vector<double> acc(3, 0.0);
  const int trials = 40000;
  for (int i = 0; i < trials; ++i) {
    Tape tape;
    const Tensor y = dropout({0.3, true}, tape.constant(base), rng).value();
    for (std::size_t k = 0; k < 3; ++k) acc[k] += y[k];
  }
  for (std::size_t k = 0; k < 3; ++k) CHECK(acc[k] / trials == doctest::Approx(base[k]).epsilon(0.03));
}

TEST_CASE("ParameterSet") {
  ParameterSet p;
  p.add("a", Tensor::vector({1, 2}));
  CHECK_THROWS_AS(p.add("a", Tensor::vector({1})), ConfigError);
  CHECK(p.index_of("a") == 0);
  CHECK_THROWS_AS(p.index_of("b"), ConfigError);
  CHECK(p.scalar_count() == 2);
}
