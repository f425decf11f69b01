#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "hdsrnn/errors.hpp"
#include "hdsrnn/training.hpp"
#include "oracles.hpp"

using namespace hdsrnn;
using namespace hdsrnn::train;
using ad::Shape;

namespace {

data::SeriesPanel noisy_panel(std::size_t n, std::size_t length, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.2);
  data::SeriesPanel p;
  for (std::size_t k = 0; k < n; ++k) p.sensors.push_back({"F" + std::to_string(k + 1), data::SensorKind::Flow});
  p.values = Tensor(Shape{n, length});
  for (std::size_t t = 0; t < length; ++t) {
    p.timestamps.push_back(1577836800 + static_cast<std::int64_t>(t) * data::kCadenceSeconds);
    for (std::size_t k = 0; k < n; ++k)
      p.values.at(k, t) = 10.0 + std::sin(2.0 * M_PI * static_cast<double>(t) / (7.0 + static_cast<double>(k))) + noise(rng);
  }
  p.split = data::ratio_split(length);
  return p;
}

nn::ModelConfig tiny_model() {
  nn::ModelConfig c;
  c.sensors = 2;
  c.encoder_length = 5;
  c.decoder_length = 2;
  c.hidden_dim = 4;
  c.dropout = 0.0;
  return c;
}

TrainConfig quick_train() {
  TrainConfig c;
  c.batch_size = 16;
  c.max_epochs = 4;
  c.patience = 2;
  c.learning_rate = 1e-2;
  c.seed = 7;
  return c;
}

const data::Pretreated& dataset() {
  static const data::Pretreated pre = data::pretreat(noisy_panel(2, 48 * 5, 3));
  return pre;
}

}  // namespace

TEST_CASE("adam_step") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    std::vector<Tensor> p = {Tensor::vector({1.0, -2.0}), Tensor::matrix(1, 2, {0.5, 0.25})};
    const auto before = p;
    AdamState s = AdamState::for_parameters(p);
    adam_step(s, p, {Tensor(Shape{2}), Tensor(Shape{1, 2})});
    CHECK(p == before);
    CHECK(s.step == 1);
  }
  SUBCASE("first step moves by about lr whatever the gradient scale") {
    for (double g : {1e-4, 0.3, 7.0, -250.0}) {
      std::vector<Tensor> p = {Tensor::scalar(1.0)};
      AdamState s = AdamState::for_parameters(p);
      adam_step(s, p, {Tensor::scalar(g)});
      CHECK(std::abs(std::abs(1.0 - p[0].item()) - 1e-3) < 1e-6);
      CHECK((1.0 - p[0].item()) * g > 0.0);
    }
  }
  SUBCASE("ten steps on w^2 match the scalar oracle") {
    std::vector<Tensor> p = {Tensor::scalar(1.0)};
    AdamState s = AdamState::for_parameters(p);
    oracle::Adam ref;
    double w = 1.0;
    for (int i = 0; i < 10; ++i) {
      adam_step(s, p, {Tensor::scalar(2.0 * p[0].item())});
      w = ref.step(w, 2.0 * w);
      CHECK(std::abs(p[0].item() - w) < 1e-12);
    }
  }
  SUBCASE("arbitrary gradient sequences match the oracle elementwise") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> d(-5.0, 5.0);
    std::vector<Tensor> p = {Tensor::vector({0.1, 0.2, 0.3})};
    AdamState s = AdamState::for_parameters(p, {0.05, 0.8, 0.99, 1e-6});
    std::vector<oracle::Adam> refs(3, oracle::Adam{0.05, 0.8, 0.99, 1e-6});
    std::vector<double> w = {0.1, 0.2, 0.3};
    for (int step = 0; step < 50; ++step) {
      Tensor g(Shape{3});
      for (std::size_t i = 0; i < 3; ++i) g[i] = d(rng);
      adam_step(s, p, {g});
      for (std::size_t i = 0; i < 3; ++i) {
        w[i] = refs[i].step(w[i], g[i]);
        CHECK(std::abs(p[0][i] - w[i]) < 1e-12);
      }
    }
  }
  SUBCASE("shape mismatch") {
    std::vector<Tensor> p = {Tensor::vector({1.0, 2.0})};
    AdamState s = AdamState::for_parameters(p);
    CHECK_THROWS_AS(adam_step(s, p, {Tensor::vector({1.0})}), ContractViolation);
    CHECK_THROWS_AS(adam_step(s, p, {}), ContractViolation);
  }
}

TEST_CASE("train_epoch") {
  const WindowSets w = make_windows(dataset().normalized, 5, 2, 0);
  SUBCASE("one batch covering the data is one step") {
    ModelForecaster model(nn::Model(tiny_model(), 1));
    AdamState opt = AdamState::for_parameters(model.parameters().values());
    Rng rng(1);
    const EpochStats s = train_epoch(model, opt, w.train, w.train.size() + 5, rng);
    CHECK(s.steps == 1);
    CHECK(opt.step == 1);
    const EpochStats s2 = train_epoch(model, opt, w.train, 10, rng);
    CHECK(s2.steps == (w.train.size() + 9) / 10);
  }
  SUBCASE("zero learning rate is a bitwise no-op") {
    ModelForecaster model(nn::Model(tiny_model(), 1));
    const auto before = model.parameters();
    AdamState opt = AdamState::for_parameters(model.parameters().values(), {0.0});
    Rng rng(2);
    const double l1 = train_epoch(model, opt, w.train, 8, rng).loss;
    CHECK(model.parameters() == before);
    const double l2 = train_epoch(model, opt, w.train, 8, rng).loss;
    CHECK(l1 == l2);
  }
  SUBCASE("fixed seed gives identical loss curves") {
    std::vector<double> curves[2];
    for (auto& curve : curves) {
      auto cfg = tiny_model();
      cfg.dropout = 0.3;
      ModelForecaster model(nn::Model(cfg, 3));
      AdamState opt = AdamState::for_parameters(model.parameters().values(), {1e-2});
      Rng rng(9);
      for (int e = 0; e < 3; ++e) curve.push_back(train_epoch(model, opt, w.train, 16, rng).loss);
    }
    CHECK(curves[0] == curves[1]);
    CHECK(curves[0].back() < curves[0].front());
  }
  SUBCASE("clipping is counted") {
    ModelForecaster model(nn::Model(tiny_model(), 1));
    AdamState opt = AdamState::for_parameters(model.parameters().values());
    Rng rng(1);
    CHECK(train_epoch(model, opt, w.train, 16, rng, 1e-9).clipped == opt.step);
  }
  SUBCASE("no windows") {
    ModelForecaster model(nn::Model(tiny_model(), 1));
    AdamState opt;
    Rng rng(1);
    CHECK_THROWS_AS(train_epoch(model, opt, {}, 4, rng), ConfigError);
  }
}

TEST_CASE("TrainConfig") {
  TrainConfig c;
  CHECK(c.batch_size == 64);
  CHECK(c.patience == 20);
  CHECK(c.learning_rate == 1e-3);
  CHECK(train_config_from_json(to_json(c)) == c);
  c.patience = c.max_epochs + 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(train_config_from_json({{"epochs", 3}}), ConfigError);
}

TEST_CASE("fit") {
  SUBCASE("early stopping keeps the best checkpoint") {
    TrainConfig tc = quick_train();
    tc.max_epochs = 8;
    const FitResult r = fit(tiny_model(), tc, dataset());
    const TrainReport& rep = r.report;
    CHECK(rep.epochs_run == rep.train_loss.size());
    for (double v : rep.validation_loss) CHECK(rep.best_validation <= v);
    const WindowSets w = make_windows(dataset().normalized, 5, 2, 0);
    const ModelForecaster restored(r.model);
    CHECK(evaluate(restored, w.validation).mse == rep.best_validation);
    CHECK(evaluate(restored, w.test).mse == rep.test_mse);
    if (rep.best_epoch > 0) CHECK(rep.validation_loss[rep.best_epoch - 1] == rep.best_validation);
  }
  SUBCASE("patience 0 stops at the first non-improving epoch") {
    TrainConfig tc = quick_train();
    tc.max_epochs = 30;
    tc.patience = 0;
    tc.learning_rate = 0.2;
    const TrainReport rep = fit(tiny_model(), tc, dataset()).report;
    REQUIRE(rep.stopped_early);
    const auto& v = rep.validation_loss;
    double best = std::numeric_limits<double>::infinity();
    std::size_t first_bad = 0;
    for (std::size_t i = 0; i < v.size() && first_bad == 0; ++i) {
      if (v[i] >= best) first_bad = i + 1;
      best = std::min(best, v[i]);
    }
    if (first_bad == 0) first_bad = 1;  // no improvement over the initial parameters
    CHECK(rep.epochs_run == first_bad);
  }
  SUBCASE("identical seeds give identical reports and checkpoints") {
    const FitResult a = fit(tiny_model(), quick_train(), dataset());
    const FitResult b = fit(tiny_model(), quick_train(), dataset());
    CHECK(to_json(a.report, true).dump() == to_json(b.report, true).dump());
    CHECK(nn::checkpoint_to_json(a.model).dump() == nn::checkpoint_to_json(b.model).dump());
    CHECK(to_json(a.report, false).contains("wall_clock_seconds"));
    CHECK_FALSE(to_json(a.report, true).contains("wall_clock_seconds"));
  }
  SUBCASE("divergence reports the epoch") {
    WindowSets w = make_windows(dataset().normalized, 5, 2, 0);
    w.train.front().targets[0] = std::numeric_limits<double>::quiet_NaN();
    ModelForecaster model(nn::Model(tiny_model(), 1));
    try {
      fit(model, quick_train(), w);
      FAIL("expected TrainingFailure");
    } catch (const TrainingFailure& e) {
      CHECK(e.epoch() == 1);
    }
  }
}

TEST_CASE("grid_search") {
  TrainConfig tc = quick_train();
  tc.max_epochs = 3;
  tc.threads = 2;
  SUBCASE("singleton grid equals fit") {
    tc.grid_encoder_length = {5};
    tc.grid_hidden_dim = {4};
    tc.grid_layer_count = {1};
    tc.grid_learning_rate = {1e-2};
    const GridResult g = grid_search(tiny_model(), tc, dataset());
    REQUIRE(g.trials.size() == 1);
    TrainConfig single = tc;
    single.seed = g.trials[0].seed;
    const TrainReport direct = fit(tiny_model(), single, dataset()).report;
    CHECK(to_json(g.best().report, true) == to_json(direct, true));
  }
  SUBCASE("zero learning rate ranks last") {
    tc.grid_encoder_length = {5};
    tc.grid_hidden_dim = {4};
    tc.grid_layer_count = {1};
    tc.grid_learning_rate = {0.0, 1e-2};
    const GridResult g = grid_search(tiny_model(), tc, dataset());
    CHECK(g.best().learning_rate == 1e-2);
  }
  SUBCASE("2x2 ranking is reproducible") {
    tc.grid_encoder_length = {4, 6};
    tc.grid_hidden_dim = {3, 5};
    tc.grid_layer_count = {1};
    tc.grid_learning_rate = {1e-2};
    const GridResult a = grid_search(tiny_model(), tc, dataset());
    tc.threads = 1;
    const GridResult b = grid_search(tiny_model(), tc, dataset());
    CHECK(a.trials.size() == 4);
    CHECK(a.ranking == b.ranking);
    CHECK(to_json(a, true) == to_json(b, true));
    for (const Trial& t : a.trials) CHECK(t.failure.empty());
  }
  SUBCASE("failed trials are recorded, not fatal") {
    tc.grid_encoder_length = {5, 500};
    tc.grid_hidden_dim = {4};
    tc.grid_layer_count = {1};
    tc.grid_learning_rate = {1e-2};
    const GridResult g = grid_search(tiny_model(), tc, dataset());
    CHECK(g.trials[1].failure.find("windows need") != std::string::npos);
    CHECK(g.best().model_config.encoder_length == 5);
    CHECK(g.ranking.back() == 1);
  }
}
