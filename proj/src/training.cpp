#include "hdsrnn/training.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>

#include "hdsrnn/errors.hpp"

namespace hdsrnn::train {

namespace {

void require_same_layout(const std::vector<Tensor>& a, const std::vector<Tensor>& b, const char* what) {
  if (a.size() != b.size()) throw ContractViolation(std::string("adam_step: ") + what + " count mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i].shape() == b[i].shape()))
      throw ContractViolation(std::string("adam_step: ") + what + " shape mismatch at parameter " + std::to_string(i) +
                              ": " + a[i].shape().str() + " vs " + b[i].shape().str());
  }
}

std::vector<Tensor> zeros_like(const std::vector<Tensor>& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const Tensor& p : params) out.emplace_back(p.shape());
  return out;
}

template <class T>
std::vector<T> vector_from(const nlohmann::json& v) {
  return v.get<std::vector<T>>();
}

}  // namespace

AdamState AdamState::for_parameters(const std::vector<Tensor>& params, AdamOptions options) {
  AdamState s;
  s.options = options;
  s.first = zeros_like(params);
  s.second = zeros_like(params);
  return s;
}

void adam_step(AdamState& state, std::vector<Tensor>& params, const std::vector<Tensor>& grads) {
  require_same_layout(params, grads, "gradient");
  require_same_layout(params, state.first, "accumulator");
  ++state.step;
  const AdamOptions& o = state.options;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& w = params[i].values();
    auto& m = state.first[i].values();
    auto& v = state.second[i].values();
    const auto& g = grads[i].values();
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * g[j];
      v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * g[j] * g[j];
      w[j] -= o.learning_rate * (m[j] / c1) / (std::sqrt(v[j] / c2) + o.epsilon);
    }
  }
}

std::vector<double> Forecaster::forecast(const Window& window) const {
  ad::Tape tape;
  const auto bound = parameters().bind(tape);
  nn::RunContext ctx;
  return predict(tape, bound, window, ctx).value().values();
}

ad::Var ModelForecaster::predict(ad::Tape& tape, std::span<const ad::Var> bound, const Window& window,
                                 nn::RunContext& ctx) const {
  return model_.build(tape, bound, window.x, window.y_last, ctx).values;
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (max_epochs == 0) throw ConfigError("max_epochs must be at least 1");
  if (patience > max_epochs) throw ConfigError("patience must not exceed max_epochs");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be >= 0");
  if (!(clip_norm >= 0.0)) throw ConfigError("clip_norm must be >= 0");
  for (double lr : grid_learning_rate)
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("grid learning rates must be >= 0");
  for (const auto* g : {&grid_encoder_length, &grid_hidden_dim, &grid_layer_count})
    for (std::size_t v : *g)
      if (v == 0) throw ConfigError("grid entries must be positive");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs},
          {"patience", c.patience},
          {"learning_rate", c.learning_rate},
          {"seed", c.seed},
          {"clip_norm", c.clip_norm},
          {"grid_encoder_length", c.grid_encoder_length},
          {"grid_hidden_dim", c.grid_hidden_dim},
          {"grid_layer_count", c.grid_layer_count},
          {"grid_learning_rate", c.grid_learning_rate},
          {"threads", c.threads}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
  if (!j.is_object()) throw ConfigError("train config must be an object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "batch_size") c.batch_size = value.get<std::size_t>();
      else if (key == "max_epochs") c.max_epochs = value.get<std::size_t>();
      else if (key == "patience") c.patience = value.get<std::size_t>();
      else if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "clip_norm") c.clip_norm = value.get<double>();
      else if (key == "grid_encoder_length") c.grid_encoder_length = vector_from<std::size_t>(value);
      else if (key == "grid_hidden_dim") c.grid_hidden_dim = vector_from<std::size_t>(value);
      else if (key == "grid_layer_count") c.grid_layer_count = vector_from<std::size_t>(value);
      else if (key == "grid_learning_rate") c.grid_learning_rate = vector_from<double>(value);
      else if (key == "threads") c.threads = value.get<std::size_t>();
      else throw ConfigError("unknown train config key: " + key);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("train config key '" + key + "': " + e.what());
    }
  }
  return c;
}

EpochStats train_epoch(Forecaster& model, AdamState& optimizer, std::span<const Window> windows,
                       std::size_t batch_size, Rng& rng, double clip_norm) {
  if (windows.empty()) throw ConfigError("train_epoch: no training windows");
  if (batch_size == 0) throw ConfigError("train_epoch: batch_size must be at least 1");
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  auto& params = model.parameters().values();
  if (optimizer.first.empty()) optimizer = AdamState::for_parameters(params, optimizer.options);
  std::vector<Tensor> grads = zeros_like(params);
  EpochStats stats;
  // Losses are summed in window order so the epoch loss does not depend on the shuffle.
  std::vector<double> losses(windows.size(), 0.0);
  for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
    const std::size_t end = std::min(order.size(), begin + batch_size);
    const double inv = 1.0 / static_cast<double>(end - begin);
    for (Tensor& g : grads) std::fill(g.values().begin(), g.values().end(), 0.0);
    for (std::size_t b = begin; b < end; ++b) {
      const Window& w = windows[order[b]];
      ad::Tape tape;
      const auto bound = model.parameters().bind(tape);
      nn::RunContext ctx{true, &rng, w.targets};
      const ad::Var y = model.predict(tape, bound, w, ctx);
      const ad::Var loss = ad::mse_loss(y, tape.constant(Tensor::vector(w.targets)));
      tape.backward(loss);
      losses[order[b]] = loss.value().item();
      for (std::size_t i = 0; i < grads.size(); ++i) {
        const Tensor g = tape.gradient(bound[i]);
        auto& acc = grads[i].values();
        for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += g[j] * inv;
      }
    }
    if (clip_norm > 0.0) {
      double sq = 0.0;
      for (const Tensor& g : grads)
        for (double v : g.values()) sq += v * v;
      const double norm = std::sqrt(sq);
      if (norm > clip_norm) {
        const double f = clip_norm / norm;
        for (Tensor& g : grads)
          for (double& v : g.values()) v *= f;
        ++stats.clipped;
      }
    }
    adam_step(optimizer, params, grads);
    ++stats.steps;
  }
  stats.loss = std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(windows.size());
  return stats;
}

ErrorSummary evaluate(const Forecaster& model, std::span<const Window> windows) {
  ErrorSummary out;
  std::size_t count = 0;
  for (const Window& w : windows) {
    const auto y = model.forecast(w);
    for (std::size_t j = 0; j < y.size(); ++j) {
      const double e = y[j] - w.targets[j];
      out.mse += e * e;
      out.mae += std::abs(e);
      ++count;
    }
  }
  if (count > 0) {
    out.mse /= static_cast<double>(count);
    out.mae /= static_cast<double>(count);
  }
  return out;
}

nlohmann::json to_json(const TrainReport& r, bool deterministic) {
  nlohmann::json j = {{"train_loss", r.train_loss},
                      {"validation_loss", r.validation_loss},
                      {"best_epoch", r.best_epoch},
                      {"best_validation", r.best_validation},
                      {"epochs_run", r.epochs_run},
                      {"stopped_early", r.stopped_early},
                      {"clip_events", r.clip_events},
                      {"test_mse", r.test_mse},
                      {"test_mae", r.test_mae},
                      {"seed", r.seed},
                      {"config", r.config}};
  if (!deterministic) j["wall_clock_seconds"] = r.wall_clock_seconds;
  return j;
}

WindowSets make_windows(const data::SeriesPanel& normalized, std::size_t encoder_length, std::size_t decoder_length,
                        std::size_t target_sensor) {
  WindowSets w;
  w.train = data::windowize(normalized, encoder_length, decoder_length, target_sensor, data::Split::Train);
  w.validation = data::windowize(normalized, encoder_length, decoder_length, target_sensor, data::Split::Validation);
  w.test = data::windowize(normalized, encoder_length, decoder_length, target_sensor, data::Split::Test);
  return w;
}

TrainReport fit(Forecaster& model, const TrainConfig& config, const WindowSets& windows) {
  config.validate();
  if (windows.validation.empty()) throw ConfigError("fit: no validation windows");
  const auto started = std::chrono::steady_clock::now();
  TrainReport report;
  report.seed = config.seed;
  report.config = {{"model", model.config_json()}, {"train", to_json(config)}};
  report.config["train"].erase("threads");

  Rng rng(derive_seed(config.seed, 1));
  AdamState optimizer = AdamState::for_parameters(model.parameters().values(), {config.learning_rate});
  std::vector<Tensor> best = model.parameters().values();
  report.best_validation = evaluate(model, windows.validation).mse;
  if (!std::isfinite(report.best_validation)) throw TrainingFailure("non-finite validation loss before training", 0);
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const EpochStats stats = train_epoch(model, optimizer, windows.train, config.batch_size, rng, config.clip_norm);
    report.clip_events += stats.clipped;
    if (!std::isfinite(stats.loss))
      throw TrainingFailure("training loss diverged at epoch " + std::to_string(epoch), epoch);
    const double val = evaluate(model, windows.validation).mse;
    if (!std::isfinite(val)) throw TrainingFailure("validation loss diverged at epoch " + std::to_string(epoch), epoch);
    report.train_loss.push_back(stats.loss);
    report.validation_loss.push_back(val);
    report.epochs_run = epoch;
    if (val < report.best_validation) {
      report.best_validation = val;
      report.best_epoch = epoch;
      best = model.parameters().values();
      since_best = 0;
    } else if (++since_best > config.patience) {
      report.stopped_early = true;
      break;
    }
  }
  model.parameters().values() = best;
  if (!windows.test.empty()) {
    const ErrorSummary test = evaluate(model, windows.test);
    report.test_mse = test.mse;
    report.test_mae = test.mae;
  }
  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

FitResult fit(const nn::ModelConfig& model_config, const TrainConfig& train_config, const data::Pretreated& data) {
  ModelForecaster forecaster(nn::Model(model_config, derive_seed(train_config.seed, 0)));
  const WindowSets windows = make_windows(data.normalized, model_config.encoder_length, model_config.decoder_length,
                                          model_config.target_sensor);
  TrainReport report = fit(forecaster, train_config, windows);
  return {std::move(forecaster.model()), std::move(report)};
}

double Trial::validation_mse() const {
  return ok() ? report.best_validation : std::numeric_limits<double>::infinity();
}

const Trial& GridResult::best() const {
  if (ranking.empty() || !trials[ranking.front()].ok()) throw TrainingFailure("every grid trial failed", 0);
  return trials[ranking.front()];
}

GridResult grid_search(const nn::ModelConfig& template_config, const TrainConfig& config, const data::Pretreated& data) {
  config.validate();
  GridResult result;
  for (std::size_t horizon : config.grid_encoder_length)
    for (std::size_t m : config.grid_hidden_dim)
      for (std::size_t layers : config.grid_layer_count)
        for (double lr : config.grid_learning_rate) {
          Trial t;
          t.model_config = template_config;
          t.model_config.encoder_length = horizon;
          t.model_config.hidden_dim = m;
          t.model_config.layer_count = layers;
          t.learning_rate = lr;
          t.seed = derive_seed(config.seed, result.trials.size());
          result.trials.push_back(std::move(t));
        }
  if (result.trials.empty()) throw ConfigError("grid_search: empty grid");

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < result.trials.size(); i = next++) {
      Trial& t = result.trials[i];
      TrainConfig tc = config;
      tc.learning_rate = t.learning_rate;
      tc.seed = t.seed;
      try {
        t.report = fit(t.model_config, tc, data).report;
      } catch (const std::exception& e) {
        t.failure = e.what();
      }
    }
  };
  std::size_t threads = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, result.trials.size());
  {
    std::vector<std::jthread> pool;
    for (std::size_t i = 1; i < threads; ++i) pool.emplace_back(worker);
    worker();
  }

  result.ranking.resize(result.trials.size());
  std::iota(result.ranking.begin(), result.ranking.end(), std::size_t{0});
  std::stable_sort(result.ranking.begin(), result.ranking.end(), [&](std::size_t a, std::size_t b) {
    return result.trials[a].validation_mse() < result.trials[b].validation_mse();
  });
  return result;
}

nlohmann::json to_json(const GridResult& result, bool deterministic) {
  nlohmann::json trials = nlohmann::json::array();
  for (const Trial& t : result.trials) {
    nlohmann::json j = {{"model", nn::to_json(t.model_config)}, {"learning_rate", t.learning_rate}, {"seed", t.seed}};
    if (t.ok()) j["report"] = to_json(t.report, deterministic);
    else j["failure"] = t.failure;
    trials.push_back(std::move(j));
  }
  return {{"trials", trials}, {"ranking", result.ranking}};
}

}  // namespace hdsrnn::train
