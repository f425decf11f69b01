#include "hdsrnn/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>

#include <Eigen/Dense>

#include "hdsrnn/errors.hpp"

namespace hdsrnn::baselines {

namespace {

constexpr const char* kMlpFormat = "hdsrnn-mlp-checkpoint";
constexpr int kMlpVersion = 1;

double target_at(const Window& w, std::size_t target, std::size_t t) {
  if (target >= w.x.rows()) throw IndexError("target sensor out of range");
  return w.x.at(target, t);
}

}  // namespace

std::string to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::Persistence: return "persistence";
    case BaselineKind::SeasonalNaive: return "seasonal_naive";
    case BaselineKind::LinearAR: return "linear_ar";
    case BaselineKind::MLP: return "mlp";
    case BaselineKind::Seq2Seq: return "seq2seq";
  }
  return "unknown";
}

BaselineKind parse_baseline_kind(const std::string& name) {
  for (auto k : {BaselineKind::Persistence, BaselineKind::SeasonalNaive, BaselineKind::LinearAR, BaselineKind::MLP,
                 BaselineKind::Seq2Seq})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown baseline: " + name);
}

std::vector<double> persistence_forecast(const Window& window, std::size_t decoder_length) {
  return std::vector<double>(decoder_length, window.y_last);
}

std::vector<double> seasonal_naive_forecast(const Window& window, std::size_t target_sensor,
                                            std::size_t decoder_length, std::size_t period) {
  const std::size_t horizon = window.x.cols();
  if (period == 0) throw ConfigError("seasonal period must be positive");
  if (horizon < period)
    throw InsufficientDataError("seasonal naive needs " + std::to_string(period) + " steps of lookback, window has " +
                                std::to_string(horizon));
  std::vector<double> out;
  for (std::size_t j = 1; j <= decoder_length; ++j) {
    // Position T + j - period relative to the window start (index T-1 is the last step).
    if (j > period) {
      out.push_back(out[j - 1 - period]);
    } else {
      out.push_back(target_at(window, target_sensor, horizon - 1 + j - period));
    }
  }
  return out;
}

std::vector<double> seasonal_naive_forecast(const data::SeriesPanel& panel, std::size_t end,
                                            std::size_t target_sensor, std::size_t decoder_length,
                                            std::size_t period) {
  if (period == 0) throw ConfigError("seasonal period must be positive");
  if (target_sensor >= panel.sensor_count()) throw IndexError("target sensor out of range");
  if (end >= panel.length()) throw IndexError("window end beyond panel");
  if (end + 1 < period)
    throw InsufficientDataError("seasonal naive needs " + std::to_string(period) + " steps of lookback before index " +
                                std::to_string(end));
  std::vector<double> out;
  for (std::size_t j = 1; j <= decoder_length; ++j) {
    if (j > period) {
      out.push_back(out[j - 1 - period]);
    } else {
      out.push_back(panel.at(target_sensor, end + j - period));
    }
  }
  return out;
}

LinearAR linear_ar_fit(std::span<const Window> windows, std::size_t target_sensor, std::size_t order) {
  if (order == 0) throw ConfigError("AR order must be positive");
  if (windows.empty()) throw InsufficientDataError("linear AR fit needs at least one window");
  const std::size_t horizon = windows.front().x.cols();
  if (order > horizon)
    throw ConfigError("AR order " + std::to_string(order) + " exceeds encoder length " + std::to_string(horizon));
  const auto rows = static_cast<Eigen::Index>(windows.size());
  const auto cols = static_cast<Eigen::Index>(order + 1);
  Eigen::MatrixXd a(rows, cols);
  Eigen::VectorXd b(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Window& w = windows[static_cast<std::size_t>(r)];
    if (w.x.cols() != horizon || w.targets.empty()) throw DimensionError("linear AR: inconsistent windows");
    a(r, 0) = 1.0;
    for (std::size_t i = 0; i < order; ++i) a(r, static_cast<Eigen::Index>(i + 1)) = target_at(w, target_sensor, horizon - 1 - i);
    b(r) = w.targets.front();
  }

  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  LinearAR model;
  model.coefficients.assign(order, 0.0);
  if (qr.rank() < cols) {
    // Constant target history: every lag column equals a multiple of the intercept.
    const double first = a(0, 1);
    const bool constant = (a.rightCols(cols - 1).array() == first).all() && (b.array() == b(0)).all();
    if (!constant)
      throw RankDeficiencyError("linear AR design has rank " + std::to_string(qr.rank()) + " of " +
                                std::to_string(cols));
    model.intercept = b(0);
    return model;
  }
  const Eigen::VectorXd beta = qr.solve(b);
  model.intercept = beta(0);
  for (std::size_t i = 0; i < order; ++i) model.coefficients[i] = beta(static_cast<Eigen::Index>(i + 1));
  return model;
}

std::vector<double> linear_ar_forecast(const LinearAR& model, const Window& window, std::size_t target_sensor,
                                       std::size_t decoder_length) {
  const std::size_t horizon = window.x.cols();
  if (model.order() > horizon) throw DimensionError("AR order exceeds window length");
  // history.back() is the most recent value.
  std::vector<double> history;
  for (std::size_t t = horizon - model.order(); t < horizon; ++t) history.push_back(target_at(window, target_sensor, t));
  std::vector<double> out;
  for (std::size_t j = 0; j < decoder_length; ++j) {
    double y = model.intercept;
    for (std::size_t i = 0; i < model.order(); ++i) y += model.coefficients[i] * history[history.size() - 1 - i];
    out.push_back(y);
    history.push_back(y);
  }
  return out;
}

void MlpConfig::validate() const {
  if (sensors == 0 || encoder_length == 0 || decoder_length == 0)
    throw ConfigError("MLP sizes must be positive");
  if (hidden.empty()) throw ConfigError("MLP needs at least one hidden layer");
  for (std::size_t h : hidden)
    if (h == 0) throw ConfigError("MLP hidden widths must be positive");
}

Mlp::Mlp(MlpConfig config, std::uint64_t init_seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng(init_seed);
  std::size_t in = config_.sensors * config_.encoder_length;
  for (std::size_t i = 0; i < config_.hidden.size(); ++i) {
    layers_.push_back(nn::AffineLayer::create(params_, "hidden" + std::to_string(i), in, config_.hidden[i], rng));
    in = config_.hidden[i];
  }
  layers_.push_back(nn::AffineLayer::create(params_, "output", in, config_.decoder_length, rng));
}

ad::Var Mlp::predict(ad::Tape& tape, std::span<const ad::Var> bound, const Window& window,
                     nn::RunContext&) const {
  if (window.x.rows() != config_.sensors || window.x.cols() != config_.encoder_length)
    throw DimensionError("MLP expects a " + std::to_string(config_.sensors) + "x" +
                         std::to_string(config_.encoder_length) + " window, got " + window.x.shape().str());
  ad::Var h = tape.constant(ad::Tensor::vector(window.x.values()));
  for (std::size_t i = 0; i + 1 < layers_.size(); ++i) h = ad::tanh(nn::affine(layers_[i], bound, h));
  return nn::affine(layers_.back(), bound, h);
}

nlohmann::json Mlp::config_json() const {
  return {{"kind", "mlp"},
          {"sensors", config_.sensors},
          {"encoder_length", config_.encoder_length},
          {"decoder_length", config_.decoder_length},
          {"hidden", config_.hidden}};
}

nlohmann::json Mlp::checkpoint() const {
  return {{"format", kMlpFormat},
          {"version", kMlpVersion},
          {"config", config_json()},
          {"parameters", nn::parameters_to_json(params_)}};
}

void BaselineSpec::validate() const {
  if (ar_order == 0) throw ConfigError("ar_order must be positive");
  if (period == 0) throw ConfigError("period must be positive");
  MlpConfig mlp;
  mlp.hidden = mlp_hidden;
  mlp.validate();
  seq2seq_config(seq2seq).validate();
  training.validate();
}

nlohmann::json to_json(const BaselineSpec& spec) {
  return {{"kind", to_string(spec.kind)},
          {"ar_order", spec.ar_order},
          {"period", spec.period},
          {"mlp_hidden", spec.mlp_hidden},
          {"seq2seq", nn::to_json(spec.seq2seq)},
          {"training", train::to_json(spec.training)}};
}

BaselineSpec baseline_spec_from_json(const nlohmann::json& j, BaselineSpec base) {
  if (!j.is_object()) throw ConfigError("baseline spec must be an object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "kind") base.kind = parse_baseline_kind(value.get<std::string>());
      else if (key == "ar_order") base.ar_order = value.get<std::size_t>();
      else if (key == "period") base.period = value.get<std::size_t>();
      else if (key == "mlp_hidden") base.mlp_hidden = value.get<std::vector<std::size_t>>();
      else if (key == "seq2seq") base.seq2seq = nn::model_config_from_json(value, base.seq2seq);
      else if (key == "training") base.training = train::train_config_from_json(value, base.training);
      else throw ConfigError("unknown baseline key: " + key);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("baseline key '" + key + "': " + e.what());
    }
  }
  base.validate();
  return base;
}

nn::ModelConfig seq2seq_config(nn::ModelConfig base) {
  base.spatial_variant = nn::SpatialVariant::None;
  base.temporal_attention = false;
  return base;
}

namespace {

BaselineResult run_on(const BaselineSpec& spec, const data::SeriesPanel& panel, const data::Pretreated* data,
                      std::size_t encoder_length, std::size_t decoder_length, std::size_t target_sensor) {
  spec.validate();
  BaselineResult result;
  result.kind = spec.kind;
  const train::WindowSets windows = train::make_windows(panel, encoder_length, decoder_length, target_sensor);
  if (windows.test.empty()) throw InsufficientDataError("no test windows");

  std::function<std::vector<double>(const Window&)> predict;
  std::unique_ptr<train::Forecaster> trained;
  switch (spec.kind) {
    case BaselineKind::Persistence:
      predict = [&](const Window& w) { return persistence_forecast(w, decoder_length); };
      break;
    case BaselineKind::SeasonalNaive:
      predict = [&](const Window& w) {
        return seasonal_naive_forecast(panel, w.end, target_sensor, decoder_length, spec.period);
      };
      break;
    case BaselineKind::LinearAR:
      result.linear_ar = linear_ar_fit(windows.train, target_sensor, spec.ar_order);
      predict = [&](const Window& w) {
        return linear_ar_forecast(*result.linear_ar, w, target_sensor, decoder_length);
      };
      break;
    case BaselineKind::MLP: {
      MlpConfig cfg{panel.sensor_count(), encoder_length, decoder_length, spec.mlp_hidden};
      trained = std::make_unique<Mlp>(cfg, derive_seed(spec.training.seed, 0));
      break;
    }
    case BaselineKind::Seq2Seq: {
      nn::ModelConfig cfg = seq2seq_config(spec.seq2seq);
      cfg.sensors = panel.sensor_count();
      cfg.encoder_length = encoder_length;
      cfg.decoder_length = decoder_length;
      cfg.target_sensor = target_sensor;
      trained = std::make_unique<train::ModelForecaster>(nn::Model(cfg, derive_seed(spec.training.seed, 0)));
      break;
    }
  }
  if (trained) {
    result.training = train::fit(*trained, spec.training, windows);
    predict = [&](const Window& w) { return trained->forecast(w); };
  }

  eval::Forecasts truth, raw_truth;
  for (const Window& w : windows.test) {
    result.forecasts.push_back(predict(w));
    truth.push_back(w.targets);
    if (!data) continue;
    result.reconstructions.push_back(data::reconstruct(result.forecasts.back(), data->model, target_sensor,
                                                       w.anchor_time, data->anchor_value(w, target_sensor)));
    std::vector<double> actual;
    for (std::size_t j = 1; j <= decoder_length; ++j) actual.push_back(data->raw.at(target_sensor, w.end + 1 + j));
    raw_truth.push_back(std::move(actual));
  }
  result.residual = eval::metrics(result.forecasts, truth, eval::Scale::Residual);
  if (data) result.reconstructed = eval::metrics(result.reconstructions, raw_truth, eval::Scale::Reconstructed);
  return result;
}

}  // namespace

BaselineResult run_baseline(const BaselineSpec& spec, const data::Pretreated& data, std::size_t encoder_length,
                            std::size_t decoder_length, std::size_t target_sensor) {
  return run_on(spec, data.normalized, &data, encoder_length, decoder_length, target_sensor);
}

BaselineResult run_baseline(const BaselineSpec& spec, const data::SeriesPanel& panel, std::size_t encoder_length,
                            std::size_t decoder_length, std::size_t target_sensor) {
  return run_on(spec, panel, nullptr, encoder_length, decoder_length, target_sensor);
}

nlohmann::json to_json(const BaselineResult& result, bool deterministic) {
  nlohmann::json j{{"baseline", to_string(result.kind)},
                   {"residual", eval::to_json(result.residual)},
};
  if (result.reconstructed) j["reconstructed"] = eval::to_json(*result.reconstructed);
  if (result.training) j["training"] = train::to_json(*result.training, deterministic);
  if (result.linear_ar)
    j["linear_ar"] = {{"intercept", result.linear_ar->intercept}, {"coefficients", result.linear_ar->coefficients}};
  return j;
}

}  // namespace hdsrnn::baselines
