#include "hdsrnn/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <thread>

#include "hdsrnn/errors.hpp"

namespace hdsrnn::eval {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::ofstream open_csv(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw FormatError("cannot write " + path.string());
  os.precision(17);
  return os;
}

void finish(std::ofstream& os, const std::filesystem::path& path) {
  os.flush();
  if (!os) throw FormatError("failed writing " + path.string());
}

const MetricSet& pick(const Evaluation& e, Scale scale) {
  return scale == Scale::Residual ? e.residual : e.reconstructed;
}

const std::vector<MetricSet>& pick_steps(const Evaluation& e, Scale scale) {
  return scale == Scale::Residual ? e.residual_per_step : e.reconstructed_per_step;
}

SweepResult sweep(const char* parameter, const nn::ModelConfig& base, const train::TrainConfig& config,
                  const std::vector<std::size_t>& values, const data::Pretreated& data) {
  config.validate();
  if (values.empty()) throw ConfigError(std::string("sweep over ") + parameter + ": no values");
  SweepResult result;
  result.parameter = parameter;
  for (std::size_t i = 0; i < values.size(); ++i) {
    SweepPoint p;
    p.value = values[i];
    p.seed = derive_seed(config.seed, i);
    result.points.push_back(std::move(p));
  }
  const bool encoder = result.parameter == "encoder_length";

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < result.points.size(); i = next++) {
      SweepPoint& p = result.points[i];
      nn::ModelConfig mc = base;
      (encoder ? mc.encoder_length : mc.decoder_length) = p.value;
      train::TrainConfig tc = config;
      tc.seed = p.seed;
      try {
        mc.validate();
        train::FitResult fit = train::fit(mc, tc, data);
        p.report = std::move(fit.report);
        p.evaluation = evaluate_test(fit.model, data);
        p.converged = std::isfinite(p.evaluation->residual.mse) && std::isfinite(p.evaluation->reconstructed.mse);
        if (!p.converged) p.failure = "non-finite test metrics";
      } catch (const std::exception& e) {
        p.failure = e.what();
        p.converged = false;
      }
    }
  };
  std::size_t threads = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, result.points.size());
  {
    std::vector<std::jthread> pool;
    for (std::size_t i = 1; i < threads; ++i) pool.emplace_back(worker);
    worker();
  }
  return result;
}

}  // namespace

Evaluation evaluate_test(const train::Forecaster& model, const data::Pretreated& data, std::size_t encoder_length,
                         std::size_t target_sensor) {
  const std::size_t tau = model.decoder_length();
  const auto windows = data::windowize(data.normalized, encoder_length, tau, target_sensor, data::Split::Test);
  Evaluation e;
  Forecasts truth, raw_truth;
  for (const data::Window& w : windows) {
    e.forecasts.push_back(model.forecast(w));
    truth.push_back(w.targets);
    e.reconstructions.push_back(data::reconstruct(e.forecasts.back(), data.model, target_sensor, w.anchor_time,
                                                  data.anchor_value(w, target_sensor)));
    std::vector<double> actual;
    for (std::size_t j = 1; j <= tau; ++j) actual.push_back(data.raw.at(target_sensor, w.end + 1 + j));
    raw_truth.push_back(std::move(actual));
  }
  e.residual = metrics(e.forecasts, truth, Scale::Residual);
  e.reconstructed = metrics(e.reconstructions, raw_truth, Scale::Reconstructed);
  e.residual_per_step = per_step_metrics(e.forecasts, truth, Scale::Residual);
  e.reconstructed_per_step = per_step_metrics(e.reconstructions, raw_truth, Scale::Reconstructed);
  return e;
}

Evaluation evaluate_test(const nn::Model& model, const data::Pretreated& data) {
  const train::ModelForecaster forecaster(model);
  return evaluate_test(forecaster, data, model.config().encoder_length, model.config().target_sensor);
}

nlohmann::json to_json(const Evaluation& e) {
  nlohmann::json rs = nlohmann::json::array(), cs = nlohmann::json::array();
  for (const auto& m : e.residual_per_step) rs.push_back(to_json(m));
  for (const auto& m : e.reconstructed_per_step) cs.push_back(to_json(m));
  return {{"residual", to_json(e.residual)},
          {"reconstructed", to_json(e.reconstructed)},
          {"residual_per_step", rs},
          {"reconstructed_per_step", cs}};
}

SweepResult sweep_encoder_length(const nn::ModelConfig& base, const train::TrainConfig& config,
                                 const std::vector<std::size_t>& values, const data::Pretreated& data) {
  return sweep("encoder_length", base, config, values, data);
}

SweepResult sweep_decoder_length(const nn::ModelConfig& base, const train::TrainConfig& config,
                                 const std::vector<std::size_t>& values, const data::Pretreated& data) {
  return sweep("decoder_length", base, config, values, data);
}

void write_encoder_sweep_csv(const SweepResult& result, const std::filesystem::path& path, Scale scale) {
  std::ofstream os = open_csv(path);
  os << "T,mse,mae,converged\n";
  for (const SweepPoint& p : result.points) {
    const bool ok = p.converged && p.evaluation;
    os << p.value << ',' << (ok ? pick(*p.evaluation, scale).mse : kNaN) << ','
       << (ok ? pick(*p.evaluation, scale).mae : kNaN) << ',' << (p.converged ? "true" : "false") << '\n';
  }
  finish(os, path);
}

void write_decoder_sweep_csv(const SweepResult& result, const std::filesystem::path& path, Scale scale) {
  std::ofstream os = open_csv(path);
  os << "tau,step,mse,mae\n";
  for (const SweepPoint& p : result.points) {
    for (std::size_t j = 0; j < p.value; ++j) {
      const bool ok = p.converged && p.evaluation;
      os << p.value << ',' << j + 1 << ',' << (ok ? pick_steps(*p.evaluation, scale)[j].mse : kNaN) << ','
         << (ok ? pick_steps(*p.evaluation, scale)[j].mae : kNaN) << '\n';
    }
  }
  finish(os, path);
}

nlohmann::json to_json(const SweepResult& result, bool deterministic) {
  nlohmann::json points = nlohmann::json::array();
  for (const SweepPoint& p : result.points) {
    nlohmann::json j{{"value", p.value}, {"seed", p.seed}, {"converged", p.converged}};
    if (!p.failure.empty()) j["failure"] = p.failure;
    if (p.evaluation) {
      j["evaluation"] = to_json(*p.evaluation);
      j["training"] = train::to_json(p.report, deterministic);
    }
    points.push_back(std::move(j));
  }
  return {{"parameter", result.parameter}, {"points", points}};
}

AttentionSummary export_spatial_weights(const nn::Model& model, const train::TrainReport& report,
                                        const data::Pretreated& data, const synth::NetworkSpec* spec) {
  const nn::ModelConfig& c = model.config();
  if (!model.spatial_attention()) throw ContractViolation("model has no spatial attention stage");
  if (report.epochs_run == 0) throw ContractViolation("spatial weights requested from an untrained model");
  if (data.normalized.sensor_count() != c.sensors)
    throw DimensionError("panel has " + std::to_string(data.normalized.sensor_count()) + " sensors, model expects " +
                         std::to_string(c.sensors));
  const auto windows =
      data::windowize(data.normalized, c.encoder_length, c.decoder_length, c.target_sensor, data::Split::Test);

  AttentionSummary s;
  s.windows = windows.size();
  s.target = data.normalized.sensors[c.target_sensor].id;
  for (const auto& sensor : data.normalized.sensors) s.sensors.push_back(sensor.id);
  s.mean_weight.assign(c.sensors, 0.0);
  for (const data::Window& w : windows) {
    const nn::Forecast f = model.forward(w.x, w.y_last);
    for (std::size_t t = 0; t < f.spatial_trace.rows(); ++t)
      for (std::size_t k = 0; k < c.sensors; ++k) s.mean_weight[k] += f.spatial_trace.at(t, k);
  }
  const double count = static_cast<double>(windows.size() * c.encoder_length);
  for (double& v : s.mean_weight) v /= count;

  if (spec) {
    const std::size_t target = spec->index_of(s.target);
    std::vector<double> distance, coupling;
    for (const std::string& id : s.sensors) {
      const std::size_t k = spec->index_of(id);
      distance.push_back(std::hypot(spec->sensors[k].x - spec->sensors[target].x,
                                    spec->sensors[k].y - spec->sensors[target].y));
      coupling.push_back(spec->gain(target, k));
    }
    s.distance = std::move(distance);
    s.coupling = std::move(coupling);
  }
  return s;
}

void write_attention_csv(const AttentionSummary& s, const std::filesystem::path& path) {
  std::ofstream os = open_csv(path);
  os << "sensor,mean_weight,distance,coupling\n";
  for (std::size_t k = 0; k < s.sensors.size(); ++k) {
    os << s.sensors[k] << ',' << s.mean_weight[k] << ',';
    if (s.distance) os << (*s.distance)[k];
    os << ',';
    if (s.coupling) os << (*s.coupling)[k];
    os << '\n';
  }
  finish(os, path);
}

nlohmann::json to_json(const AttentionSummary& s) {
  nlohmann::json j{{"target", s.target}, {"windows", s.windows}, {"sensors", s.sensors}, {"mean_weight", s.mean_weight}};
  if (s.distance) j["distance"] = *s.distance;
  if (s.coupling) j["coupling"] = *s.coupling;
  return j;
}

}  // namespace hdsrnn::eval
