#include "hdsrnn/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "hdsrnn/errors.hpp"
#include "hdsrnn/random.hpp"

namespace hdsrnn::synth {

namespace {

constexpr double kPi = std::numbers::pi;

SensorKind parse_kind(const std::string& s) {
  if (s == "flow") return SensorKind::Flow;
  if (s == "pressure") return SensorKind::Pressure;
  if (s == "other") return SensorKind::Other;
  throw ConfigError("unknown sensor kind '" + s + "' (expected flow, pressure or other)");
}

double pulse_shape(std::size_t i, std::size_t duration) {
  const double s = std::sin(kPi * static_cast<double>(i + 1) / static_cast<double>(duration + 1));
  return s * s;
}

SensorSpec flow(std::string id, double x, double y, double base, double amplitude, double phase, double noise) {
  return {std::move(id), SensorKind::Flow, x, y, base, amplitude, phase, noise, 0.0};
}

SensorSpec pressure(std::string id, double x, double y, double base, double noise, double walk) {
  return {std::move(id), SensorKind::Pressure, x, y, base, 0.0, 0.0, noise, walk};
}

}  // namespace

std::size_t NetworkSpec::index_of(const std::string& id) const {
  for (std::size_t k = 0; k < sensors.size(); ++k)
    if (sensors[k].id == id) return k;
  throw ConfigError("unknown sensor '" + id + "'");
}

NetworkSpec NetworkSpec::uncoupled(std::vector<SensorSpec> sensors) {
  NetworkSpec spec;
  const std::size_t n = sensors.size();
  spec.sensors = std::move(sensors);
  spec.coupling.assign(n * n, 0.0);
  spec.lags.assign(n * n, 0);
  for (std::size_t k = 0; k < n; ++k) spec.coupling[k * n + k] = 1.0;
  return spec;
}

void NetworkSpec::validate() const {
  const std::size_t n = sensors.size();
  if (n == 0) throw ConfigError("network spec has no sensors");
  if (coupling.size() != n * n || lags.size() != n * n)
    throw ConfigError("coupling and lag matrices must be " + std::to_string(n) + "x" + std::to_string(n));
  for (std::size_t k = 0; k < n; ++k) {
    if (gain(k, k) != 1.0) throw ConfigError("coupling diagonal must be 1 (sensor " + sensors[k].id + ")");
    if (lag(k, k) != 0) throw ConfigError("self lag must be 0 (sensor " + sensors[k].id + ")");
    for (std::size_t j = 0; j < k; ++j)
      if (sensors[j].id == sensors[k].id) throw ConfigError("duplicate sensor id " + sensors[k].id);
    if (sensors[k].noise_std < 0.0 || sensors[k].walk_std < 0.0) throw ConfigError("noise levels must be >= 0");
  }
  for (double g : coupling)
    if (!std::isfinite(g)) throw ConfigError("coupling gains must be finite");
  for (const Event& e : events) {
    if (e.source >= n) throw ConfigError("event source out of range");
    if (e.duration == 0) throw ConfigError("event duration must be positive");
  }
  for (std::size_t s : random_events.sources)
    if (s >= n) throw ConfigError("event policy source out of range");
  if (random_events.per_day < 0.0 || random_events.min_magnitude > random_events.max_magnitude ||
      random_events.duration == 0)
    throw ConfigError("invalid event policy");
  if (random_events.per_day > 0.0 && random_events.sources.empty())
    throw ConfigError("event policy needs at least one source");
}

void apply_distance_kernel(NetworkSpec& spec, const DistanceKernel& kernel) {
  const std::size_t n = spec.size();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t a = 0; a < n; ++a) {
      if (a == b || spec.sensors[a].kind != SensorKind::Flow) continue;
      const double d = std::hypot(spec.sensors[a].x - spec.sensors[b].x, spec.sensors[a].y - spec.sensors[b].y);
      if (d > kernel.radius) {
        spec.gain(b, a) = 0.0;
        spec.lag(b, a) = 0;
        continue;
      }
      const double g = kernel.gain * std::exp(-d / kernel.length_scale);
      spec.gain(b, a) = spec.sensors[b].kind == SensorKind::Pressure ? -g : g;
      spec.lag(b, a) = static_cast<std::size_t>(std::lround(d / kernel.speed));
    }
  }
}

void GeneratorConfig::validate(std::size_t sensors) const {
  if (period == 0) throw ConfigError("period must be positive");
  if (length < 4 * period)
    throw ConfigError("length " + std::to_string(length) + " is below 4 periods (" + std::to_string(4 * period) + ")");
  if (!noise_std.empty() && noise_std.size() != sensors)
    throw ConfigError("noise_std needs one entry per sensor");
  for (double s : noise_std)
    if (s < 0.0) throw ConfigError("noise_std must be >= 0");
  if (noise_scale < 0.0) throw ConfigError("noise_scale must be >= 0");
}

std::vector<Event> realized_events(const NetworkSpec& spec, const GeneratorConfig& config) {
  std::vector<Event> out = spec.events;
  const EventPolicy& p = spec.random_events;
  if (p.per_day <= 0.0) return out;
  std::size_t burn = 0;
  for (std::size_t l : spec.lags) burn = std::max(burn, l);
  const std::int64_t first = -static_cast<std::int64_t>(burn);
  const double span = static_cast<double>(config.length + burn);
  Rng rng(derive_seed(config.seed, 0xE7E27));
  std::poisson_distribution<int> count(p.per_day * span / static_cast<double>(config.period));
  std::uniform_real_distribution<double> when(0.0, span);
  std::uniform_real_distribution<double> mag(p.min_magnitude, p.max_magnitude);
  std::uniform_int_distribution<std::size_t> source(0, p.sources.size() - 1);
  const int k = count(rng);
  for (int i = 0; i < k; ++i) {
    Event e;
    e.time = first + static_cast<std::int64_t>(when(rng));
    e.magnitude = mag(rng);
    e.source = p.sources[source(rng)];
    e.duration = p.duration;
    out.push_back(e);
  }
  std::stable_sort(out.begin(), out.end(), [](const Event& a, const Event& b) { return a.time < b.time; });
  return out;
}

SeriesPanel generate_panel(const NetworkSpec& spec, const GeneratorConfig& config) {
  spec.validate();
  const std::size_t n = spec.size();
  config.validate(n);
  std::size_t burn = 0;
  for (std::size_t l : spec.lags) burn = std::max(burn, l);
  const std::size_t total = config.length + burn;

  // Intrinsic signals over [-burn, length).
  std::vector<std::vector<double>> u(n, std::vector<double>(total, 0.0));
  for (std::size_t k = 0; k < n; ++k) {
    const SensorSpec& s = spec.sensors[k];
    const double noise = (config.noise_std.empty() ? s.noise_std : config.noise_std[k]) * config.noise_scale;
    Rng rng(derive_seed(config.seed, k));
    std::normal_distribution<double> gauss(0.0, 1.0);
    double walk = 0.0;
    for (std::size_t i = 0; i < total; ++i) {
      // Phase from the slot index so the harmonic repeats exactly every period.
      const std::int64_t p = static_cast<std::int64_t>(config.period);
      const std::int64_t slot = ((static_cast<std::int64_t>(i) - static_cast<std::int64_t>(burn)) % p + p) % p;
      const double angle = 2.0 * kPi * static_cast<double>(slot) / static_cast<double>(p);
      double v = s.base;
      if (s.kind == SensorKind::Pressure) {
        if (s.walk_std > 0.0) walk += s.walk_std * gauss(rng);
        v += walk;
      } else {
        v += s.amplitude * (std::sin(angle + s.phase) + 0.35 * std::sin(2.0 * angle + 2.0 * s.phase));
      }
      if (noise > 0.0) v += noise * gauss(rng);
      u[k][i] = v;
    }
  }
  for (const Event& e : realized_events(spec, config)) {
    for (std::size_t i = 0; i < e.duration; ++i) {
      const std::int64_t idx = e.time + static_cast<std::int64_t>(i) + static_cast<std::int64_t>(burn);
      if (idx < 0 || idx >= static_cast<std::int64_t>(total)) continue;
      u[e.source][static_cast<std::size_t>(idx)] += e.magnitude * pulse_shape(i, e.duration);
    }
  }

  SeriesPanel panel;
  for (const SensorSpec& s : spec.sensors) panel.sensors.push_back({s.id, s.kind});
  panel.values = ad::Tensor(ad::Shape{n, config.length});
  for (std::size_t t = 0; t < config.length; ++t)
    panel.timestamps.push_back(config.start + static_cast<std::int64_t>(t) * data::kCadenceSeconds);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t a = 0; a < n; ++a) {
      const double g = spec.gain(b, a);
      if (g == 0.0) continue;
      const std::size_t shift = burn - spec.lag(b, a);
      for (std::size_t t = 0; t < config.length; ++t) panel.values.at(b, t) += g * u[a][t + shift];
    }
  }
  panel.split = data::ratio_split(config.length);
  panel.validate();
  return panel;
}

NetworkSpec default_wds_spec() {
  std::vector<SensorSpec> s = {
      flow("F1", 0.0, 0.0, 120.0, 30.0, 0.0, 1.0),     // station 1
      flow("F2", 10.0, 0.0, 110.0, 28.0, 0.3, 1.0),    // station 2
      flow("F3", 5.0, 8.0, 100.0, 25.0, 0.6, 1.0),     // station 3
      flow("F4", 6.0, 10.0, 80.0, 20.0, 0.9, 1.0),
      flow("F5", 12.0, 13.0, 60.0, 15.0, 1.2, 1.0),
      flow("F6", 0.0, 14.0, 55.0, 14.0, 1.5, 1.0),
      flow("F7", 9.0, 4.0, 70.0, 18.0, 0.4, 1.0),
      flow("F8", 6.0, 11.5, 65.0, 16.0, 1.0, 0.5),
      flow("F9", 3.0, 3.0, 50.0, 12.0, 0.2, 1.0),
      flow("F10", 13.0, 5.0, 45.0, 11.0, 0.7, 1.0),
      flow("F11", 40.0, 40.0, 20.0, 0.0, 0.0, 1.0),    // isolated, noise only
      pressure("P1", 0.0, 0.0, 35.0, 0.2, 0.05),
      pressure("P2", 10.0, 0.0, 34.0, 0.2, 0.05),
      pressure("P3", 5.0, 8.0, 33.0, 0.2, 0.05),
      pressure("P4", 1.0, 6.0, 30.0, 0.2, 0.05),
      pressure("P5", 8.0, 10.0, 29.0, 0.2, 0.05),
      pressure("P6", 12.0, 3.0, 31.0, 0.2, 0.05),
      pressure("P7", 4.0, 12.0, 28.0, 0.2, 0.05),
  };
  NetworkSpec spec = NetworkSpec::uncoupled(std::move(s));
  apply_distance_kernel(spec, {});
  // Station pressure feeds the target flow directly.
  const std::size_t f8 = spec.index_of("F8"), p3 = spec.index_of("P3");
  spec.gain(f8, p3) = -0.25;
  spec.lag(f8, p3) = 2;
  spec.random_events = {2.0, 5.0, 15.0, 6, {spec.index_of("F1"), spec.index_of("F2"), spec.index_of("F3")}};
  return spec;
}

NetworkSpec planted_lag_spec(std::size_t lag) {
  NetworkSpec spec = NetworkSpec::uncoupled({
      flow("F1", 0.0, 0.0, 0.0, 0.0, 0.0, 0.1),
      flow("F2", 0.0, 0.0, 20.0, 0.0, 0.0, 0.1),
      flow("F3", 0.0, 0.0, 20.0, 0.0, 0.0, 1.0),
  });
  spec.gain(0, 1) = 1.0;
  spec.lag(0, 1) = lag;
  spec.random_events = {1.5, 4.0, 8.0, 8, {1}};
  return spec;
}

nlohmann::json to_json(const NetworkSpec& spec) {
  nlohmann::json sensors = nlohmann::json::array();
  for (const SensorSpec& s : spec.sensors) {
    sensors.push_back({{"id", s.id},
                       {"kind", data::to_string(s.kind)},
                       {"x", s.x},
                       {"y", s.y},
                       {"base", s.base},
                       {"amplitude", s.amplitude},
                       {"phase", s.phase},
                       {"noise_std", s.noise_std},
                       {"walk_std", s.walk_std}});
  }
  nlohmann::json events = nlohmann::json::array();
  for (const Event& e : spec.events)
    events.push_back({{"time", e.time}, {"magnitude", e.magnitude}, {"source", e.source}, {"duration", e.duration}});
  const EventPolicy& p = spec.random_events;
  return {{"sensors", sensors},
          {"coupling", spec.coupling},
          {"lags", spec.lags},
          {"events", events},
          {"random_events",
           {{"per_day", p.per_day},
            {"min_magnitude", p.min_magnitude},
            {"max_magnitude", p.max_magnitude},
            {"duration", p.duration},
            {"sources", p.sources}}}};
}

NetworkSpec network_spec_from_json(const nlohmann::json& j) {
  try {
    NetworkSpec spec;
    for (const auto& s : j.at("sensors")) {
      SensorSpec out;
      out.id = s.at("id").get<std::string>();
      out.kind = parse_kind(s.at("kind").get<std::string>());
      out.x = s.value("x", 0.0);
      out.y = s.value("y", 0.0);
      out.base = s.value("base", 0.0);
      out.amplitude = s.value("amplitude", 0.0);
      out.phase = s.value("phase", 0.0);
      out.noise_std = s.value("noise_std", 0.0);
      out.walk_std = s.value("walk_std", 0.0);
      spec.sensors.push_back(std::move(out));
    }
    spec.coupling = j.at("coupling").get<std::vector<double>>();
    for (const auto& l : j.at("lags")) {
      if (!l.is_number_integer() || l.get<std::int64_t>() < 0) throw ConfigError("lags must be nonnegative integers");
      spec.lags.push_back(l.get<std::size_t>());
    }
    if (j.contains("events")) {
      for (const auto& e : j.at("events"))
        spec.events.push_back({e.at("time").get<std::int64_t>(), e.at("magnitude").get<double>(),
                               e.at("source").get<std::size_t>(), e.value("duration", std::size_t{1})});
    }
    if (j.contains("random_events")) {
      const auto& p = j.at("random_events");
      spec.random_events = {p.value("per_day", 0.0), p.value("min_magnitude", 0.0), p.value("max_magnitude", 0.0),
                            p.value("duration", std::size_t{6}), p.value("sources", std::vector<std::size_t>{})};
    }
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("network spec: ") + e.what());
  }
}

nlohmann::json to_json(const GeneratorConfig& c) {
  return {{"length", c.length},       {"period", c.period}, {"noise_std", c.noise_std},
          {"noise_scale", c.noise_scale}, {"seed", c.seed},     {"start", c.start}};
}

GeneratorConfig generator_config_from_json(const nlohmann::json& j, GeneratorConfig c) {
  if (!j.is_object()) throw ConfigError("generator config must be an object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "length") c.length = value.get<std::size_t>();
      else if (key == "period") c.period = value.get<std::size_t>();
      else if (key == "noise_std") c.noise_std = value.get<std::vector<double>>();
      else if (key == "noise_scale") c.noise_scale = value.get<double>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "start") c.start = value.get<std::int64_t>();
      else throw ConfigError("unknown generator config key: " + key);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("generator config key '" + key + "': " + e.what());
    }
  }
  return c;
}

}  // namespace hdsrnn::synth
