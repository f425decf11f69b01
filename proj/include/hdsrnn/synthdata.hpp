#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "hdsrnn/pipeline.hpp"

namespace hdsrnn::synth {

using data::SensorKind;
using data::SeriesPanel;

/// Per-sensor intrinsic signal parameters.
///
/// Flow: base + amplitude * (daily harmonic + half-day harmonic) + events + noise.
/// Pressure: base + random walk (walk_std per step) + events + noise.
struct SensorSpec {
  std::string id;
  SensorKind kind = SensorKind::Flow;
  double x = 0.0;
  double y = 0.0;
  double base = 0.0;
  double amplitude = 0.0;
  double phase = 0.0;
  double noise_std = 0.0;
  double walk_std = 0.0;

  friend bool operator==(const SensorSpec&, const SensorSpec&) = default;
};

/// Hann-shaped pulse added to the source sensor's intrinsic signal.
struct Event {
  std::int64_t time = 0;  // step index, may be negative (burn-in)
  double magnitude = 0.0;
  std::size_t source = 0;
  std::size_t duration = 1;

  friend bool operator==(const Event&, const Event&) = default;
};

/// Random pump starts drawn on top of the explicit schedule.
struct EventPolicy {
  double per_day = 0.0;
  double min_magnitude = 0.0;
  double max_magnitude = 0.0;
  std::size_t duration = 6;
  std::vector<std::size_t> sources;

  friend bool operator==(const EventPolicy&, const EventPolicy&) = default;
};

/// Sensors plus linear lagged coupling: x_b(t) = sum_a coupling(b,a) * u_a(t - lag(b,a)).
struct NetworkSpec {
  std::vector<SensorSpec> sensors;
  std::vector<double> coupling;  // [n x n] row-major, row = receiver
  std::vector<std::size_t> lags; // [n x n]
  std::vector<Event> events;
  EventPolicy random_events;

  std::size_t size() const noexcept { return sensors.size(); }
  double gain(std::size_t to, std::size_t from) const { return coupling.at(to * size() + from); }
  double& gain(std::size_t to, std::size_t from) { return coupling.at(to * size() + from); }
  std::size_t lag(std::size_t to, std::size_t from) const { return lags.at(to * size() + from); }
  std::size_t& lag(std::size_t to, std::size_t from) { return lags.at(to * size() + from); }
  std::size_t index_of(const std::string& id) const;

  /// Identity coupling for the given sensors.
  static NetworkSpec uncoupled(std::vector<SensorSpec> sensors);

  /// Throws ConfigError on violated invariants.
  void validate() const;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

struct DistanceKernel {
  double gain = 0.8;
  double length_scale = 3.0;
  double radius = 9.0;
  double speed = 1.5;  // distance per step
};

/// Couples every flow sensor to every other sensor within the radius:
/// gain * exp(-d / length_scale), negated for pressure receivers, lag round(d / speed).
void apply_distance_kernel(NetworkSpec& spec, const DistanceKernel& kernel = {});

struct GeneratorConfig {
  std::size_t length = 48 * 42;
  std::size_t period = data::kDefaultPeriod;
  /// Overrides the per-sensor noise levels when non-empty.
  std::vector<double> noise_std;
  double noise_scale = 1.0;
  std::uint64_t seed = 1;
  std::int64_t start = 1577836800;  // 2020-01-01T00:00:00Z

  void validate(std::size_t sensors) const;
};

/// Explicit events plus the policy's random draws for this configuration.
std::vector<Event> realized_events(const NetworkSpec& spec, const GeneratorConfig& config);

/// Fully determined by (spec, config); split bounds are 4:1:1.
SeriesPanel generate_panel(const NetworkSpec& spec, const GeneratorConfig& config);

/// 18 sensors (11 flow, 7 pressure) with three booster stations F1/P1, F2/P2,
/// F3/P3. F8 sits next to F4 and station 3, far from F5/F6; F11 is an isolated
/// noise-only sensor.
NetworkSpec default_wds_spec();

/// Three sensors: target F1 echoes pulses of driver F2 `lag` steps later; F3 is
/// independent noise.
NetworkSpec planted_lag_spec(std::size_t lag = 40);

nlohmann::json to_json(const NetworkSpec& spec);
NetworkSpec network_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GeneratorConfig& config);
GeneratorConfig generator_config_from_json(const nlohmann::json& j, GeneratorConfig base = {});

}  // namespace hdsrnn::synth
