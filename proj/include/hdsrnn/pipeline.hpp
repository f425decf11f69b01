#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hdsrnn/tensor.hpp"

namespace hdsrnn::data {

using ad::Tensor;

inline constexpr std::int64_t kCadenceSeconds = 1800;
inline constexpr std::size_t kDefaultPeriod = 48;

enum class SensorKind { Flow, Pressure, Other };

std::string to_string(SensorKind kind);
/// Kind from the id prefix: "F..." flow, "P..." pressure, anything else other.
SensorKind kind_from_id(const std::string& id);

struct Sensor {
  std::string id;
  SensorKind kind = SensorKind::Other;

  friend bool operator==(const Sensor&, const Sensor&) = default;
};

enum class Split { Train, Validation, Test };

/// Split boundaries over time indices: train [0, train_end), validation
/// [train_end, val_end), test [val_end, length).
struct SplitBounds {
  std::size_t train_end = 0;
  std::size_t val_end = 0;

  friend bool operator==(const SplitBounds&, const SplitBounds&) = default;
};

/// Rounded 4:1:1 split of `length` points (or any other ratio).
SplitBounds ratio_split(std::size_t length, double train = 4.0, double val = 1.0, double test = 1.0);

/// n sensors sampled on a shared 30-minute grid.
struct SeriesPanel {
  std::vector<Sensor> sensors;
  std::vector<std::int64_t> timestamps;  // unix seconds
  Tensor values;                         // [n x L]
  SplitBounds split;

  std::size_t sensor_count() const noexcept { return sensors.size(); }
  std::size_t length() const noexcept { return timestamps.size(); }
  double at(std::size_t sensor, std::size_t t) const { return values.at(sensor, t); }

  std::size_t split_begin(Split s) const;
  std::size_t split_end(Split s) const;

  /// Throws ConfigError/AlignmentError on violated invariants.
  void validate() const;
  std::size_t sensor_index(const std::string& id) const;

  friend bool operator==(const SeriesPanel&, const SeriesPanel&) = default;
};

/// Reads `timestamp,<sensor>,...` with ISO-8601 UTC timestamps. Split bounds
/// default to 4:1:1.
SeriesPanel read_csv(const std::filesystem::path& path);
SeriesPanel parse_csv(const std::string& text);
void write_csv(const SeriesPanel& panel, const std::filesystem::path& path);
std::string format_csv(const SeriesPanel& panel);

std::string format_timestamp(std::int64_t unix_seconds);
std::int64_t parse_timestamp(const std::string& text);

/// First-order differences plus the initial raw values needed to integrate back.
///
/// Differenced index i corresponds to raw index i + 1 and keeps its timestamp;
/// split bounds shift down by one.
struct DifferencedPanel {
  SeriesPanel panel;
  std::vector<double> initial;  // raw x_0 per sensor
};

DifferencedPanel difference(const SeriesPanel& raw);
/// Inverse of difference(): cumulative sum from the initial values.
SeriesPanel integrate(const DifferencedPanel& diff);

/// Seasonal profile and residual moments, fitted on the training split only.
struct DecompositionModel {
  std::size_t period = kDefaultPeriod;
  Tensor profile;             // [n x period]
  std::vector<double> mean;   // residual mean per sensor
  std::vector<double> scale;  // residual standard deviation per sensor

  /// Slot of a timestamp: (t / cadence) mod period.
  std::size_t slot(std::int64_t timestamp) const;

  friend bool operator==(const DecompositionModel&, const DecompositionModel&) = default;
};

/// Per-slot mean over the largest whole number of periods at the start of the
/// training split. Requires at least two periods.
DecompositionModel fit_seasonal(const SeriesPanel& differenced, std::size_t period = kDefaultPeriod);
SeriesPanel deseasonalize(const SeriesPanel& differenced, const DecompositionModel& model);
SeriesPanel reseasonalize(const SeriesPanel& residual, const DecompositionModel& model);

/// Stores training-split mean and population standard deviation in `model`.
void fit_moments(const SeriesPanel& residual, DecompositionModel& model);
SeriesPanel normalize(const SeriesPanel& residual, const DecompositionModel& model);
SeriesPanel denormalize(const SeriesPanel& normalized, const DecompositionModel& model);

nlohmann::json to_json(const DecompositionModel& model);
DecompositionModel decomposition_from_json(const nlohmann::json& j);

/// One training example. `end` indexes the last encoder step in the windowed
/// panel; `anchor_time` is its timestamp.
struct Window {
  Tensor x;                     // [n x T]
  double y_last = 0.0;          // target at the last encoder step
  std::vector<double> targets;  // next tau target values
  std::size_t end = 0;
  std::int64_t anchor_time = 0;
};

/// Stride-1 windows fully inside one split.
std::vector<Window> windowize(const SeriesPanel& panel, std::size_t encoder_length, std::size_t decoder_length,
                              std::size_t target_sensor, Split split);
/// Number of windows windowize() would produce.
std::size_t window_count(const SeriesPanel& panel, std::size_t encoder_length, std::size_t decoder_length,
                         Split split);

/// Maps a normalized residual forecast of `sensor` back to original units:
/// undo the z-score, add the seasonal profile, integrate from the anchor.
std::vector<double> reconstruct(std::span<const double> residual_forecast, const DecompositionModel& model,
                                std::size_t sensor, std::int64_t anchor_time, double anchor_value);

/// Raw panel, fitted decomposition and the model-ready normalized residuals.
struct Pretreated {
  SeriesPanel raw;
  DecompositionModel model;
  std::vector<double> initial;
  SeriesPanel normalized;

  /// Raw value at the window's last encoder step.
  double anchor_value(const Window& w, std::size_t sensor) const;
};

Pretreated pretreat(const SeriesPanel& raw, std::size_t period = kDefaultPeriod);
/// normalized -> denormalize -> reseasonalize -> integrate.
SeriesPanel invert(const SeriesPanel& normalized, const DecompositionModel& model, std::span<const double> initial);

}  // namespace hdsrnn::data
