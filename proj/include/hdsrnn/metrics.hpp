#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

namespace hdsrnn::eval {

/// Residual: normalized model-space values. Reconstructed: original units.
enum class Scale { Residual, Reconstructed };

std::string to_string(Scale scale);

struct MetricSet {
  double mse = 0.0;
  double rmse = 0.0;
  double mae = 0.0;
  double mean_error = 0.0;  // signed mean of (pred - truth)
  Scale scale = Scale::Residual;
  std::size_t windows = 0;
  std::size_t steps = 0;  // per window
};

using Forecasts = std::vector<std::vector<double>>;

/// Errors over every window and step. Shapes must agree (DimensionError otherwise).
MetricSet metrics(const Forecasts& pred, const Forecasts& truth, Scale scale = Scale::Residual);

/// One MetricSet per forecast step t' = 1..tau.
std::vector<MetricSet> per_step_metrics(const Forecasts& pred, const Forecasts& truth,
                                        Scale scale = Scale::Residual);

nlohmann::json to_json(const MetricSet& m);

}  // namespace hdsrnn::eval
