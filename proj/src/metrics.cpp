#include "hdsrnn/metrics.hpp"

#include <cmath>

#include "hdsrnn/errors.hpp"

namespace hdsrnn::eval {

namespace {

void check_aligned(const Forecasts& pred, const Forecasts& truth) {
  if (pred.size() != truth.size())
    throw DimensionError("metrics: " + std::to_string(pred.size()) + " forecasts vs " + std::to_string(truth.size()) +
                         " truths");
  if (pred.empty()) throw DimensionError("metrics: no windows");
  const std::size_t steps = pred.front().size();
  if (steps == 0) throw DimensionError("metrics: empty forecast");
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].size() != steps || truth[i].size() != steps)
      throw DimensionError("metrics: window " + std::to_string(i) + " has mismatched forecast length");
  }
}

MetricSet accumulate(const Forecasts& pred, const Forecasts& truth, std::size_t first, std::size_t last, Scale scale) {
  MetricSet m;
  m.scale = scale;
  m.windows = pred.size();
  m.steps = last - first;
  double sq = 0.0, abs = 0.0, signed_sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (std::size_t j = first; j < last; ++j) {
      const double e = pred[i][j] - truth[i][j];
      sq += e * e;
      abs += std::abs(e);
      signed_sum += e;
    }
  }
  const double count = static_cast<double>(pred.size() * (last - first));
  m.mse = sq / count;
  m.rmse = std::sqrt(m.mse);
  m.mae = abs / count;
  m.mean_error = signed_sum / count;
  return m;
}

}  // namespace

std::string to_string(Scale scale) { return scale == Scale::Residual ? "residual" : "reconstructed"; }

MetricSet metrics(const Forecasts& pred, const Forecasts& truth, Scale scale) {
  check_aligned(pred, truth);
  return accumulate(pred, truth, 0, pred.front().size(), scale);
}

std::vector<MetricSet> per_step_metrics(const Forecasts& pred, const Forecasts& truth, Scale scale) {
  check_aligned(pred, truth);
  std::vector<MetricSet> out;
  for (std::size_t j = 0; j < pred.front().size(); ++j) out.push_back(accumulate(pred, truth, j, j + 1, scale));
  return out;
}

nlohmann::json to_json(const MetricSet& m) {
  return {{"mse", m.mse},   {"rmse", m.rmse},       {"mae", m.mae},   {"mean_error", m.mean_error},
          {"scale", to_string(m.scale)}, {"windows", m.windows}, {"steps", m.steps}};
}

}  // namespace hdsrnn::eval
