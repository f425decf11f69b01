#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hdsrnn/metrics.hpp"
#include "hdsrnn/training.hpp"

namespace hdsrnn::baselines {

using data::Window;

enum class BaselineKind { Persistence, SeasonalNaive, LinearAR, MLP, Seq2Seq };

std::string to_string(BaselineKind kind);
BaselineKind parse_baseline_kind(const std::string& name);

/// Repeats y_T for every step.
std::vector<double> persistence_forecast(const Window& window, std::size_t decoder_length);

/// y_hat_{T+j} = y_{T+j-period}, recursing into earlier forecasts when j > period.
/// Lookback comes from the window's target row.
std::vector<double> seasonal_naive_forecast(const Window& window, std::size_t target_sensor,
                                            std::size_t decoder_length, std::size_t period);
/// Same, with lookback taken from the panel before index `end` (inclusive).
std::vector<double> seasonal_naive_forecast(const data::SeriesPanel& panel, std::size_t end,
                                            std::size_t target_sensor, std::size_t decoder_length,
                                            std::size_t period);

/// y_t = intercept + sum_i coefficients[i] * y_{t-1-i}.
struct LinearAR {
  double intercept = 0.0;
  std::vector<double> coefficients;

  std::size_t order() const noexcept { return coefficients.size(); }
};

/// OLS on the target row's last `order` values against the first target step.
/// A constant target falls back to an intercept-only fit; any other rank
/// deficiency throws RankDeficiencyError.
LinearAR linear_ar_fit(std::span<const Window> windows, std::size_t target_sensor, std::size_t order);
/// Recursive multi-step forecast.
std::vector<double> linear_ar_forecast(const LinearAR& model, const Window& window, std::size_t target_sensor,
                                       std::size_t decoder_length);

struct MlpConfig {
  std::size_t sensors = 18;
  std::size_t encoder_length = 60;
  std::size_t decoder_length = 4;
  std::vector<std::size_t> hidden = {64, 64};

  void validate() const;
};

/// Flattened n x T window -> tanh hidden layers -> tau outputs.
class Mlp final : public train::Forecaster {
 public:
  Mlp(MlpConfig config, std::uint64_t init_seed);

  const MlpConfig& config() const noexcept { return config_; }
  nn::ParameterSet& parameters() override { return params_; }
  const nn::ParameterSet& parameters() const override { return params_; }
  std::size_t decoder_length() const override { return config_.decoder_length; }
  ad::Var predict(ad::Tape& tape, std::span<const ad::Var> bound, const Window& window,
                  nn::RunContext& ctx) const override;
  nlohmann::json config_json() const override;
  nlohmann::json checkpoint() const override;

 private:
  MlpConfig config_;
  nn::ParameterSet params_;
  std::vector<nn::AffineLayer> layers_;
};

struct BaselineSpec {
  BaselineKind kind = BaselineKind::Persistence;
  std::size_t ar_order = 4;
  std::size_t period = data::kDefaultPeriod;
  std::vector<std::size_t> mlp_hidden = {64, 64};
  /// Seq2Seq architecture; spatial and temporal attention are forced off.
  nn::ModelConfig seq2seq;
  train::TrainConfig training;

  void validate() const;
};

nlohmann::json to_json(const BaselineSpec& spec);
/// Missing keys keep their defaults; unknown keys are rejected.
BaselineSpec baseline_spec_from_json(const nlohmann::json& j, BaselineSpec base = {});

/// Seq2Seq model config derived from `base`: attention disabled, sizes kept.
nn::ModelConfig seq2seq_config(nn::ModelConfig base);

struct BaselineResult {
  BaselineKind kind = BaselineKind::Persistence;
  eval::MetricSet residual;
  std::optional<eval::MetricSet> reconstructed;  // only with a fitted pretreatment
  eval::Forecasts forecasts;                     // model scale, one per test window
  eval::Forecasts reconstructions;               // original units
  std::optional<train::TrainReport> training;
  std::optional<LinearAR> linear_ar;
};

/// Fits on the train split (early stopping on validation for the neural
/// baselines) and evaluates on the test windows shared with the main model.
BaselineResult run_baseline(const BaselineSpec& spec, const data::Pretreated& data, std::size_t encoder_length,
                            std::size_t decoder_length, std::size_t target_sensor);
/// Same on a panel used as-is (no pretreatment); only model-scale metrics.
BaselineResult run_baseline(const BaselineSpec& spec, const data::SeriesPanel& panel, std::size_t encoder_length,
                            std::size_t decoder_length, std::size_t target_sensor);

nlohmann::json to_json(const BaselineResult& result, bool deterministic = false);

}  // namespace hdsrnn::baselines
