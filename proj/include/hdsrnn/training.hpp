#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hdsrnn/model.hpp"
#include "hdsrnn/pipeline.hpp"

namespace hdsrnn::train {

using ad::Tensor;
using data::Window;

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment accumulators mirroring the parameter shapes.
struct AdamState {
  AdamOptions options;
  std::vector<Tensor> first;
  std::vector<Tensor> second;
  std::uint64_t step = 0;

  static AdamState for_parameters(const std::vector<Tensor>& params, AdamOptions options = {});
};

/// Bias-corrected Adam update in place. Shape mismatches throw ContractViolation.
void adam_step(AdamState& state, std::vector<Tensor>& params, const std::vector<Tensor>& grads);

/// Anything trainable by the loop below: hDS-RNN and the MLP baseline.
class Forecaster {
 public:
  virtual ~Forecaster() = default;

  virtual nn::ParameterSet& parameters() = 0;
  virtual const nn::ParameterSet& parameters() const = 0;
  virtual std::size_t decoder_length() const = 0;
  /// Forecast graph for one window, [tau].
  virtual ad::Var predict(ad::Tape& tape, std::span<const ad::Var> bound, const Window& window,
                          nn::RunContext& ctx) const = 0;
  virtual nlohmann::json config_json() const = 0;
  virtual nlohmann::json checkpoint() const = 0;

  /// Inference-mode forecast.
  std::vector<double> forecast(const Window& window) const;
};

class ModelForecaster final : public Forecaster {
 public:
  explicit ModelForecaster(nn::Model model) : model_(std::move(model)) {}

  nn::Model& model() noexcept { return model_; }
  const nn::Model& model() const noexcept { return model_; }

  nn::ParameterSet& parameters() override { return model_.parameters(); }
  const nn::ParameterSet& parameters() const override { return model_.parameters(); }
  std::size_t decoder_length() const override { return model_.config().decoder_length; }
  ad::Var predict(ad::Tape& tape, std::span<const ad::Var> bound, const Window& window,
                  nn::RunContext& ctx) const override;
  nlohmann::json config_json() const override { return nn::to_json(model_.config()); }
  nlohmann::json checkpoint() const override { return nn::checkpoint_to_json(model_); }

 private:
  nn::Model model_;
};

struct TrainConfig {
  std::size_t batch_size = 64;
  std::size_t max_epochs = 200;
  std::size_t patience = 20;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
  /// Global gradient-norm clip; 0 disables.
  double clip_norm = 5.0;

  std::vector<std::size_t> grid_encoder_length = {5, 10, 20, 40, 80};
  std::vector<std::size_t> grid_hidden_dim = {32, 64, 128, 256};
  std::vector<std::size_t> grid_layer_count = {1, 2, 4};
  std::vector<double> grid_learning_rate = {1e-3};
  /// Concurrent grid trials; 0 uses the hardware concurrency.
  std::size_t threads = 0;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

struct EpochStats {
  double loss = 0.0;
  std::size_t steps = 0;
  std::size_t clipped = 0;
};

/// One shuffled pass: one Adam step per mini-batch on the batch-mean MSE.
EpochStats train_epoch(Forecaster& model, AdamState& optimizer, std::span<const Window> windows,
                       std::size_t batch_size, Rng& rng, double clip_norm = 5.0);

struct ErrorSummary {
  double mse = 0.0;
  double mae = 0.0;
};

/// Inference-mode MSE/MAE over all windows and forecast steps.
ErrorSummary evaluate(const Forecaster& model, std::span<const Window> windows);

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  std::size_t best_epoch = 0;  // 1-based; 0 means the initial parameters were kept
  double best_validation = 0.0;
  std::size_t epochs_run = 0;
  bool stopped_early = false;
  std::size_t clip_events = 0;
  double test_mse = 0.0;
  double test_mae = 0.0;
  double wall_clock_seconds = 0.0;
  std::uint64_t seed = 0;
  nlohmann::json config;

  friend bool operator==(const TrainReport&, const TrainReport&) = default;
};

/// With `deterministic`, wall-clock time is left out so reports compare bytewise.
nlohmann::json to_json(const TrainReport& report, bool deterministic = false);

struct WindowSets {
  std::vector<Window> train;
  std::vector<Window> validation;
  std::vector<Window> test;
};

WindowSets make_windows(const data::SeriesPanel& normalized, std::size_t encoder_length, std::size_t decoder_length,
                        std::size_t target_sensor);

/// Early-stopped training; the best-validation parameters are restored before
/// the test evaluation. A non-finite loss throws TrainingFailure.
TrainReport fit(Forecaster& model, const TrainConfig& config, const WindowSets& windows);

struct FitResult {
  nn::Model model;
  TrainReport report;
};

/// Pretreated panel in, trained hDS-RNN out. The model is initialized from the
/// training seed.
FitResult fit(const nn::ModelConfig& model_config, const TrainConfig& train_config, const data::Pretreated& data);

struct Trial {
  nn::ModelConfig model_config;
  double learning_rate = 0.0;
  std::uint64_t seed = 0;
  TrainReport report;   // meaningful only when ok()
  std::string failure;  // empty unless training failed

  bool ok() const noexcept { return failure.empty(); }

  double validation_mse() const;
};

struct GridResult {
  std::vector<Trial> trials;  // grid order
  std::vector<std::size_t> ranking;  // trial indices by validation MSE, failures last
  const Trial& best() const;
};

/// Trains every grid combination independently (concurrently) and ranks them.
GridResult grid_search(const nn::ModelConfig& template_config, const TrainConfig& config,
                       const data::Pretreated& data);

nlohmann::json to_json(const GridResult& result, bool deterministic = false);

}  // namespace hdsrnn::train
