#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hdsrnn/metrics.hpp"
#include "hdsrnn/synthdata.hpp"
#include "hdsrnn/training.hpp"

namespace hdsrnn::eval {

/// Test-split evaluation of one forecaster on both scales.
struct Evaluation {
  MetricSet residual;
  MetricSet reconstructed;
  std::vector<MetricSet> residual_per_step;
  std::vector<MetricSet> reconstructed_per_step;
  Forecasts forecasts;        // model scale
  Forecasts reconstructions;  // original units
};

Evaluation evaluate_test(const train::Forecaster& model, const data::Pretreated& data, std::size_t encoder_length,
                         std::size_t target_sensor);
Evaluation evaluate_test(const nn::Model& model, const data::Pretreated& data);

nlohmann::json to_json(const Evaluation& e);

struct SweepPoint {
  std::size_t value = 0;
  std::uint64_t seed = 0;
  bool converged = false;
  std::string failure;  // set when training diverged or could not run
  train::TrainReport report;
  std::optional<Evaluation> evaluation;
};

struct SweepResult {
  std::string parameter;  // "encoder_length" or "decoder_length"
  std::vector<SweepPoint> points;
};

/// Trains and evaluates one model per value. Point i uses seed
/// derive_seed(config.seed, i); failures are recorded, never dropped.
SweepResult sweep_encoder_length(const nn::ModelConfig& base, const train::TrainConfig& config,
                                 const std::vector<std::size_t>& values, const data::Pretreated& data);
SweepResult sweep_decoder_length(const nn::ModelConfig& base, const train::TrainConfig& config,
                                 const std::vector<std::size_t>& values, const data::Pretreated& data);

/// Columns T, mse, mae, converged. Non-converged rows carry nan metrics.
void write_encoder_sweep_csv(const SweepResult& result, const std::filesystem::path& path,
                             Scale scale = Scale::Residual);
/// Columns tau, step, mse, mae; one row per forecast step.
void write_decoder_sweep_csv(const SweepResult& result, const std::filesystem::path& path,
                             Scale scale = Scale::Residual);

nlohmann::json to_json(const SweepResult& result, bool deterministic = false);

struct AttentionSummary {
  std::vector<std::string> sensors;
  std::vector<double> mean_weight;            // sums to 1
  std::optional<std::vector<double>> distance;  // to the target, from a NetworkSpec
  std::optional<std::vector<double>> coupling;  // gain(target, k), from a NetworkSpec
  std::string target;
  std::size_t windows = 0;
};

/// Averages the spatial weights a_t over every test window and encoder step.
/// Throws ContractViolation for a model without spatial attention or one that
/// was never trained (report.epochs_run == 0).
AttentionSummary export_spatial_weights(const nn::Model& model, const train::TrainReport& report,
                                        const data::Pretreated& data, const synth::NetworkSpec* spec = nullptr);

/// Columns sensor, mean_weight, distance, coupling (last two empty without a spec).
void write_attention_csv(const AttentionSummary& summary, const std::filesystem::path& path);

nlohmann::json to_json(const AttentionSummary& summary);

}  // namespace hdsrnn::eval
