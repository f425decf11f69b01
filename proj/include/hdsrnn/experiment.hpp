#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hdsrnn/baselines.hpp"
#include "hdsrnn/synthdata.hpp"
#include "hdsrnn/training.hpp"

namespace hdsrnn::experiment {

/// Where the raw panel comes from: a CSV file or the synthetic generator.
struct DataSource {
  std::filesystem::path csv;  // used when non-empty
  /// "default_wds", "planted_lag", or "custom" (network spec given inline).
  std::string network = "default_wds";
  std::size_t lag = 40;  // planted_lag only
  std::optional<synth::NetworkSpec> custom;
  synth::GeneratorConfig generator;

  bool synthetic() const noexcept { return csv.empty(); }
  /// Network behind a synthetic source; nullopt for CSV data.
  std::optional<synth::NetworkSpec> network_spec() const;
};

struct SweepSettings {
  std::string parameter = "encoder_length";
  std::vector<std::size_t> values = {5, 10, 20, 40, 80};
};

/// Everything one CLI invocation needs. Validated before any work runs;
/// unknown keys are rejected at every level.
struct ExperimentConfig {
  DataSource data;
  std::filesystem::path output = "out";
  std::size_t period = data::kDefaultPeriod;
  std::array<double, 3> split = {4.0, 1.0, 1.0};
  bool pretreat = true;
  std::string target;  // sensor id; empty keeps model.target_sensor
  nn::ModelConfig model;
  train::TrainConfig training;
  baselines::BaselineSpec baseline;
  SweepSettings sweep;

  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig experiment_config_from_json(const nlohmann::json& j, ExperimentConfig base = {});
/// Reads a JSON config file (ConfigError on syntax errors).
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Raw panel with the configured split applied.
data::SeriesPanel load_panel(const ExperimentConfig& config);

/// Fills panel-dependent fields: sensor count, target index (from `target`),
/// and the baseline's Seq2Seq sizes. Throws ConfigError for an unknown target.
void resolve(ExperimentConfig& config, const data::SeriesPanel& panel);

/// Writes `j` as pretty JSON, creating parent directories.
void write_json(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace hdsrnn::experiment
