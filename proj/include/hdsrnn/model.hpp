#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "hdsrnn/attention.hpp"
#include "hdsrnn/layers.hpp"

namespace hdsrnn::nn {

/// Architecture and variant selection.
///
/// spatial_variant None together with temporal_attention false is the plain
/// encoder-decoder Seq2Seq baseline.
struct ModelConfig {
  std::size_t sensors = 18;
  std::size_t encoder_length = 60;
  std::size_t decoder_length = 4;
  std::size_t hidden_dim = 64;
  std::size_t layer_count = 1;
  SpatialVariant spatial_variant = SpatialVariant::Hybrid;
  bool temporal_attention = true;
  /// Spatial attention width l; 0 selects T for TemporalInput and m otherwise.
  std::size_t attention_width = 0;
  double dropout = 0.2;
  std::size_t target_sensor = 0;
  bool teacher_forcing = false;

  /// Throws ConfigError on any violated invariant.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

nlohmann::json to_json(const ModelConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = {});

/// Per-pass switches: dropout mode, its RNG, and optional teacher-forcing targets.
struct RunContext {
  bool training = false;
  Rng* rng = nullptr;
  std::span<const double> teacher_targets;
};

struct EncoderGraph {
  Var states;                        // Z, [m x T]
  std::vector<Var> columns;          // z_t after dropout
  std::vector<Var> spatial_weights;  // a_t, [n] each; empty without spatial attention
};

struct ForecastGraph {
  Var values;                         // [tau]
  std::vector<Var> spatial_weights;   // T entries of [n]
  std::vector<Var> temporal_weights;  // tau entries of [T]
};

/// Evaluated forecast with attention traces. Traces are empty tensors when the
/// corresponding attention stage is disabled.
struct Forecast {
  std::vector<double> values;  // y_hat_{T+1..T+tau}
  Tensor spatial_trace;        // [T x n]
  Tensor temporal_trace;       // [tau x T]
};

/// Dual-stage attention encoder-decoder.
class Model {
 public:
  Model(ModelConfig config, std::uint64_t init_seed);

  const ModelConfig& config() const noexcept { return config_; }
  ParameterSet& parameters() noexcept { return params_; }
  const ParameterSet& parameters() const noexcept { return params_; }

  const std::optional<SpatialAttention>& spatial_attention() const noexcept { return spatial_; }
  const std::optional<TemporalAttention>& temporal_attention() const noexcept { return temporal_; }
  const LstmStack& encoder() const noexcept { return encoder_; }
  const LstmStack& decoder() const noexcept { return decoder_; }
  const AffineLayer& decoder_input() const noexcept { return decoder_input_; }
  const AffineLayer& output() const noexcept { return output_; }

  /// Runs the spatial-attention encoder over window x ([n x T]).
  EncoderGraph encode(ad::Tape& tape, std::span<const Var> bound, const Tensor& x, RunContext& ctx) const;
  /// Runs the temporal-attention decoder, seeding the previous output with y_last.
  ForecastGraph decode(ad::Tape& tape, std::span<const Var> bound, const EncoderGraph& encoded, double y_last,
                       RunContext& ctx) const;
  ForecastGraph build(ad::Tape& tape, std::span<const Var> bound, const Tensor& x, double y_last,
                      RunContext& ctx) const;

  /// Inference-mode forward pass (dropout off).
  Forecast forward(const Tensor& x, double y_last) const;

 private:
  ModelConfig config_;
  ParameterSet params_;
  std::optional<SpatialAttention> spatial_;
  std::optional<TemporalAttention> temporal_;
  LstmStack encoder_;
  LstmStack decoder_;
  AffineLayer decoder_input_;
  AffineLayer output_;
};

Forecast evaluate_forecast(const ForecastGraph& graph);

/// Versioned JSON container: config plus named parameter tensors.
nlohmann::json checkpoint_to_json(const Model& model);
Model model_from_checkpoint(const nlohmann::json& j);
void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

/// Serializes a parameter set as {name: {shape, data}}; values round-trip exactly.
nlohmann::json parameters_to_json(const ParameterSet& params);
/// Overwrites `params` from JSON; names and shapes must match exactly.
void parameters_from_json(const nlohmann::json& j, ParameterSet& params);

}  // namespace hdsrnn::nn
