#include "hdsrnn/model.hpp"

#include <fstream>

#include "hdsrnn/errors.hpp"

namespace hdsrnn::nn {

namespace {

constexpr const char* kCheckpointFormat = "hdsrnn-checkpoint";
constexpr int kCheckpointVersion = 1;

Tensor column(const Tensor& x, std::size_t j) {
  const std::size_t r = x.rows(), c = x.cols();
  Tensor col(ad::Shape{r});
  for (std::size_t i = 0; i < r; ++i) col[i] = x[i * c + j];
  return col;
}

Tensor stack_rows(const std::vector<Var>& rows) {
  if (rows.empty()) return {};
  const std::size_t cols = rows.front().size();
  Tensor out(ad::Shape{rows.size(), cols});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Tensor& v = rows[i].value();
    std::copy(v.values().begin(), v.values().end(), out.values().begin() + i * cols);
  }
  return out;
}

}  // namespace

void ModelConfig::validate() const {
  if (sensors < 1) throw ConfigError("sensors must be at least 1");
  if (encoder_length < 1) throw ConfigError("encoder_length must be at least 1");
  if (decoder_length < 1) throw ConfigError("decoder_length must be at least 1");
  if (hidden_dim < 1) throw ConfigError("hidden_dim must be at least 1");
  if (layer_count < 1) throw ConfigError("layer_count must be at least 1");
  if (target_sensor >= sensors) {
    throw ConfigError("target_sensor " + std::to_string(target_sensor) + " out of range for " +
                      std::to_string(sensors) + " sensors");
  }
  DropoutSpec{dropout, false}.validate();
}

nlohmann::json to_json(const ModelConfig& c) {
  return {
      {"sensors", c.sensors},
      {"encoder_length", c.encoder_length},
      {"decoder_length", c.decoder_length},
      {"hidden_dim", c.hidden_dim},
      {"layer_count", c.layer_count},
      {"spatial_variant", to_string(c.spatial_variant)},
      {"temporal_attention", c.temporal_attention},
      {"attention_width", c.attention_width},
      {"dropout", c.dropout},
      {"target_sensor", c.target_sensor},
      {"teacher_forcing", c.teacher_forcing},
  };
}

ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig c) {
  if (!j.is_object()) throw ConfigError("model config must be an object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "sensors") c.sensors = value.get<std::size_t>();
      else if (key == "encoder_length") c.encoder_length = value.get<std::size_t>();
      else if (key == "decoder_length") c.decoder_length = value.get<std::size_t>();
      else if (key == "hidden_dim") c.hidden_dim = value.get<std::size_t>();
      else if (key == "layer_count") c.layer_count = value.get<std::size_t>();
      else if (key == "spatial_variant") c.spatial_variant = parse_spatial_variant(value.get<std::string>());
      else if (key == "temporal_attention") c.temporal_attention = value.get<bool>();
      else if (key == "attention_width") c.attention_width = value.get<std::size_t>();
      else if (key == "dropout") c.dropout = value.get<double>();
      else if (key == "target_sensor") c.target_sensor = value.get<std::size_t>();
      else if (key == "teacher_forcing") c.teacher_forcing = value.get<bool>();
      else throw ConfigError("unknown model config key: " + key);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("model config key '" + key + "': " + e.what());
    }
  }
  return c;
}

Model::Model(ModelConfig config, std::uint64_t init_seed) : config_(config) {
  config_.validate();
  Rng rng(init_seed);
  const std::size_t n = config_.sensors;
  const std::size_t m = config_.hidden_dim;
  if (config_.spatial_variant != SpatialVariant::None) {
    spatial_ = SpatialAttention::create(params_, "encoder.spatial", config_.spatial_variant, n,
                                        config_.encoder_length, m, config_.attention_width, rng);
  }
  encoder_ = LstmStack::create(params_, "encoder.lstm", n, m, config_.layer_count, rng);
  if (config_.temporal_attention) {
    temporal_ = TemporalAttention::create(params_, "decoder.temporal", m, rng);
  }
  decoder_input_ = AffineLayer::create(params_, "decoder.input", 1 + m, 1, rng);
  decoder_ = LstmStack::create(params_, "decoder.lstm", 1, m, config_.layer_count, rng);
  output_ = AffineLayer::create(params_, "decoder.output", 2 * m, 1, rng);
}

EncoderGraph Model::encode(ad::Tape& tape, std::span<const Var> bound, const Tensor& x, RunContext& ctx) const {
  const std::size_t n = config_.sensors;
  const std::size_t horizon = config_.encoder_length;
  if (!x.shape().is_matrix() || x.rows() != n || x.cols() != horizon) {
    throw DimensionError("encode: window " + x.shape().str() + " does not match [" + std::to_string(n) + "x" +
                         std::to_string(horizon) + "]");
  }
  if (bound.size() != params_.size()) throw ContractViolation("encode: bound parameters do not match the model");
  const DropoutSpec drop{config_.dropout, ctx.training};
  if (ctx.training && config_.dropout > 0.0 && ctx.rng == nullptr) {
    throw ContractViolation("training-mode dropout requires an RNG");
  }

  EncoderGraph out;
  std::vector<LstmState> state = encoder_.zero_state(tape);
  std::optional<SpatialWindow> window;
  if (spatial_) window = prepare_spatial(*spatial_, bound, tape, x);
  out.columns.reserve(horizon);
  for (std::size_t t = 1; t <= horizon; ++t) {
    Var input;
    if (spatial_) {
      const LstmState& top = state.back();
      const Var a = spatial_weights(spatial_scores(*spatial_, bound, *window, t, top.h, top.s));
      out.spatial_weights.push_back(a);
      input = apply_spatial(a, window->snapshots[t - 1]);
    } else {
      input = tape.constant(column(x, t - 1));
    }
    const LstmState top = encoder_.step(bound, input, state);
    Rng* rng = ctx.rng;
    out.columns.push_back(drop.training && drop.rate > 0.0 ? dropout(drop, top.h, *rng) : top.h);
  }
  out.states = ad::stack_columns(out.columns);
  return out;
}

ForecastGraph Model::decode(ad::Tape& tape, std::span<const Var> bound, const EncoderGraph& encoded, double y_last,
                            RunContext& ctx) const {
  const std::size_t tau = config_.decoder_length;
  const std::size_t m = config_.hidden_dim;
  if (!encoded.states.valid() || encoded.states.value().rows() != m ||
      encoded.states.value().cols() != config_.encoder_length) {
    throw DimensionError("decode: encoder states do not match [m x T]");
  }
  const bool forcing = ctx.training && config_.teacher_forcing;
  if (forcing && ctx.teacher_targets.size() != tau) {
    throw DimensionError("decode: teacher forcing needs " + std::to_string(tau) + " targets");
  }
  const DropoutSpec drop{config_.dropout, ctx.training};

  ForecastGraph out;
  std::vector<LstmState> state = decoder_.zero_state(tape);
  std::optional<Var> projected;
  if (temporal_) projected = project_encoder_states(*temporal_, bound, encoded.states);

  Var previous = tape.constant(Tensor::scalar(y_last));
  std::vector<Var> outputs;
  outputs.reserve(tau);
  for (std::size_t step = 0; step < tau; ++step) {
    Var context;
    if (temporal_) {
      const LstmState& top = state.back();
      const Var beta = ad::softmax(temporal_scores_projected(*temporal_, bound, *projected, top.h, top.s));
      out.temporal_weights.push_back(beta);
      context = temporal_context(beta, encoded.states);
    } else {
      context = encoded.columns.back();
    }
    const Var input = affine(decoder_input_, bound, ad::concat(previous, context));
    const LstmState top = decoder_.step(bound, input, state);
    const Var hidden = drop.training && drop.rate > 0.0 ? dropout(drop, top.h, *ctx.rng) : top.h;
    const Var y = affine(output_, bound, ad::concat(hidden, context));
    outputs.push_back(y);
    previous = forcing ? tape.constant(Tensor::scalar(ctx.teacher_targets[step])) : y;
  }
  out.values = ad::concat(std::span<const Var>(outputs));
  out.spatial_weights = encoded.spatial_weights;
  return out;
}

ForecastGraph Model::build(ad::Tape& tape, std::span<const Var> bound, const Tensor& x, double y_last,
                           RunContext& ctx) const {
  return decode(tape, bound, encode(tape, bound, x, ctx), y_last, ctx);
}

Forecast Model::forward(const Tensor& x, double y_last) const {
  ad::Tape tape;
  const std::vector<Var> bound = params_.bind(tape);
  RunContext ctx;
  return evaluate_forecast(build(tape, bound, x, y_last, ctx));
}

Forecast evaluate_forecast(const ForecastGraph& graph) {
  Forecast f;
  f.values = graph.values.value().values();
  f.spatial_trace = stack_rows(graph.spatial_weights);
  f.temporal_trace = stack_rows(graph.temporal_weights);
  return f;
}

nlohmann::json parameters_to_json(const ParameterSet& params) {
  nlohmann::json out = nlohmann::json::object();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& t = params.value(i);
    std::vector<std::size_t> shape(t.shape().dims().begin(), t.shape().dims().end());
    out[params.name(i)] = {{"shape", shape}, {"data", t.values()}};
  }
  return out;
}

void parameters_from_json(const nlohmann::json& j, ParameterSet& params) {
  if (!j.is_object() || j.size() != params.size()) {
    throw FormatError("checkpoint parameter set does not match the model layout");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto it = j.find(params.name(i));
    if (it == j.end()) throw FormatError("checkpoint is missing parameter " + params.name(i));
    const auto shape = it->at("shape").get<std::vector<std::size_t>>();
    auto data = it->at("data").get<std::vector<double>>();
    Tensor t(ad::Shape(std::span<const std::size_t>(shape)), std::move(data));
    if (!(t.shape() == params.value(i).shape())) {
      throw FormatError("checkpoint parameter " + params.name(i) + " has shape " + t.shape().str() +
                        ", model expects " + params.value(i).shape().str());
    }
    params.value(i) = std::move(t);
  }
}

nlohmann::json checkpoint_to_json(const Model& model) {
  return {{"format", kCheckpointFormat},
          {"version", kCheckpointVersion},
          {"config", to_json(model.config())},
          {"parameters", parameters_to_json(model.parameters())}};
}

Model model_from_checkpoint(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat) throw FormatError("not a model checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw FormatError("unsupported checkpoint version " + j.at("version").dump());
    }
    Model model(model_config_from_json(j.at("config")), 0);
    parameters_from_json(j.at("parameters"), model.parameters());
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot write checkpoint " + path.string());
  os << checkpoint_to_json(model).dump() << '\n';
  if (!os) throw FormatError("failed writing checkpoint " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open checkpoint " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  return model_from_checkpoint(j);
}

}  // namespace hdsrnn::nn
