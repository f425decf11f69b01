#include "hdsrnn/experiment.hpp"

#include <fstream>

#include "hdsrnn/errors.hpp"

namespace hdsrnn::experiment {

namespace {

template <class F>
void for_keys(const nlohmann::json& j, const std::string& what, F&& f) {
  if (!j.is_object()) throw ConfigError(what + " must be an object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (!f(key, value)) throw ConfigError("unknown " + what + " key: " + key);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(what + " key '" + key + "': " + e.what());
    }
  }
}

DataSource data_source_from_json(const nlohmann::json& j, DataSource d) {
  for_keys(j, "data", [&](const std::string& key, const nlohmann::json& v) {
    if (key == "csv") d.csv = v.get<std::string>();
    else if (key == "network") {
      if (v.is_object()) {
        d.network = "custom";
        d.custom = synth::network_spec_from_json(v);
      } else {
        d.network = v.get<std::string>();
      }
    } else if (key == "lag") d.lag = v.get<std::size_t>();
    else if (key == "generator") d.generator = synth::generator_config_from_json(v, d.generator);
    else return false;
    return true;
  });
  return d;
}

nlohmann::json to_json(const DataSource& d) {
  nlohmann::json j;
  if (!d.synthetic()) {
    j["csv"] = d.csv.string();
    return j;
  }
  j["network"] = d.custom ? synth::to_json(*d.custom) : nlohmann::json(d.network);
  if (d.network == "planted_lag") j["lag"] = d.lag;
  j["generator"] = synth::to_json(d.generator);
  return j;
}

}  // namespace

std::optional<synth::NetworkSpec> DataSource::network_spec() const {
  if (!synthetic()) return std::nullopt;
  if (network == "default_wds") return synth::default_wds_spec();
  if (network == "planted_lag") return synth::planted_lag_spec(lag);
  if (network == "custom" && custom) return *custom;
  throw ConfigError("unknown network '" + network + "'; valid networks: default_wds, planted_lag, or an inline spec");
}

void ExperimentConfig::validate() const {
  if (data.synthetic()) {
    const synth::NetworkSpec spec = *data.network_spec();
    spec.validate();
    data.generator.validate(spec.size());
  }
  if (period == 0) throw ConfigError("period must be positive");
  data::ratio_split(100, split[0], split[1], split[2]);
  model.validate();
  training.validate();
  baseline.validate();
  if (sweep.parameter != "encoder_length" && sweep.parameter != "decoder_length")
    throw ConfigError("sweep parameter must be encoder_length or decoder_length, got '" + sweep.parameter + "'");
  if (sweep.values.empty()) throw ConfigError("sweep needs at least one value");
  for (std::size_t v : sweep.values)
    if (v == 0) throw ConfigError("sweep values must be positive");
}

nlohmann::json to_json(const ExperimentConfig& c) {
  return {{"data", to_json(c.data)},
          {"output", c.output.string()},
          {"period", c.period},
          {"split", c.split},
          {"pretreat", c.pretreat},
          {"target", c.target},
          {"model", nn::to_json(c.model)},
          {"training", train::to_json(c.training)},
          {"baseline", baselines::to_json(c.baseline)},
          {"sweep", {{"parameter", c.sweep.parameter}, {"values", c.sweep.values}}}};
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j, ExperimentConfig c) {
  for_keys(j, "experiment config", [&](const std::string& key, const nlohmann::json& v) {
    if (key == "data") c.data = data_source_from_json(v, c.data);
    else if (key == "output") c.output = v.get<std::string>();
    else if (key == "period") c.period = v.get<std::size_t>();
    else if (key == "split") c.split = v.get<std::array<double, 3>>();
    else if (key == "pretreat") c.pretreat = v.get<bool>();
    else if (key == "target") c.target = v.get<std::string>();
    else if (key == "model") c.model = nn::model_config_from_json(v, c.model);
    else if (key == "training") c.training = train::train_config_from_json(v, c.training);
    else if (key == "baseline") c.baseline = baselines::baseline_spec_from_json(v, c.baseline);
    else if (key == "sweep") {
      for_keys(v, "sweep", [&](const std::string& k, const nlohmann::json& s) {
        if (k == "parameter") c.sweep.parameter = s.get<std::string>();
        else if (k == "values") c.sweep.values = s.get<std::vector<std::size_t>>();
        else return false;
        return true;
      });
    } else return false;
    return true;
  });
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return experiment_config_from_json(read_json(path));
}

data::SeriesPanel load_panel(const ExperimentConfig& config) {
  data::SeriesPanel panel = config.data.synthetic()
                                ? synth::generate_panel(*config.data.network_spec(), config.data.generator)
                                : data::read_csv(config.data.csv);
  panel.split = data::ratio_split(panel.length(), config.split[0], config.split[1], config.split[2]);
  panel.validate();
  return panel;
}

void resolve(ExperimentConfig& config, const data::SeriesPanel& panel) {
  config.model.sensors = panel.sensor_count();
  if (!config.target.empty()) {
    try {
      config.model.target_sensor = panel.sensor_index(config.target);
    } catch (const std::exception&) {
      throw ConfigError("target sensor '" + config.target + "' is not in the panel");
    }
  } else {
    config.target = panel.sensors.at(config.model.target_sensor).id;
  }
  config.baseline.seq2seq.sensors = config.model.sensors;
  config.baseline.seq2seq.target_sensor = config.model.target_sensor;
  config.model.validate();
}

void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  os << j.dump(2) << '\n';
  os.flush();
  if (!os) throw FormatError("failed writing " + path.string());
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + " is not valid JSON: " + e.what());
  }
}

}  // namespace hdsrnn::experiment
