#include "hdsrnn/pipeline.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hdsrnn/errors.hpp"

namespace hdsrnn::data {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

SeriesPanel with_values(const SeriesPanel& like, Tensor values) {
  SeriesPanel out;
  out.sensors = like.sensors;
  out.timestamps = like.timestamps;
  out.split = like.split;
  out.values = std::move(values);
  return out;
}

void require_model(const SeriesPanel& panel, const DecompositionModel& model) {
  if (model.profile.size() == 0 || model.profile.rows() != panel.sensor_count() || model.profile.cols() != model.period)
    throw DimensionError("decomposition model fitted for " + std::to_string(model.profile.size() ? model.profile.rows() : 0) +
                         " sensors, panel has " + std::to_string(panel.sensor_count()));
}

void require_moments(const SeriesPanel& panel, const DecompositionModel& model) {
  if (model.mean.size() != panel.sensor_count() || model.scale.size() != panel.sensor_count())
    throw ContractViolation("residual moments not fitted for this panel");
}

}  // namespace

std::string to_string(SensorKind kind) {
  switch (kind) {
    case SensorKind::Flow: return "flow";
    case SensorKind::Pressure: return "pressure";
    case SensorKind::Other: return "other";
  }
  return "other";
}

SensorKind kind_from_id(const std::string& id) {
  if (!id.empty() && (id[0] == 'F' || id[0] == 'f')) return SensorKind::Flow;
  if (!id.empty() && (id[0] == 'P' || id[0] == 'p')) return SensorKind::Pressure;
  return SensorKind::Other;
}

SplitBounds ratio_split(std::size_t length, double train, double val, double test) {
  if (train <= 0.0 || val < 0.0 || test < 0.0) throw ConfigError("split ratios must be positive");
  const double total = train + val + test;
  const auto train_end = static_cast<std::size_t>(std::llround(static_cast<double>(length) * train / total));
  const auto val_end = static_cast<std::size_t>(std::llround(static_cast<double>(length) * (train + val) / total));
  return {train_end, std::max(train_end, val_end)};
}

std::size_t SeriesPanel::split_begin(Split s) const {
  switch (s) {
    case Split::Train: return 0;
    case Split::Validation: return split.train_end;
    case Split::Test: return split.val_end;
  }
  return 0;
}

std::size_t SeriesPanel::split_end(Split s) const {
  switch (s) {
    case Split::Train: return split.train_end;
    case Split::Validation: return split.val_end;
    case Split::Test: return length();
  }
  return 0;
}

void SeriesPanel::validate() const {
  if (sensors.empty()) throw ConfigError("panel has no sensors");
  if (values.shape().rank() != 2 || values.rows() != sensors.size() || values.cols() != timestamps.size())
    throw DimensionError("panel values must be [" + std::to_string(sensors.size()) + " x " +
                         std::to_string(timestamps.size()) + "]");
  for (std::size_t i = 1; i < timestamps.size(); ++i) {
    if (timestamps[i] - timestamps[i - 1] != kCadenceSeconds)
      throw AlignmentError("timestamps must advance by exactly 30 minutes (at index " + std::to_string(i) + ")");
  }
  if (!(split.train_end <= split.val_end && split.val_end <= length()))
    throw ConfigError("split boundaries out of order or out of range");
  if (!values.all_finite()) throw FormatError("panel contains non-finite values");
}

std::size_t SeriesPanel::sensor_index(const std::string& id) const {
  for (std::size_t k = 0; k < sensors.size(); ++k)
    if (sensors[k].id == id) return k;
  throw ConfigError("unknown sensor '" + id + "'");
}

std::string format_timestamp(std::int64_t unix_seconds) {
  using namespace std::chrono;
  const std::int64_t days = floor_div(unix_seconds, 86400);
  const std::int64_t rem = unix_seconds - days * 86400;
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(rem / 3600),
                static_cast<int>(rem / 60 % 60), static_cast<int>(rem % 60));
  return buf;
}

std::int64_t parse_timestamp(const std::string& text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  char sep = 0;
  int consumed = 0;
  const std::string t = trim(text);
  if (std::sscanf(t.c_str(), "%4d-%2d-%2d%c%2d:%2d:%2d%n", &y, &mo, &d, &sep, &h, &mi, &s, &consumed) != 7 ||
      (sep != 'T' && sep != ' '))
    throw FormatError("bad ISO-8601 timestamp '" + text + "'");
  const std::string tail = t.substr(static_cast<std::size_t>(consumed));
  if (!(tail.empty() || tail == "Z" || tail == "+00:00"))
    throw FormatError("only UTC timestamps are supported: '" + text + "'");
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 59) throw FormatError("invalid date '" + text + "'");
  return sys_days{ymd}.time_since_epoch().count() * 86400LL + h * 3600 + mi * 60 + s;
}

SeriesPanel parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty CSV");
  const auto header = split_line(line);
  if (header.size() < 2 || trim(header[0]) != "timestamp")
    throw FormatError("CSV header must be 'timestamp,<sensor_id>,...'");
  SeriesPanel panel;
  for (std::size_t k = 1; k < header.size(); ++k) {
    const std::string id = trim(header[k]);
    if (id.empty()) throw FormatError("empty sensor id in header");
    panel.sensors.push_back({id, kind_from_id(id)});
  }
  const std::size_t n = panel.sensors.size();
  std::vector<std::vector<double>> columns(n);
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != n + 1)
      throw FormatError("row " + std::to_string(row) + ": expected " + std::to_string(n + 1) + " fields");
    panel.timestamps.push_back(parse_timestamp(cells[0]));
    for (std::size_t k = 0; k < n; ++k) {
      const std::string cell = trim(cells[k + 1]);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v))
        throw FormatError("row " + std::to_string(row) + ", sensor " + panel.sensors[k].id + ": missing or invalid value '" +
                          cell + "'");
      columns[k].push_back(v);
    }
  }
  const std::size_t length = panel.timestamps.size();
  if (length == 0) throw InsufficientDataError("CSV has no data rows");
  std::vector<double> flat;
  flat.reserve(n * length);
  for (const auto& c : columns) flat.insert(flat.end(), c.begin(), c.end());
  panel.values = Tensor::matrix(n, length, std::move(flat));
  panel.split = ratio_split(length);
  panel.validate();
  return panel;
}

SeriesPanel read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str());
}

std::string format_csv(const SeriesPanel& panel) {
  std::string out = "timestamp";
  for (const auto& s : panel.sensors) out += "," + s.id;
  out += '\n';
  char buf[64];
  for (std::size_t t = 0; t < panel.length(); ++t) {
    out += format_timestamp(panel.timestamps[t]);
    for (std::size_t k = 0; k < panel.sensor_count(); ++k) {
      const auto res = std::to_chars(buf, buf + sizeof buf, panel.at(k, t));
      out += ',';
      out.append(buf, res.ptr);
    }
    out += '\n';
  }
  return out;
}

void write_csv(const SeriesPanel& panel, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << format_csv(panel);
}

DifferencedPanel difference(const SeriesPanel& raw) {
  const std::size_t n = raw.sensor_count(), length = raw.length();
  if (length < 2) throw InsufficientDataError("differencing needs at least 2 points, got " + std::to_string(length));
  DifferencedPanel out;
  out.panel.sensors = raw.sensors;
  out.panel.timestamps.assign(raw.timestamps.begin() + 1, raw.timestamps.end());
  out.panel.split = {raw.split.train_end > 0 ? raw.split.train_end - 1 : 0,
                     raw.split.val_end > 0 ? raw.split.val_end - 1 : 0};
  out.panel.values = Tensor(ad::Shape{n, length - 1});
  out.initial.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    out.initial[k] = raw.at(k, 0);
    for (std::size_t t = 1; t < length; ++t) out.panel.values.at(k, t - 1) = raw.at(k, t) - raw.at(k, t - 1);
  }
  return out;
}

SeriesPanel integrate(const DifferencedPanel& diff) {
  const SeriesPanel& d = diff.panel;
  const std::size_t n = d.sensor_count(), length = d.length() + 1;
  if (diff.initial.size() != n) throw DimensionError("one initial value per sensor required");
  SeriesPanel raw;
  raw.sensors = d.sensors;
  raw.timestamps.push_back(d.timestamps.front() - kCadenceSeconds);
  raw.timestamps.insert(raw.timestamps.end(), d.timestamps.begin(), d.timestamps.end());
  raw.split = {d.split.train_end + 1, d.split.val_end + 1};
  raw.values = Tensor(ad::Shape{n, length});
  for (std::size_t k = 0; k < n; ++k) {
    double acc = diff.initial[k];
    raw.values.at(k, 0) = acc;
    for (std::size_t t = 1; t < length; ++t) {
      acc += d.at(k, t - 1);
      raw.values.at(k, t) = acc;
    }
  }
  return raw;
}

std::size_t DecompositionModel::slot(std::int64_t timestamp) const {
  if (timestamp % kCadenceSeconds != 0)
    throw AlignmentError("timestamp " + std::to_string(timestamp) + " is not on the 30-minute grid");
  const std::int64_t p = static_cast<std::int64_t>(period);
  const std::int64_t s = floor_div(timestamp, kCadenceSeconds) % p;
  return static_cast<std::size_t>(s < 0 ? s + p : s);
}

DecompositionModel fit_seasonal(const SeriesPanel& differenced, std::size_t period) {
  if (period == 0) throw ConfigError("period must be positive");
  const std::size_t train = differenced.split.train_end;
  if (train < 2 * period)
    throw InsufficientDataError("training split spans " + std::to_string(train) + " points, seasonal fit needs 2 periods (" +
                                std::to_string(2 * period) + ")");
  DecompositionModel model;
  model.period = period;
  const std::size_t n = differenced.sensor_count();
  const std::size_t used = train / period * period;
  model.profile = Tensor(ad::Shape{n, period});
  std::vector<double> counts(period, 0.0);
  for (std::size_t t = 0; t < used; ++t) counts[model.slot(differenced.timestamps[t])] += 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t t = 0; t < used; ++t) model.profile.at(k, model.slot(differenced.timestamps[t])) += differenced.at(k, t);
    for (std::size_t s = 0; s < period; ++s) model.profile.at(k, s) /= counts[s];
  }
  return model;
}

SeriesPanel deseasonalize(const SeriesPanel& differenced, const DecompositionModel& model) {
  require_model(differenced, model);
  Tensor v = differenced.values;
  for (std::size_t t = 0; t < differenced.length(); ++t) {
    const std::size_t s = model.slot(differenced.timestamps[t]);
    for (std::size_t k = 0; k < differenced.sensor_count(); ++k) v.at(k, t) -= model.profile.at(k, s);
  }
  return with_values(differenced, std::move(v));
}

SeriesPanel reseasonalize(const SeriesPanel& residual, const DecompositionModel& model) {
  require_model(residual, model);
  Tensor v = residual.values;
  for (std::size_t t = 0; t < residual.length(); ++t) {
    const std::size_t s = model.slot(residual.timestamps[t]);
    for (std::size_t k = 0; k < residual.sensor_count(); ++k) v.at(k, t) += model.profile.at(k, s);
  }
  return with_values(residual, std::move(v));
}

void fit_moments(const SeriesPanel& residual, DecompositionModel& model) {
  const std::size_t n = residual.sensor_count(), train = residual.split.train_end;
  if (train == 0) throw InsufficientDataError("empty training split");
  model.mean.assign(n, 0.0);
  model.scale.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double mean = 0.0;
    for (std::size_t t = 0; t < train; ++t) mean += residual.at(k, t);
    mean /= static_cast<double>(train);
    double var = 0.0;
    for (std::size_t t = 0; t < train; ++t) var += (residual.at(k, t) - mean) * (residual.at(k, t) - mean);
    const double sd = std::sqrt(var / static_cast<double>(train));
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean))))
      throw DegenerateSensorError("sensor '" + residual.sensors[k].id + "' has zero variance on the training split");
    model.mean[k] = mean;
    model.scale[k] = sd;
  }
}

SeriesPanel normalize(const SeriesPanel& residual, const DecompositionModel& model) {
  require_moments(residual, model);
  Tensor v = residual.values;
  for (std::size_t k = 0; k < residual.sensor_count(); ++k)
    for (std::size_t t = 0; t < residual.length(); ++t) v.at(k, t) = (v.at(k, t) - model.mean[k]) / model.scale[k];
  return with_values(residual, std::move(v));
}

SeriesPanel denormalize(const SeriesPanel& normalized, const DecompositionModel& model) {
  require_moments(normalized, model);
  Tensor v = normalized.values;
  for (std::size_t k = 0; k < normalized.sensor_count(); ++k)
    for (std::size_t t = 0; t < normalized.length(); ++t) v.at(k, t) = v.at(k, t) * model.scale[k] + model.mean[k];
  return with_values(normalized, std::move(v));
}

nlohmann::json to_json(const DecompositionModel& model) {
  nlohmann::json profiles = nlohmann::json::array();
  for (std::size_t k = 0; k < model.profile.rows(); ++k) {
    std::vector<double> row(model.profile.values().begin() + k * model.period,
                            model.profile.values().begin() + (k + 1) * model.period);
    profiles.push_back(row);
  }
  return {{"period", model.period}, {"profiles", profiles}, {"mean", model.mean}, {"scale", model.scale}};
}

DecompositionModel decomposition_from_json(const nlohmann::json& j) {
  try {
    DecompositionModel model;
    model.period = j.at("period").get<std::size_t>();
    const auto rows = j.at("profiles").get<std::vector<std::vector<double>>>();
    if (model.period == 0 || rows.empty()) throw FormatError("decomposition model has no profiles");
    std::vector<double> flat;
    for (const auto& r : rows) {
      if (r.size() != model.period) throw FormatError("profile row length differs from period");
      flat.insert(flat.end(), r.begin(), r.end());
    }
    model.profile = Tensor::matrix(rows.size(), model.period, std::move(flat));
    model.mean = j.at("mean").get<std::vector<double>>();
    model.scale = j.at("scale").get<std::vector<double>>();
    if (model.mean.size() != rows.size() || model.scale.size() != rows.size())
      throw FormatError("moment vectors do not match profile count");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("decomposition model: ") + e.what());
  }
}

std::size_t window_count(const SeriesPanel& panel, std::size_t encoder_length, std::size_t decoder_length, Split split) {
  const std::size_t len = panel.split_end(split) - panel.split_begin(split);
  const std::size_t need = encoder_length + decoder_length;
  return len >= need ? len - need + 1 : 0;
}

std::vector<Window> windowize(const SeriesPanel& panel, std::size_t encoder_length, std::size_t decoder_length,
                              std::size_t target_sensor, Split split) {
  if (encoder_length == 0 || decoder_length == 0) throw ConfigError("encoder and decoder lengths must be positive");
  if (target_sensor >= panel.sensor_count()) throw IndexError("target sensor out of range");
  const std::size_t begin = panel.split_begin(split);
  const std::size_t len = panel.split_end(split) - begin;
  if (len < encoder_length + decoder_length)
    throw InsufficientDataError("split has " + std::to_string(len) + " points, windows need " +
                                std::to_string(encoder_length + decoder_length));
  const std::size_t n = panel.sensor_count();
  const std::size_t count = window_count(panel, encoder_length, decoder_length, split);
  std::vector<Window> out;
  out.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t start = begin + w;
    Window win;
    win.x = Tensor(ad::Shape{n, encoder_length});
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t t = 0; t < encoder_length; ++t) win.x.at(k, t) = panel.at(k, start + t);
    win.end = start + encoder_length - 1;
    win.y_last = panel.at(target_sensor, win.end);
    win.anchor_time = panel.timestamps[win.end];
    for (std::size_t j = 1; j <= decoder_length; ++j) win.targets.push_back(panel.at(target_sensor, win.end + j));
    out.push_back(std::move(win));
  }
  return out;
}

std::vector<double> reconstruct(std::span<const double> residual_forecast, const DecompositionModel& model,
                                std::size_t sensor, std::int64_t anchor_time, double anchor_value) {
  if (sensor >= model.mean.size() || sensor >= model.profile.rows()) throw IndexError("sensor out of range");
  std::vector<double> out;
  out.reserve(residual_forecast.size());
  double level = anchor_value;
  for (std::size_t j = 0; j < residual_forecast.size(); ++j) {
    const std::int64_t when = anchor_time + static_cast<std::int64_t>(j + 1) * kCadenceSeconds;
    const double d = residual_forecast[j] * model.scale[sensor] + model.mean[sensor] + model.profile.at(sensor, model.slot(when));
    level += d;
    out.push_back(level);
  }
  return out;
}

double Pretreated::anchor_value(const Window& w, std::size_t sensor) const {
  // Normalized index i is raw index i + 1.
  return raw.at(sensor, w.end + 1);
}

Pretreated pretreat(const SeriesPanel& raw, std::size_t period) {
  raw.validate();
  Pretreated out;
  out.raw = raw;
  DifferencedPanel diff = difference(raw);
  out.initial = diff.initial;
  out.model = fit_seasonal(diff.panel, period);
  const SeriesPanel residual = deseasonalize(diff.panel, out.model);
  fit_moments(residual, out.model);
  out.normalized = normalize(residual, out.model);
  return out;
}

SeriesPanel invert(const SeriesPanel& normalized, const DecompositionModel& model, std::span<const double> initial) {
  DifferencedPanel diff;
  diff.panel = reseasonalize(denormalize(normalized, model), model);
  diff.initial.assign(initial.begin(), initial.end());
  return integrate(diff);
}

}  // namespace hdsrnn::data
