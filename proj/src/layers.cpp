#include "hdsrnn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "hdsrnn/errors.hpp"

namespace hdsrnn::nn {

std::size_t ParameterSet::add(std::string name, Tensor init) {
  if (contains(name)) throw ConfigError("duplicate parameter name: " + name);
  names_.push_back(std::move(name));
  values_.push_back(std::move(init));
  return values_.size() - 1;
}

std::size_t ParameterSet::index_of(const std::string& name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw ConfigError("unknown parameter: " + name);
  return static_cast<std::size_t>(it - names_.begin());
}

bool ParameterSet::contains(const std::string& name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const Tensor& t : values_) n += t.size();
  return n;
}

std::vector<Var> ParameterSet::bind(ad::Tape& tape) const {
  std::vector<Var> vars;
  vars.reserve(values_.size());
  for (const Tensor& t : values_) vars.push_back(tape.variable(t));
  return vars;
}

Tensor xavier_uniform(std::size_t rows, std::size_t cols, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor t(ad::Shape{rows, cols});
  for (double& v : t.values()) v = dist(rng);
  return t;
}

LstmCell LstmCell::create(ParameterSet& params, const std::string& prefix, std::size_t input_dim,
                          std::size_t hidden_dim, Rng& rng) {
  if (input_dim == 0 || hidden_dim == 0) throw ConfigError("LSTM dimensions must be positive");
  LstmCell cell;
  cell.input_dim = input_dim;
  cell.hidden_dim = hidden_dim;
  const std::size_t m = hidden_dim;
  cell.weight = params.add(prefix + ".weight",
                           xavier_uniform(4 * m, input_dim + m, input_dim + m, m, rng));
  Tensor bias(ad::Shape{4 * m});
  for (std::size_t i = m; i < 2 * m; ++i) bias[i] = 1.0;  // forget gate
  cell.bias = params.add(prefix + ".bias", std::move(bias));
  return cell;
}

LstmState lstm_step(const LstmCell& cell, std::span<const Var> bound, Var x, Var h_prev, Var s_prev) {
  const std::size_t m = cell.hidden_dim;
  if (x.size() != cell.input_dim || !x.shape().is_vector()) {
    throw DimensionError("lstm_step: input " + x.shape().str() + " does not match input_dim " +
                         std::to_string(cell.input_dim));
  }
  if (h_prev.size() != m || s_prev.size() != m) {
    throw DimensionError("lstm_step: state shapes " + h_prev.shape().str() + ", " +
                         s_prev.shape().str() + " do not match hidden_dim " + std::to_string(m));
  }
  const Var gates = ad::add(ad::matvec(bound[cell.weight], ad::concat(x, h_prev)), bound[cell.bias]);
  const Var in_gate = ad::sigmoid(ad::slice(gates, 0, m));
  const Var forget_gate = ad::sigmoid(ad::slice(gates, m, m));
  const Var candidate = ad::tanh(ad::slice(gates, 2 * m, m));
  const Var out_gate = ad::sigmoid(ad::slice(gates, 3 * m, m));
  const Var s = forget_gate * s_prev + in_gate * candidate;
  const Var h = out_gate * ad::tanh(s);
  return {h, s};
}

LstmStack LstmStack::create(ParameterSet& params, const std::string& prefix, std::size_t input_dim,
                            std::size_t hidden_dim, std::size_t layer_count, Rng& rng) {
  if (layer_count == 0) throw ConfigError("layer_count must be at least 1");
  LstmStack stack;
  for (std::size_t k = 0; k < layer_count; ++k) {
    stack.layers.push_back(LstmCell::create(params, prefix + ".layer" + std::to_string(k),
                                            k == 0 ? input_dim : hidden_dim, hidden_dim, rng));
  }
  return stack;
}

std::vector<LstmState> LstmStack::zero_state(ad::Tape& tape) const {
  std::vector<LstmState> state;
  state.reserve(layers.size());
  for (const LstmCell& cell : layers) {
    const Tensor zeros(ad::Shape{cell.hidden_dim});
    state.push_back({tape.constant(zeros), tape.constant(zeros)});
  }
  return state;
}

LstmState LstmStack::step(std::span<const Var> bound, Var x, std::vector<LstmState>& state) const {
  Var input = x;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    state[k] = lstm_step(layers[k], bound, input, state[k].h, state[k].s);
    input = state[k].h;
  }
  return state.back();
}

AffineLayer AffineLayer::create(ParameterSet& params, const std::string& prefix, std::size_t input_dim,
                                std::size_t output_dim, Rng& rng) {
  if (input_dim == 0 || output_dim == 0) throw ConfigError("affine dimensions must be positive");
  AffineLayer layer;
  layer.input_dim = input_dim;
  layer.output_dim = output_dim;
  layer.weight = params.add(prefix + ".weight",
                            xavier_uniform(output_dim, input_dim, input_dim, output_dim, rng));
  layer.bias = params.add(prefix + ".bias", Tensor(ad::Shape{output_dim}));
  return layer;
}

Var affine(const AffineLayer& layer, std::span<const Var> bound, Var x) {
  if (!x.shape().is_vector() || x.size() != layer.input_dim) {
    throw DimensionError("affine: input " + x.shape().str() + " does not match input_dim " +
                         std::to_string(layer.input_dim));
  }
  return ad::add(ad::matvec(bound[layer.weight], x), bound[layer.bias]);
}

void DropoutSpec::validate() const {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
}

Var dropout(const DropoutSpec& spec, Var x, Rng& rng) {
  spec.validate();
  if (!spec.training || spec.rate == 0.0) return x;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - spec.rate);
  Tensor mask(x.shape());
  for (double& v : mask.values()) v = unit(rng) < spec.rate ? 0.0 : keep_scale;
  return ad::mul(x, x.tape()->constant(std::move(mask)));
}

}  // namespace hdsrnn::nn
