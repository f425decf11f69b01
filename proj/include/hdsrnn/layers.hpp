#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hdsrnn/autodiff.hpp"
#include "hdsrnn/random.hpp"

namespace hdsrnn::nn {

using ad::Tensor;
using ad::Var;

/// Ordered collection of named trainable tensors.
///
/// Layers keep indices into a ParameterSet; a forward pass binds the whole set
/// to a tape once and the layers look their leaves up by index.
class ParameterSet {
 public:
  std::size_t add(std::string name, Tensor init);

  std::size_t size() const noexcept { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  Tensor& value(std::size_t i) { return values_.at(i); }
  const Tensor& value(std::size_t i) const { return values_.at(i); }
  std::vector<Tensor>& values() noexcept { return values_; }
  const std::vector<Tensor>& values() const noexcept { return values_; }
  const std::vector<std::string>& names() const noexcept { return names_; }

  /// Throws ConfigError for unknown names.
  std::size_t index_of(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::size_t scalar_count() const;

  std::vector<Var> bind(ad::Tape& tape) const;

  friend bool operator==(const ParameterSet&, const ParameterSet&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
};

/// Uniform Glorot initialization for a [rows x cols] matrix.
Tensor xavier_uniform(std::size_t rows, std::size_t cols, std::size_t fan_in, std::size_t fan_out, Rng& rng);

/// LSTM cell with fused gate weights, rows ordered input, forget, candidate, output.
struct LstmCell {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t weight = 0;  // [4m x (input_dim + m)] over [x; h_prev]
  std::size_t bias = 0;    // [4m]

  static LstmCell create(ParameterSet& params, const std::string& prefix, std::size_t input_dim,
                         std::size_t hidden_dim, Rng& rng);
};

struct LstmState {
  Var h;
  Var s;
};

/// One LSTM update. `bound` is the ParameterSet bound to the tape.
LstmState lstm_step(const LstmCell& cell, std::span<const Var> bound, Var x, Var h_prev, Var s_prev);

/// Stacked LSTM layers; layer 0 consumes the input, layer k the hidden state of layer k-1.
struct LstmStack {
  std::vector<LstmCell> layers;

  static LstmStack create(ParameterSet& params, const std::string& prefix, std::size_t input_dim,
                          std::size_t hidden_dim, std::size_t layer_count, Rng& rng);
  std::size_t hidden_dim() const { return layers.front().hidden_dim; }

  std::vector<LstmState> zero_state(ad::Tape& tape) const;
  /// Advances every layer in place; returns the top layer's state.
  LstmState step(std::span<const Var> bound, Var x, std::vector<LstmState>& state) const;
};

struct AffineLayer {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  std::size_t weight = 0;  // [out x in]
  std::size_t bias = 0;    // [out]

  static AffineLayer create(ParameterSet& params, const std::string& prefix, std::size_t input_dim,
                            std::size_t output_dim, Rng& rng);
};

/// W x + b
Var affine(const AffineLayer& layer, std::span<const Var> bound, Var x);

struct DropoutSpec {
  double rate = 0.0;
  bool training = false;

  /// Throws ConfigError unless rate is in [0, 1).
  void validate() const;
};

/// Inverted dropout. Identity at inference or when rate is 0 (no RNG draws).
Var dropout(const DropoutSpec& spec, Var x, Rng& rng);

}  // namespace hdsrnn::nn
