#include "hdsrnn/attention.hpp"

#include "hdsrnn/errors.hpp"

namespace hdsrnn::nn {

namespace {

Tensor transpose(const Tensor& x) {
  const std::size_t r = x.rows(), c = x.cols();
  Tensor t(ad::Shape{c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) t[j * r + i] = x[i * c + j];
  return t;
}

Tensor column(const Tensor& x, std::size_t j) {
  const std::size_t r = x.rows(), c = x.cols();
  Tensor col(ad::Shape{r});
  for (std::size_t i = 0; i < r; ++i) col[i] = x[i * c + j];
  return col;
}

std::size_t add_vector(ParameterSet& params, const std::string& name, std::size_t len, Rng& rng) {
  Tensor row = xavier_uniform(1, len, len, 1, rng);
  return params.add(name, Tensor(ad::Shape{len}, std::move(row.values())));
}

void check_state(const char* op, Var h, Var s, std::size_t m) {
  if (!h.shape().is_vector() || !s.shape().is_vector() || h.size() != m || s.size() != m) {
    throw DimensionError(std::string(op) + ": states " + h.shape().str() + ", " + s.shape().str() +
                         " do not match hidden_dim " + std::to_string(m));
  }
}

}  // namespace

std::string to_string(SpatialVariant v) {
  switch (v) {
    case SpatialVariant::TemporalInput: return "temporal_input";
    case SpatialVariant::SpatialInput: return "spatial_input";
    case SpatialVariant::Hybrid: return "hybrid";
    case SpatialVariant::None: return "none";
  }
  return "unknown";
}

SpatialVariant parse_spatial_variant(std::string_view name) {
  if (name == "temporal_input") return SpatialVariant::TemporalInput;
  if (name == "spatial_input") return SpatialVariant::SpatialInput;
  if (name == "hybrid") return SpatialVariant::Hybrid;
  if (name == "none") return SpatialVariant::None;
  throw ConfigError("unknown spatial variant '" + std::string(name) +
                    "'; valid variants: temporal_input, spatial_input, hybrid, none");
}

SpatialAttention SpatialAttention::create(ParameterSet& params, const std::string& prefix, SpatialVariant variant,
                                          std::size_t sensors, std::size_t window, std::size_t hidden_dim,
                                          std::size_t width, Rng& rng) {
  if (variant == SpatialVariant::None) throw ConfigError("spatial attention requested with variant none");
  if (sensors == 0 || window == 0 || hidden_dim == 0) {
    throw ConfigError("spatial attention dimensions must be positive");
  }
  SpatialAttention a;
  a.variant = variant;
  a.sensors = sensors;
  a.window = window;
  a.hidden_dim = hidden_dim;
  a.width = width != 0 ? width : (variant == SpatialVariant::TemporalInput ? window : hidden_dim);
  const std::size_t l = a.width;
  a.v = add_vector(params, prefix + ".v", l, rng);
  a.w = params.add(prefix + ".w", xavier_uniform(l, 2 * hidden_dim, 2 * hidden_dim, l, rng));
  const std::size_t u_cols = variant == SpatialVariant::SpatialInput ? sensors : window;
  a.u = params.add(prefix + ".u", xavier_uniform(l, u_cols, u_cols, l, rng));
  if (variant == SpatialVariant::Hybrid) {
    a.u_prime = params.add(prefix + ".u_prime", xavier_uniform(l, sensors, sensors, l, rng));
  }
  a.b = params.add(prefix + ".b", Tensor(ad::Shape{l}));
  return a;
}

SpatialWindow prepare_spatial(const SpatialAttention& attn, std::span<const Var> bound, ad::Tape& tape,
                              const Tensor& x) {
  if (!x.shape().is_matrix() || x.rows() != attn.sensors || x.cols() != attn.window) {
    throw DimensionError("spatial attention: window " + x.shape().str() + " does not match [" +
                         std::to_string(attn.sensors) + "x" + std::to_string(attn.window) + "]");
  }
  SpatialWindow w;
  w.snapshots.reserve(attn.window);
  for (std::size_t t = 0; t < attn.window; ++t) w.snapshots.push_back(tape.constant(column(x, t)));
  if (attn.variant == SpatialVariant::SpatialInput) {
    w.history_term = tape.constant(Tensor(ad::Shape{attn.width, attn.sensors}));
  } else {
    // Column k of X^T is X^k, so U_e X^T holds U_e X^k for every sensor.
    w.history_term = ad::matmul(bound[attn.u], tape.constant(transpose(x)));
  }
  return w;
}

Var spatial_scores(const SpatialAttention& attn, std::span<const Var> bound, const SpatialWindow& window,
                   std::size_t t, Var h_prev, Var s_prev) {
  if (t < 1 || t > attn.window) {
    throw IndexError("spatial_scores: step " + std::to_string(t) + " outside 1.." + std::to_string(attn.window));
  }
  check_state("spatial_scores", h_prev, s_prev, attn.hidden_dim);
  Var pre = ad::matvec(bound[attn.w], ad::concat(h_prev, s_prev));
  const Var x_t = window.snapshots[t - 1];
  if (attn.variant == SpatialVariant::SpatialInput) {
    pre = pre + ad::matvec(bound[attn.u], x_t);
  } else if (attn.variant == SpatialVariant::Hybrid) {
    pre = pre + ad::matvec(bound[attn.u_prime], x_t);
  }
  pre = pre + bound[attn.b];
  return ad::vecmat(bound[attn.v], ad::tanh(ad::add_to_columns(window.history_term, pre)));
}

Var spatial_scores(const SpatialAttention& attn, std::span<const Var> bound, const Tensor& x, std::size_t t,
                   Var h_prev, Var s_prev) {
  const SpatialWindow window = prepare_spatial(attn, bound, *h_prev.tape(), x);
  return spatial_scores(attn, bound, window, t, h_prev, s_prev);
}

Var spatial_weights(Var scores) { return ad::softmax(scores); }

Var apply_spatial(Var weights, Var x_t) {
  if (!(weights.shape() == x_t.shape())) {
    throw DimensionError("apply_spatial: weights " + weights.shape().str() + " vs input " + x_t.shape().str());
  }
  return ad::mul(weights, x_t);
}

TemporalAttention TemporalAttention::create(ParameterSet& params, const std::string& prefix,
                                            std::size_t hidden_dim, Rng& rng) {
  if (hidden_dim == 0) throw ConfigError("temporal attention hidden_dim must be positive");
  const std::size_t m = hidden_dim;
  TemporalAttention a;
  a.hidden_dim = m;
  a.v = add_vector(params, prefix + ".v", m, rng);
  a.w = params.add(prefix + ".w", xavier_uniform(m, 2 * m, 2 * m, m, rng));
  a.u = params.add(prefix + ".u", xavier_uniform(m, m, m, m, rng));
  a.b = params.add(prefix + ".b", Tensor(ad::Shape{m}));
  return a;
}

Var project_encoder_states(const TemporalAttention& attn, std::span<const Var> bound, Var z) {
  if (!z.shape().is_matrix() || z.value().rows() != attn.hidden_dim) {
    throw DimensionError("temporal attention: encoder states " + z.shape().str() + " need " +
                         std::to_string(attn.hidden_dim) + " rows");
  }
  return ad::matmul(bound[attn.u], z);
}

Var temporal_scores_projected(const TemporalAttention& attn, std::span<const Var> bound, Var projected,
                              Var h_prev, Var s_prev) {
  check_state("temporal_scores", h_prev, s_prev, attn.hidden_dim);
  const Var pre = ad::matvec(bound[attn.w], ad::concat(h_prev, s_prev)) + bound[attn.b];
  return ad::vecmat(bound[attn.v], ad::tanh(ad::add_to_columns(projected, pre)));
}

Var temporal_scores(const TemporalAttention& attn, std::span<const Var> bound, Var z, Var h_prev, Var s_prev) {
  return temporal_scores_projected(attn, bound, project_encoder_states(attn, bound, z), h_prev, s_prev);
}

Var temporal_context(Var beta, Var z) {
  if (!z.shape().is_matrix() || !beta.shape().is_vector() || z.value().cols() != beta.size()) {
    throw DimensionError("temporal_context: weights " + beta.shape().str() + " vs states " + z.shape().str());
  }
  return ad::matvec(z, beta);
}

}  // namespace hdsrnn::nn
