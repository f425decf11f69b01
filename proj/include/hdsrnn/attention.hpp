#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hdsrnn/layers.hpp"

namespace hdsrnn::nn {

/// Which input drives the encoder's spatial attention scores.
///   TemporalInput: each sensor's own history X^k (DA-RNN form).
///   SpatialInput:  the cross-sensor snapshot x_t.
///   Hybrid:        both, through separate projections.
///   None:          no spatial attention; raw x_t feeds the encoder.
enum class SpatialVariant { TemporalInput, SpatialInput, Hybrid, None };

std::string to_string(SpatialVariant v);
/// Accepts "temporal_input", "spatial_input", "hybrid", "none". Throws
/// ConfigError listing the valid names otherwise.
SpatialVariant parse_spatial_variant(std::string_view name);

/// Score network e_t^k = V_e tanh(W_e [h; s] + U_e X^k + U'_e x_t + B_e),
/// with the U terms present according to the variant.
struct SpatialAttention {
  SpatialVariant variant = SpatialVariant::Hybrid;
  std::size_t sensors = 0;      // n
  std::size_t window = 0;       // T
  std::size_t hidden_dim = 0;   // m
  std::size_t width = 0;        // l
  std::size_t v = 0;            // V_e [l]
  std::size_t w = 0;            // W_e [l x 2m]
  std::size_t u = 0;            // U_e [l x T] or [l x n] (SpatialInput)
  std::size_t u_prime = kAbsent;  // U'_e [l x n], Hybrid only
  std::size_t b = 0;            // B_e [l]

  static constexpr std::size_t kAbsent = static_cast<std::size_t>(-1);

  /// `width` 0 picks the default: T for TemporalInput, m otherwise.
  static SpatialAttention create(ParameterSet& params, const std::string& prefix, SpatialVariant variant,
                                 std::size_t sensors, std::size_t window, std::size_t hidden_dim,
                                 std::size_t width, Rng& rng);
};

/// Per-window quantities that do not change across encoder steps.
struct SpatialWindow {
  std::vector<Var> snapshots;  // x_t for t = 1..T, each [n]
  Var history_term;            // U_e X^k for every k as [l x n], or zeros for SpatialInput
};

/// Binds window `x` ([n x T]) to the tape and caches the step-invariant history projection.
SpatialWindow prepare_spatial(const SpatialAttention& attn, std::span<const Var> bound, ad::Tape& tape,
                              const Tensor& x);

/// Scores e_t over the n sensors for encoder step t (1-based).
Var spatial_scores(const SpatialAttention& attn, std::span<const Var> bound, const SpatialWindow& window,
                   std::size_t t, Var h_prev, Var s_prev);
/// Convenience overload that prepares the window itself.
Var spatial_scores(const SpatialAttention& attn, std::span<const Var> bound, const Tensor& x, std::size_t t,
                   Var h_prev, Var s_prev);

/// Softmax over sensors.
Var spatial_weights(Var scores);
/// (a^1 x^1, ..., a^n x^n)
Var apply_spatial(Var weights, Var x_t);

/// f_{t',t} = V_d tanh(W_d [h_d; s_d] + U_d z_t + B_d)
struct TemporalAttention {
  std::size_t hidden_dim = 0;
  std::size_t v = 0;  // V_d [m]
  std::size_t w = 0;  // W_d [m x 2m]
  std::size_t u = 0;  // U_d [m x m]
  std::size_t b = 0;  // B_d [m]

  static TemporalAttention create(ParameterSet& params, const std::string& prefix, std::size_t hidden_dim,
                                  Rng& rng);
};

/// U_d Z for all encoder steps; constant across decoder steps.
Var project_encoder_states(const TemporalAttention& attn, std::span<const Var> bound, Var z);

/// Scores over all T encoder steps, from a projection made by project_encoder_states.
Var temporal_scores_projected(const TemporalAttention& attn, std::span<const Var> bound, Var projected,
                              Var h_prev, Var s_prev);
Var temporal_scores(const TemporalAttention& attn, std::span<const Var> bound, Var z, Var h_prev, Var s_prev);

/// sum_t beta_t Z_t for Z [m x T], beta [T].
Var temporal_context(Var beta, Var z);

}  // namespace hdsrnn::nn
