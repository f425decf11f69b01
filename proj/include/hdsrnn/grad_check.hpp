#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hdsrnn/autodiff.hpp"

namespace hdsrnn::ad {

/// Builds a scalar loss on `tape` from leaf variables bound to the checked parameters.
using TapeFunction = std::function<Var(Tape& tape, std::span<const Var> params)>;

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Denominator floor for the relative error, so that vanishing gradients
  /// are compared in absolute terms.
  double magnitude_floor = 1e-6;
};

struct GradCheckEntry {
  std::string name;
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_relative_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

/// Compares reverse-mode gradients of `f` against central differences.
///
/// `params` is perturbed in place and restored. `names` may be empty.
/// Throws ContractViolation when two evaluations at the same point differ.
GradCheckReport grad_check(const TapeFunction& f, std::vector<Tensor>& params,
                           std::span<const std::string> names = {},
                           const GradCheckOptions& options = {});

}  // namespace hdsrnn::ad
