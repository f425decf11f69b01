#include "hdsrnn/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "hdsrnn/errors.hpp"

namespace hdsrnn::ad {

namespace {

double evaluate(const TapeFunction& f, const std::vector<Tensor>& params) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const Tensor& p : params) vars.push_back(tape.variable(p));
  const Var loss = f(tape, vars);
  return loss.value().item();
}

}  // namespace

GradCheckReport grad_check(const TapeFunction& f, std::vector<Tensor>& params,
                           std::span<const std::string> names, const GradCheckOptions& options) {
  const double base = evaluate(f, params);
  if (evaluate(f, params) != base) {
    throw ContractViolation("grad_check: function is not deterministic");
  }

  Tape tape;
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const Tensor& p : params) vars.push_back(tape.variable(p));
  tape.backward(f(tape, vars));

  GradCheckReport report;
  report.tolerance = options.tolerance;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Tensor analytic = tape.gradient(vars[k]);
    GradCheckEntry entry;
    entry.name = k < names.size() ? names[k] : "param" + std::to_string(k);
    for (std::size_t i = 0; i < params[k].size(); ++i) {
      const double original = params[k][i];
      params[k][i] = original + options.step;
      const double plus = evaluate(f, params);
      params[k][i] = original - options.step;
      const double minus = evaluate(f, params);
      params[k][i] = original;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), options.magnitude_floor});
      const double rel = std::abs(analytic[i] - numeric) / denom;
      if (rel >= entry.max_relative_error) {
        entry.max_relative_error = rel;
        entry.worst_index = i;
        entry.analytic = analytic[i];
        entry.numeric = numeric;
      }
    }
    report.max_relative_error = std::max(report.max_relative_error, entry.max_relative_error);
    report.entries.push_back(std::move(entry));
  }
  report.passed = report.max_relative_error < options.tolerance;
  return report;
}

}  // namespace hdsrnn::ad
