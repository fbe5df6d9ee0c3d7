// SPDX-License-Identifier: Apache-2.0
#include "cmda/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace cmda {

Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x,
                                  double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite_difference_gradient: step must be positive");
  Tensor grad(x.shape());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    probe[i] = x[i] + step;
    const double fp = f(probe);
    probe[i] = x[i] - step;
    const double fm = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw std::invalid_argument("finite_difference_gradient: non-finite value at coordinate " +
                                  std::to_string(i));
    grad[i] = (fp - fm) / (2.0 * step);
  }
  return grad;
}

double gradient_relative_error(const Tensor& analytic, const Tensor& numeric) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.numel(); ++i) {
    const double a = analytic[i];
    const double n = numeric[i];
    const double denom = std::max({1e-6, std::abs(a), std::abs(n)});
    worst = std::max(worst, std::abs(a - n) / denom);
  }
  return worst;
}

GradientReport check_gradients(const Graph& graph, NodeId output, std::span<const Tensor> inputs,
                               double step, double tolerance,
                               std::span<const std::string> input_names) {
  auto analytic = graph.evaluate_with_gradients(output, inputs);

  GradientReport report;
  report.tolerance = tolerance;
  std::vector<Tensor> scratch(inputs.begin(), inputs.end());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    // stop-gradient-protected inputs are declared non-differentiable; the
    // finite-difference oracle only applies where reverse mode claims a
    // derivative.
    if (!graph.input_differentiable(i)) continue;
    auto f = [&](const Tensor& probe) {
      scratch[i] = probe;
      const double v = graph.eval(output, scratch).scalar_value();
      scratch[i] = inputs[i];
      return v;
    };
    const Tensor numeric = finite_difference_gradient(f, inputs[i], step);
    GradientReport::Entry entry;
    entry.name = i < input_names.size() ? input_names[i] : "input" + std::to_string(i);
    entry.max_rel_err = gradient_relative_error(analytic.input_gradients[i], numeric);
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.per_input.push_back(std::move(entry));
  }
  report.pass = report.max_rel_err <= tolerance;
  return report;
}

}  // namespace cmda
