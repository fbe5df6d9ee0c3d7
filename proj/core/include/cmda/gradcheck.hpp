// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cmda/graph.hpp"
#include "cmda/tensor.hpp"

namespace cmda {

/// Central differences (f(x+h e_i) - f(x-h e_i)) / 2h per coordinate.
/// Rejects non-finite probe values, reporting the coordinate.
Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x,
                                  double step);

/// Agreement report between analytic and finite-difference gradients.
struct GradientReport {
  struct Entry {
    std::string name;
    double max_rel_err = 0.0;
  };
  std::vector<Entry> per_input;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// Checks every differentiable input of a recorded scalar computation
/// against the finite-difference oracle.
GradientReport check_gradients(const Graph& graph, NodeId output, std::span<const Tensor> inputs,
                               double step = 1e-5, double tolerance = 1e-4,
                               std::span<const std::string> input_names = {});

double gradient_relative_error(const Tensor& analytic, const Tensor& numeric);

}  // namespace cmda
