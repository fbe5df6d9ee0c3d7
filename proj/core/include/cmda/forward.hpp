// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "cmda/codebook.hpp"
#include "cmda/graph.hpp"
#include "cmda/losses.hpp"
#include "cmda/model.hpp"

namespace cmda {

/// One pretraining batch recorded as a computation: encoders, straight-through
/// quantization at fixed hard assignments, and every enabled objective.
///
/// Inputs are declared in trainable-parameter order followed by the per-slot
/// codebooks (non-differentiable); raw features enter as constants. Gradients
/// from evaluate_with_gradients therefore align with trainable_params().
struct ForwardBuild {
  Graph graph;
  std::vector<Tensor> inputs;
  NodeId total = 0;
  losses::ComponentNodes components;
  std::vector<AssignmentGrid> assignments;  // per slot, from the forward replay
  std::vector<Tensor> latents;              // per slot, (B*T x D) encoder outputs
};

ForwardBuild build_forward(ModelParams& params, std::span<const Codebook> books,
                           std::span<const Tensor> raw, std::size_t batch,
                           std::size_t timesteps, const AblationFlags& flags, double tau,
                           double beta, double floor_eps);

}  // namespace cmda
