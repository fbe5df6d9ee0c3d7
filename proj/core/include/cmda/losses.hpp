// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cmda/graph.hpp"
#include "cmda/modality.hpp"

namespace cmda {

struct AblationFlags {
  bool cpc = true;
  bool dta = true;
  bool csa = true;
  bool dqa = true;
};

namespace losses {

/// InfoNCE over in-batch candidates: for each anchor timestep t and horizon
/// step h, the context of one modality scores every batch sample's frame of
/// the other modality at t+h; the true pair is the positive. Mean over
/// anchors and horizon steps.
///
/// contexts_by_t holds one (B x D) node per timestep; futures is the target
/// modality's sample-major (B*T x D) latent node.
NodeId cpc_loss(Graph& g, std::span<const NodeId> contexts_by_t, NodeId futures,
                std::size_t batch, std::size_t timesteps, std::size_t horizon,
                std::span<const NodeId> horizon_weights);

/// Time-averaged soft codeword assignment per sample: softmax(-d^2/tau) per
/// frame, averaged over the sequence. Returns a (B x K) node.
NodeId soft_usage(Graph& g, NodeId latents, NodeId codebook, std::size_t batch,
                  std::size_t timesteps, double tau);

/// Contrastive matching of paired usage distributions: matched-pair scores
/// <p_a^i, log p_b^i> + <p_b^i, log p_a^i> against all in-batch pairings.
/// Distributions are floored at floor_eps before logs.
NodeId cmcm_loss(Graph& g, NodeId p_a, NodeId p_b, double floor_eps);

/// Pulls latent frames toward their selected codeword (weight beta) and the
/// same-index codewords of the other modalities (weight beta/2 each), all
/// behind stop-gradient. indices index every codebook identically.
NodeId commitment_loss(Graph& g, NodeId latents, std::span<const NodeId> codebooks,
                       std::size_t self_index, std::span<const std::uint32_t> indices,
                       double beta);

/// Sum of squared differences.
NodeId reconstruction_loss(Graph& g, NodeId x, NodeId x_recon);

/// Component nodes entering the composite objective. Reconstruction and
/// commitment are per modality slot; CPC and CMCM per canonical pair.
struct ComponentNodes {
  std::vector<NodeId> reconstruction;
  std::vector<NodeId> commitment;
  std::vector<NodeId> cpc;
  std::vector<NodeId> cmcm;
};

/// Exact sum of the enabled components. Rejects an enabled flag whose
/// component list is empty.
NodeId total_loss(Graph& g, const ComponentNodes& components, const AblationFlags& flags);

/// Per-component values of one batch, as logged per step.
struct LossBundle {
  std::vector<double> reconstruction;  // per slot
  std::vector<double> commitment;      // per slot
  std::vector<double> cpc;             // per pair
  std::vector<double> cmcm;            // per pair
  double total = 0.0;
};

struct GradientSuiteResult {
  struct OpResult {
    std::string op;
    int instances = 0;
    double worst_rel_err = 0.0;
    bool pass = false;
  };
  std::vector<OpResult> ops;
  bool pass = false;
};

/// Finite-difference verification of every loss operation on random small
/// instances (dimensions <= 8).
GradientSuiteResult run_gradient_suite(std::uint64_t seed, int instances_per_op = 100,
                                       double step = 1e-5, double tolerance = 1e-4);

}  // namespace losses
}  // namespace cmda
