// SPDX-License-Identifier: Apache-2.0
#include "cmda/forward.hpp"

#include <stdexcept>

namespace cmda {

ForwardBuild build_forward(ModelParams& params, std::span<const Codebook> books,
                           std::span<const Tensor> raw, std::size_t batch,
                           std::size_t timesteps, const AblationFlags& flags, double tau,
                           double beta, double floor_eps) {
  const std::size_t n_mod = modality_count(params.mode);
  if (books.size() != n_mod || raw.size() != n_mod)
    throw std::invalid_argument("build_forward: modality count mismatch");
  const std::size_t rows = batch * timesteps;
  for (std::size_t m = 0; m < n_mod; ++m) {
    if (raw[m].rank() != 2 || raw[m].rows() != rows || raw[m].cols() != params.dims.raw[m])
      throw std::invalid_argument("build_forward: raw batch shape mismatch for slot " +
                                  std::to_string(m));
    if (books[m].dim != params.dims.embed)
      throw std::invalid_argument("build_forward: codebook dim does not match embed dim");
  }

  ForwardBuild fb;
  Graph& g = fb.graph;

  // Parameter inputs, in trainable_params order.
  const auto refs = trainable_params(params);
  std::vector<NodeId> param_nodes;
  param_nodes.reserve(refs.size());
  for (const auto& ref : refs) {
    param_nodes.push_back(g.input(ref.tensor->shape()));
    fb.inputs.push_back(*ref.tensor);
  }
  // 12 fixed tensors plus the horizon stack per slot; keep in sync with
  // trainable_params.
  const std::size_t per_slot = 12 + params.horizon;
  if (refs.size() != per_slot * n_mod)
    throw std::logic_error("build_forward: parameter layout changed; update the indexer");
  auto slot_base = [&](std::size_t m) { return m * per_slot; };

  std::vector<NodeId> book_nodes(n_mod);
  for (std::size_t m = 0; m < n_mod; ++m) {
    book_nodes[m] = g.input(books[m].entries.shape(), /*differentiable=*/false);
    fb.inputs.push_back(books[m].entries);
  }

  std::vector<NodeId> x_nodes(n_mod);
  for (std::size_t m = 0; m < n_mod; ++m) x_nodes[m] = g.constant(raw[m]);

  // Encoders.
  std::vector<NodeId> latent_nodes(n_mod);
  for (std::size_t m = 0; m < n_mod; ++m) {
    const std::size_t base = slot_base(m);
    model::EncoderNodes enc{param_nodes[base + 0], param_nodes[base + 1], param_nodes[base + 2],
                            param_nodes[base + 3]};
    latent_nodes[m] = model::build_encoder(g, x_nodes[m], enc);
  }

  // Hard assignments come from a replay of what is built so far; the full
  // graph recomputes the same latents bit-identically.
  fb.latents = g.eval_many(latent_nodes, fb.inputs);
  fb.assignments.resize(n_mod);
  for (std::size_t m = 0; m < n_mod; ++m) {
    auto& grid = fb.assignments[m];
    grid.batch = batch;
    grid.timesteps = timesteps;
    grid.indices.resize(rows);
    const std::size_t D = params.dims.embed;
    for (std::size_t r = 0; r < rows; ++r)
      grid.indices[r] = static_cast<std::uint32_t>(
          assign_hard(fb.latents[m].data().subspan(r * D, D), books[m]));
  }

  // Straight-through quantized latents: value is the codeword, gradient
  // passes to the encoder output.
  std::vector<NodeId> quantized(n_mod);
  for (std::size_t m = 0; m < n_mod; ++m) {
    std::vector<std::size_t> idx(fb.assignments[m].indices.begin(), fb.assignments[m].indices.end());
    NodeId picked = g.index_select(book_nodes[m], std::move(idx));
    quantized[m] = g.add(latent_nodes[m], g.stop_gradient(g.sub(picked, latent_nodes[m])));
  }
  NodeId joint_code = quantized[0];
  for (std::size_t m = 1; m < n_mod; ++m) joint_code = g.concat_cols(joint_code, quantized[m]);

  const double inv_batch = 1.0 / static_cast<double>(batch);

  // Reconstruction through every modality's decoder from the shared code.
  for (std::size_t m = 0; m < n_mod; ++m) {
    const std::size_t base = slot_base(m);
    model::ProjectionNodes proj{param_nodes[base + 4]};
    model::DecoderNodes dec{param_nodes[base + 5], param_nodes[base + 6], param_nodes[base + 7],
                            param_nodes[base + 8]};
    NodeId projected = model::build_projection(g, x_nodes[m], proj);
    NodeId recon = model::build_decoder(g, joint_code, projected, dec);
    NodeId rec = g.scale(losses::reconstruction_loss(g, x_nodes[m], recon), inv_batch);
    fb.components.reconstruction.push_back(rec);
  }

  // Commitment to own and same-index foreign codewords.
  for (std::size_t m = 0; m < n_mod; ++m) {
    NodeId commit = losses::commitment_loss(g, latent_nodes[m], book_nodes, m,
                                            fb.assignments[m].indices, beta);
    fb.components.commitment.push_back(g.scale(commit, inv_batch));
  }

  // CPC over ordered pairs, averaged per unordered pair.
  if (flags.cpc) {
    if (timesteps < params.horizon + 1)
      throw std::invalid_argument("build_forward: cpc requires timesteps > horizon");
    std::vector<std::vector<NodeId>> contexts(n_mod);
    for (std::size_t m = 0; m < n_mod; ++m) {
      const std::size_t base = slot_base(m);
      model::ContextNodes ctx{param_nodes[base + 9], param_nodes[base + 10], param_nodes[base + 11], {}};
      for (std::size_t h = 0; h < params.horizon; ++h)
        ctx.horizon.push_back(param_nodes[base + 12 + h]);
      contexts[m] = model::build_context_steps(g, latent_nodes[m], batch, timesteps, ctx);
    }
    auto directed = [&](std::size_t from, std::size_t to) {
      const std::size_t base = slot_base(from);
      std::vector<NodeId> weights;
      for (std::size_t h = 0; h < params.horizon; ++h) weights.push_back(param_nodes[base + 12 + h]);
      return losses::cpc_loss(g, contexts[from], latent_nodes[to], batch, timesteps,
                              params.horizon, weights);
    };
    for (const auto& pair : modality_pairs(params.mode)) {
      const std::size_t a = static_cast<std::size_t>(pair[0]);
      const std::size_t b = static_cast<std::size_t>(pair[1]);
      NodeId sym = g.scale(g.add(directed(a, b), directed(b, a)), 0.5);
      fb.components.cpc.push_back(sym);
    }
  }

  // Usage-distribution matching per pair.
  if (flags.dqa) {
    std::vector<NodeId> usage(n_mod);
    for (std::size_t m = 0; m < n_mod; ++m)
      usage[m] = losses::soft_usage(g, latent_nodes[m], book_nodes[m], batch, timesteps, tau);
    for (const auto& pair : modality_pairs(params.mode)) {
      const std::size_t a = static_cast<std::size_t>(pair[0]);
      const std::size_t b = static_cast<std::size_t>(pair[1]);
      fb.components.cmcm.push_back(losses::cmcm_loss(g, usage[a], usage[b], floor_eps));
    }
  }

  fb.total = losses::total_loss(g, fb.components, flags);
  return fb;
}

}  // namespace cmda
