// SPDX-License-Identifier: Apache-2.0
#include "cmda/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cmda/codebook.hpp"
#include "cmda/forward.hpp"
#include "cmda/gradcheck.hpp"
#include "cmda/model.hpp"
#include "cmda/rng.hpp"

namespace cmda::losses {

namespace {

NodeId identity_mask(Graph& g, std::size_t n) {
  Tensor mask({n, n});
  for (std::size_t i = 0; i < n; ++i) mask.at(i, i) = 1.0;
  return g.constant(std::move(mask));
}

/// -(1/n) * sum of diagonal entries of log_softmax_rows(scores).
NodeId mean_diagonal_nll(Graph& g, NodeId scores, std::size_t n) {
  NodeId picked = g.mul(g.log_softmax_rows(scores), identity_mask(g, n));
  return g.scale(g.sum_all(picked), -1.0 / static_cast<double>(n));
}

}  // namespace

NodeId cpc_loss(Graph& g, std::span<const NodeId> contexts_by_t, NodeId futures,
                std::size_t batch, std::size_t timesteps, std::size_t horizon,
                std::span<const NodeId> horizon_weights) {
  if (batch == 0) throw std::invalid_argument("cpc_loss: empty candidate set");
  if (horizon < 1) throw std::invalid_argument("cpc_loss: horizon must be at least 1");
  if (timesteps < horizon + 1)
    throw std::invalid_argument("cpc_loss: need at least horizon+1 timesteps");
  if (contexts_by_t.size() != timesteps)
    throw std::invalid_argument("cpc_loss: context count does not match timesteps");
  if (horizon_weights.size() != horizon)
    throw std::invalid_argument("cpc_loss: horizon weight count does not match horizon");

  const std::size_t anchors = timesteps - horizon;
  NodeId acc = g.constant(Tensor::scalar(0.0));
  for (std::size_t t = 0; t < anchors; ++t) {
    for (std::size_t h = 1; h <= horizon; ++h) {
      std::vector<std::size_t> rows(batch);
      for (std::size_t i = 0; i < batch; ++i) rows[i] = i * timesteps + t + h;
      NodeId candidates = g.index_select(futures, std::move(rows));
      // score[i][j] = (z_j)^T W_h c_i
      NodeId projected = g.matmul(contexts_by_t[t], g.transpose(horizon_weights[h - 1]));
      NodeId scores = g.matmul(projected, g.transpose(candidates));
      acc = g.add(acc, mean_diagonal_nll(g, scores, batch));
    }
  }
  return g.scale(acc, 1.0 / static_cast<double>(anchors * horizon));
}

NodeId soft_usage(Graph& g, NodeId latents, NodeId codebook, std::size_t batch,
                  std::size_t timesteps, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("soft_usage: tau must be positive");
  if (batch == 0 || timesteps == 0) throw std::invalid_argument("soft_usage: empty batch");
  if (g.shape_of(latents)[0] != batch * timesteps)
    throw std::invalid_argument("soft_usage: latent rows do not match B*T");
  NodeId affinity = g.softmax_rows(g.scale(g.pairwise_sqdist(latents, codebook), -1.0 / tau));
  // Averaging matrix: row i sums sample i's frames with weight 1/T.
  Tensor avg({batch, batch * timesteps});
  for (std::size_t i = 0; i < batch; ++i)
    for (std::size_t t = 0; t < timesteps; ++t)
      avg.at(i, i * timesteps + t) = 1.0 / static_cast<double>(timesteps);
  return g.matmul(g.constant(std::move(avg)), affinity);
}

NodeId cmcm_loss(Graph& g, NodeId p_a, NodeId p_b, double floor_eps) {
  if (!(floor_eps > 0.0)) throw std::invalid_argument("cmcm_loss: floor must be positive");
  const auto& sa = g.shape_of(p_a);
  const auto& sb = g.shape_of(p_b);
  if (sa.size() != 2 || sa != sb)
    throw std::invalid_argument("cmcm_loss: distributions must be (N x K) and match");
  const std::size_t n = sa[0];
  if (n == 0) throw std::invalid_argument("cmcm_loss: empty batch");

  NodeId log_a = g.log(g.clamp_min(p_a, floor_eps));
  NodeId log_b = g.log(g.clamp_min(p_b, floor_eps));
  // score[i][j] = <p_a^i, log p_b^j> + <p_b^j, log p_a^i>
  NodeId scores = g.add(g.matmul(p_a, g.transpose(log_b)), g.matmul(log_a, g.transpose(p_b)));
  return mean_diagonal_nll(g, scores, n);
}

NodeId commitment_loss(Graph& g, NodeId latents, std::span<const NodeId> codebooks,
                       std::size_t self_index, std::span<const std::uint32_t> indices,
                       double beta) {
  if (codebooks.empty() || self_index >= codebooks.size())
    throw std::invalid_argument("commitment_loss: bad modality index");
  const auto& zs = g.shape_of(latents);
  if (zs.size() != 2 || zs[0] != indices.size())
    throw std::invalid_argument("commitment_loss: one index per latent frame required");
  for (NodeId book : codebooks) {
    const auto& bs = g.shape_of(book);
    for (std::uint32_t k : indices)
      if (k >= bs[0])
        throw std::invalid_argument("commitment_loss: index " + std::to_string(k) +
                                    " out of range " + std::to_string(bs[0]));
  }

  std::vector<std::size_t> rows(indices.begin(), indices.end());
  NodeId result = 0;
  bool first = true;
  for (std::size_t m = 0; m < codebooks.size(); ++m) {
    NodeId picked = g.stop_gradient(g.index_select(codebooks[m], rows));
    NodeId term = g.squared_norm(g.sub(latents, picked));
    term = g.scale(term, m == self_index ? beta : beta / 2.0);
    result = first ? term : g.add(result, term);
    first = false;
  }
  return result;
}

NodeId reconstruction_loss(Graph& g, NodeId x, NodeId x_recon) {
  return g.squared_norm(g.sub(x, x_recon));
}

NodeId total_loss(Graph& g, const ComponentNodes& components, const AblationFlags& flags) {
  if (components.reconstruction.empty() || components.commitment.empty())
    throw std::invalid_argument("total_loss: reconstruction and commitment terms are required");
  if (flags.cpc && components.cpc.empty())
    throw std::invalid_argument("total_loss: cpc enabled but no cpc components given");
  if (flags.dqa && components.cmcm.empty())
    throw std::invalid_argument("total_loss: dqa enabled but no cmcm components given");

  NodeId total = g.constant(Tensor::scalar(0.0));
  for (NodeId id : components.reconstruction) total = g.add(total, id);
  for (NodeId id : components.commitment) total = g.add(total, id);
  if (flags.cpc)
    for (NodeId id : components.cpc) total = g.add(total, id);
  if (flags.dqa)
    for (NodeId id : components.cmcm) total = g.add(total, id);
  return total;
}

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double scale = 0.6) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = scale * rng.normal();
  return t;
}

double check_instance(const Graph& g, NodeId out, std::span<const Tensor> inputs, double step) {
  return check_gradients(g, out, inputs, step).max_rel_err;
}

double cpc_instance(Rng& rng, double step) {
  const std::size_t B = 2 + rng.uniform_index(3);
  const std::size_t D = 2 + rng.uniform_index(3);
  const std::size_t H = 1 + rng.uniform_index(2);
  const std::size_t T = H + 1 + rng.uniform_index(3);

  Graph g;
  std::vector<Tensor> inputs;
  std::vector<NodeId> contexts;
  for (std::size_t t = 0; t < T; ++t) {
    contexts.push_back(g.input({B, D}));
    inputs.push_back(random_tensor({B, D}, rng));
  }
  NodeId futures = g.input({B * T, D});
  inputs.push_back(random_tensor({B * T, D}, rng));
  std::vector<NodeId> weights;
  for (std::size_t h = 0; h < H; ++h) {
    weights.push_back(g.input({D, D}));
    inputs.push_back(random_tensor({D, D}, rng));
  }
  NodeId out = cpc_loss(g, contexts, futures, B, T, H, weights);
  return check_instance(g, out, inputs, step);
}

double cmcm_instance(Rng& rng, double step) {
  const std::size_t B = 2 + rng.uniform_index(3);
  const std::size_t T = 1 + rng.uniform_index(3);
  const std::size_t D = 2 + rng.uniform_index(2);
  const std::size_t K = 2 + rng.uniform_index(4);

  Graph g;
  NodeId z_a = g.input({B * T, D});
  NodeId z_b = g.input({B * T, D});
  NodeId book_a = g.input({K, D}, /*differentiable=*/false);
  NodeId book_b = g.input({K, D}, /*differentiable=*/false);
  NodeId p_a = soft_usage(g, z_a, book_a, B, T, 1.0);
  NodeId p_b = soft_usage(g, z_b, book_b, B, T, 1.0);
  NodeId out = cmcm_loss(g, p_a, p_b, 1e-8);

  std::vector<Tensor> inputs{random_tensor({B * T, D}, rng), random_tensor({B * T, D}, rng),
                             random_tensor({K, D}, rng), random_tensor({K, D}, rng)};
  return check_instance(g, out, inputs, step);
}

double commitment_instance(Rng& rng, double step) {
  const std::size_t T = 1 + rng.uniform_index(4);
  const std::size_t D = 2 + rng.uniform_index(3);
  const std::size_t K = 2 + rng.uniform_index(4);
  const std::size_t n_mod = 2 + rng.uniform_index(2);

  Graph g;
  NodeId z = g.input({T, D});
  std::vector<NodeId> books;
  std::vector<Tensor> inputs{random_tensor({T, D}, rng)};
  for (std::size_t m = 0; m < n_mod; ++m) books.push_back(g.input({K, D}, /*differentiable=*/false));
  for (std::size_t m = 0; m < n_mod; ++m) inputs.push_back(random_tensor({K, D}, rng));
  std::vector<std::uint32_t> indices(T);
  for (auto& k : indices) k = static_cast<std::uint32_t>(rng.uniform_index(K));
  NodeId out = commitment_loss(g, z, books, rng.uniform_index(n_mod), indices, 0.25);
  return check_instance(g, out, inputs, step);
}

double reconstruction_instance(Rng& rng, double step) {
  const std::size_t T = 1 + rng.uniform_index(5);
  const std::size_t D = 1 + rng.uniform_index(6);
  Graph g;
  NodeId x = g.input({T, D});
  NodeId y = g.input({T, D});
  NodeId out = reconstruction_loss(g, x, y);
  std::vector<Tensor> inputs{random_tensor({T, D}, rng), random_tensor({T, D}, rng)};
  return check_instance(g, out, inputs, step);
}

/// The composite is an exact sum of its components; gradients must route
/// through it unchanged.
double total_instance(Rng& rng, double step) {
  const std::size_t n_mod = 2 + rng.uniform_index(2);
  const std::size_t n_pairs = n_mod == 2 ? 1 : 3;

  Graph g;
  std::vector<Tensor> inputs;
  auto component = [&] {
    const std::size_t d = 1 + rng.uniform_index(4);
    NodeId v = g.input({d});
    inputs.push_back(random_tensor({d}, rng));
    return g.squared_norm(v);
  };
  ComponentNodes comps;
  for (std::size_t m = 0; m < n_mod; ++m) {
    comps.reconstruction.push_back(component());
    comps.commitment.push_back(component());
  }
  for (std::size_t p = 0; p < n_pairs; ++p) {
    comps.cpc.push_back(component());
    comps.cmcm.push_back(component());
  }
  NodeId out = total_loss(g, comps, AblationFlags{});
  return check_instance(g, out, inputs, step);
}

}  // namespace

GradientSuiteResult run_gradient_suite(std::uint64_t seed, int instances_per_op, double step,
                                       double tolerance) {
  GradientSuiteResult result;
  result.pass = true;

  struct OpDef {
    const char* name;
    double (*fn)(Rng&, double);
  };
  const OpDef defs[] = {
      {"cpc_loss", cpc_instance},
      {"cmcm_loss", cmcm_instance},
      {"commitment_loss", commitment_instance},
      {"reconstruction_loss", reconstruction_instance},
      {"total_loss", total_instance},
  };
  for (std::size_t op = 0; op < std::size(defs); ++op) {
    Rng rng(Rng::derive(seed, op));
    GradientSuiteResult::OpResult r;
    r.op = defs[op].name;
    r.instances = instances_per_op;
    for (int i = 0; i < instances_per_op; ++i)
      r.worst_rel_err = std::max(r.worst_rel_err, defs[op].fn(rng, step));
    r.pass = r.worst_rel_err <= tolerance;
    result.pass = result.pass && r.pass;
    result.ops.push_back(std::move(r));
  }
  return result;
}

}  // namespace cmda::losses
