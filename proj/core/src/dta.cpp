// SPDX-License-Identifier: Apache-2.0
#include "cmda/dta.hpp"

#include <cmath>
#include <stdexcept>

namespace cmda {

EmaState EmaState::zero_init(std::size_t k, std::size_t d, double rho, double eps,
                             double lambda_self, double lambda_cross) {
  EmaState state;
  state.feature_sums = Tensor({k, d});
  state.counts.assign(k, 0.0);
  state.ages.assign(k, 0);
  state.decay = rho;
  state.epsilon = eps;
  state.lambda_self = lambda_self;
  state.lambda_cross = lambda_cross;
  return state;
}

Accumulators accumulate(std::span<const Tensor> latents, std::size_t self_index,
                        const AssignmentGrid& assignments, std::size_t codebook_size) {
  if (latents.empty() || self_index >= latents.size())
    throw std::invalid_argument("accumulate: bad modality index");
  const Tensor& self = latents[self_index];
  if (self.rank() != 2) throw std::invalid_argument("accumulate: latents must be (B*T x D)");
  const std::size_t rows = self.rows(), D = self.cols();
  if (assignments.batch * assignments.timesteps != rows)
    throw std::invalid_argument("accumulate: assignment grid does not match latent rows");
  for (const Tensor& z : latents)
    if (z.rank() != 2 || z.rows() != rows || z.cols() != D)
      throw std::invalid_argument("accumulate: temporal pairing violated, latent shapes differ");

  Accumulators acc;
  acc.self_sum = Tensor({codebook_size, D});
  acc.cross_sum = Tensor({codebook_size, D});
  acc.counts.assign(codebook_size, 0.0);

  for (std::size_t r = 0; r < rows; ++r) {
    const std::uint32_t k = assignments.indices[r];
    if (k >= codebook_size) throw std::invalid_argument("accumulate: assignment index out of range");
    acc.counts[k] += 1.0;
    for (std::size_t c = 0; c < D; ++c) acc.self_sum[k * D + c] += self[r * D + c];
    for (std::size_t m = 0; m < latents.size(); ++m) {
      if (m == self_index) continue;
      for (std::size_t c = 0; c < D; ++c) acc.cross_sum[k * D + c] += latents[m][r * D + c];
    }
  }
  return acc;
}

void ema_update(EmaState& state, const Accumulators& acc, Codebook& book) {
  if (!(state.decay > 0.0 && state.decay < 1.0))
    throw std::invalid_argument("ema_update: decay must lie in (0, 1)");
  if (!(state.epsilon > 0.0)) throw std::invalid_argument("ema_update: epsilon must be positive");
  const std::size_t K = book.size, D = book.dim;
  if (state.feature_sums.rows() != K || state.feature_sums.cols() != D ||
      acc.self_sum.rows() != K || acc.self_sum.cols() != D || acc.counts.size() != K)
    throw std::invalid_argument("ema_update: state/book dimensions disagree");

  const double rho = state.decay;
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t c = 0; c < D; ++c) {
      const double mixed = state.lambda_self * acc.self_sum[k * D + c] +
                           state.lambda_cross * acc.cross_sum[k * D + c];
      state.feature_sums[k * D + c] = rho * state.feature_sums[k * D + c] + (1.0 - rho) * mixed;
    }
    state.counts[k] = rho * state.counts[k] + (1.0 - rho) * acc.counts[k];
    if (acc.counts[k] > 0.0) {
      const double denom = state.counts[k] + state.epsilon;
      for (std::size_t c = 0; c < D; ++c) book.entries[k * D + c] = state.feature_sums[k * D + c] / denom;
      state.ages[k] = 0;
    } else {
      // Entry stays put: with nothing assigned the S/C ratio is unchanged,
      // so recomputing would only inject epsilon jitter.
      state.ages[k] += 1;
    }
  }
}

ResetOutcome reset_dead_codes(EmaState& state, Codebook& book, std::uint64_t threshold,
                              std::span<const double> usage_counts, double noise_scale, Rng& rng) {
  if (threshold < 1) throw std::invalid_argument("reset_dead_codes: threshold must be at least 1");
  const std::size_t K = book.size, D = book.dim;
  if (usage_counts.size() != K)
    throw std::invalid_argument("reset_dead_codes: usage counts size does not match codebook");

  std::vector<std::size_t> stale;
  for (std::size_t k = 0; k < K; ++k)
    if (state.ages[k] >= threshold) stale.push_back(k);
  if (stale.empty()) return {};

  // Active set is snapshotted before any reset in this call.
  std::vector<std::size_t> active;
  std::vector<double> weights;
  double active_count_sum = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    if (state.ages[k] < threshold && usage_counts[k] > 0.0) {
      active.push_back(k);
      weights.push_back(usage_counts[k]);
      active_count_sum += state.counts[k];
    }
  }
  if (active.empty())
    throw std::invalid_argument("reset_dead_codes: no active code exists (degenerate codebook)");
  const double mean_active_count = active_count_sum / static_cast<double>(active.size());

  ResetOutcome outcome;
  for (std::size_t k : stale) {
    const std::size_t src = active[rng.weighted_index(weights)];
    for (std::size_t c = 0; c < D; ++c)
      book.entries[k * D + c] = book.entries[src * D + c] + noise_scale * rng.normal();
    state.counts[k] = mean_active_count;
    for (std::size_t c = 0; c < D; ++c)
      state.feature_sums[k * D + c] = book.entries[k * D + c] * state.counts[k];
    state.ages[k] = 0;
    outcome.reset_indices.push_back(k);
  }
  return outcome;
}

}  // namespace cmda
