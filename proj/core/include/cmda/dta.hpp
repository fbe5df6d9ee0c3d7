// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cmda/codebook.hpp"
#include "cmda/rng.hpp"
#include "cmda/tensor.hpp"

namespace cmda {

/// Running EMA statistics for one modality's codebook.
struct EmaState {
  Tensor feature_sums;               // K x D, S(k)
  std::vector<double> counts;        // K, C(k)
  std::vector<std::uint64_t> ages;   // K, consecutive batches unselected
  double decay = 0.99;               // rho
  double epsilon = 1e-5;
  double lambda_self = 0.6;
  double lambda_cross = 0.2;

  static EmaState zero_init(std::size_t k, std::size_t d, double rho, double eps,
                            double lambda_self, double lambda_cross);
};

/// Per-batch sums of assigned features, keyed by codeword.
struct Accumulators {
  Tensor self_sum;             // K x D, own-modality frames
  Tensor cross_sum;            // K x D, time-synchronized frames of the others
  std::vector<double> counts;  // K, batch assignment totals
};

/// Sums modality `self_index`'s frames per assigned codeword, together with
/// the paired frames of the other modalities at the exact same (sample,
/// timestep) cell. All latents are (B*T x D), sample-major.
Accumulators accumulate(std::span<const Tensor> latents, std::size_t self_index,
                        const AssignmentGrid& assignments, std::size_t codebook_size);

/// One EMA step: mixes self and cross sums convexly, decays running
/// statistics, and recomputes entries for codewords selected this batch.
/// Unselected codewords keep their entry and gain one unit of age.
void ema_update(EmaState& state, const Accumulators& acc, Codebook& book);

struct ResetOutcome {
  std::vector<std::size_t> reset_indices;
};

/// Reinitializes every codeword with age >= threshold from an active
/// codeword (sampled proportionally to usage counts) plus Gaussian noise.
ResetOutcome reset_dead_codes(EmaState& state, Codebook& book, std::uint64_t threshold,
                              std::span<const double> usage_counts, double noise_scale, Rng& rng);

}  // namespace cmda
