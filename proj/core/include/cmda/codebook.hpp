// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cmda/modality.hpp"
#include "cmda/rng.hpp"
#include "cmda/tensor.hpp"

namespace cmda {

/// Per-modality set of K codewords of dimension D. Entry count is fixed for
/// the lifetime of a run; entries move only through EMA, cascade, and reset.
struct Codebook {
  ModalityId modality = ModalityId::kAudio;
  std::size_t size = 0;   // K
  std::size_t dim = 0;    // D
  Tensor entries;         // K x D

  static Codebook random_init(ModalityId m, std::size_t k, std::size_t d, Rng& rng);

  std::span<const double> entry(std::size_t k) const {
    return entries.data().subspan(k * dim, dim);
  }
};

/// Hard nearest-neighbour assignments over a batch, sample-major.
struct AssignmentGrid {
  std::size_t batch = 0;
  std::size_t timesteps = 0;
  std::vector<std::uint32_t> indices;  // batch * timesteps

  std::uint32_t at(std::size_t i, std::size_t t) const { return indices[i * timesteps + t]; }
};

/// Index of the codeword minimizing squared Euclidean distance.
/// Ties break to the lowest index.
std::size_t assign_hard(std::span<const double> frame, const Codebook& book);

struct QuantizeResult {
  Tensor quantized;                   // same shape as input
  std::vector<std::uint32_t> indices; // one per frame
};

/// Frame-wise quantization of a (T x D) sequence.
QuantizeResult quantize_sequence(const Tensor& z, const Codebook& book);

/// Time-averaged soft assignment over indices: softmax(-d^2 / tau) per
/// frame, averaged over the sequence. Result lies on the simplex.
Tensor usage_distribution(const Tensor& z, const Codebook& book, double tau);

struct AgreementReport {
  /// One entry per unordered grid pair, in (0,1), (0,2), (1,2) order.
  std::vector<double> pairwise;
  /// Fraction of cells on which every grid agrees.
  double overall = 0.0;
};

AgreementReport agreement_rate(std::span<const AssignmentGrid> grids);

/// One row per codeword.
void export_codebook_csv(const Codebook& book, const std::string& path);

}  // namespace cmda
