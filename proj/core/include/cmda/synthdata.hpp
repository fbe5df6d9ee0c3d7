// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cmda/modality.hpp"
#include "cmda/tensor.hpp"

namespace cmda {

/// Paired-sequence generator settings. The shared latent state per sample is
/// a sticky class chain plus a continuous instance vector; each modality
/// renders both through frozen random matrices, then adds a private
/// random-walk nuisance block and Gaussian noise. The instance vector is the
/// within-class detail all modalities agree on.
struct GeneratorConfig {
  std::size_t samples = 2048;
  std::size_t timesteps = 10;
  std::size_t classes = 8;
  std::vector<std::size_t> signal_dims = {24, 40, 16};  // per modality slot
  std::vector<std::size_t> nuisance_dims = {4, 4, 4};
  std::vector<double> noise = {0.2, 0.2, 0.2};
  double persistence = 0.9;
  double nuisance_step = 0.25;
  double class_scale = 0.5;        // sd of class-embedding entries
  std::size_t instance_dims = 0;   // optional shared latent, constant per sample
  double instance_scale = 1.0;     // relative to class_scale
  Mode mode = Mode::kTrimodal;
  std::uint64_t seed = 1;

  std::size_t raw_dim(std::size_t slot) const { return signal_dims[slot] + nuisance_dims[slot]; }
  void validate() const;  // names the offending field
};

struct SyntheticDataset {
  GeneratorConfig config;
  std::vector<Tensor> raw;                    // per slot, (N*T x raw_dim), sample-major
  std::vector<std::uint32_t> frame_labels;    // N*T, shared across modalities
  std::vector<std::uint32_t> global_labels;   // N, modal class per sample
  // Generator internals kept for calibration checks; not serialized.
  std::vector<Tensor> class_embeddings;       // per slot, (C x signal_dim)
  std::vector<Tensor> instance_renderers;     // per slot, (instance_dims x signal_dim)
  Tensor instances;                           // (N x instance_dims)

  std::size_t samples() const { return config.samples; }
  std::size_t timesteps() const { return config.timesteps; }
  std::uint32_t frame_label(std::size_t i, std::size_t t) const {
    return frame_labels[i * config.timesteps + t];
  }
};

SyntheticDataset generate(const GeneratorConfig& config);

struct SplitIndices {
  std::vector<std::size_t> train, validation, test;
};

/// Disjoint, exhaustive, seed-deterministic partition. Sizes are
/// floor(fraction * N); the remainder is handed out one index at a time in
/// train, validation, test order.
SplitIndices split(std::size_t n, double train_frac, double validation_frac, double test_frac,
                   std::uint64_t seed);

void save_dataset(const SyntheticDataset& data, const std::string& path);
SyntheticDataset load_dataset(const std::string& path);
void export_dataset_csv(const SyntheticDataset& data, const std::string& path);

}  // namespace cmda
