// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <span>
#include <vector>

#include "cmda/checkpoint.hpp"
#include "cmda/forward.hpp"
#include "cmda/optimizer.hpp"
#include "cmda/synthdata.hpp"

namespace cmda {

struct StepStats {
  std::uint64_t step = 0;
  losses::LossBundle bundle;
  std::vector<double> agreement_pairwise;
  double agreement_overall = 0.0;
  std::vector<double> usage_entropy;  // per slot, over the batch
};

/// Pretraining loop: forward pass, gradient step on model parameters,
/// then codebook mutation (DTA, CSA, reset) in that order. Single-threaded;
/// identical config and seed give bit-identical checkpoints.
class Trainer {
 public:
  Trainer(TrainConfig config, const SyntheticDataset& data,
          std::vector<std::size_t> train_indices);

  /// Full training run over config.epochs; on_step fires after every batch.
  void run(const std::function<void(const StepStats&)>& on_step = {});

  StepStats run_step(std::span<const std::size_t> batch);

  // Individual phases, exposed so freeze contracts can be verified around
  // them.
  ForwardBuild build_batch(std::span<const std::size_t> batch);
  losses::LossBundle apply_gradients(const ForwardBuild& fb);
  void apply_dta(const ForwardBuild& fb);
  void apply_csa();
  void apply_reset();

  Checkpoint snapshot() const;

  const std::vector<Codebook>& codebooks() const { return books_; }
  const std::vector<EmaState>& ema_states() const { return ema_; }
  const ModelParams& params() const { return params_; }
  std::uint64_t steps_taken() const { return step_; }
  std::size_t steps_per_epoch() const { return train_indices_.size() / config_.batch; }

 private:
  TrainConfig config_;
  const SyntheticDataset* data_;
  std::vector<std::size_t> train_indices_;
  ModelParams params_;
  std::vector<Codebook> books_;
  std::vector<EmaState> ema_;
  Adam optimizer_;
  Rng shuffle_rng_;
  Rng reset_rng_;
  std::uint64_t step_ = 0;
};

}  // namespace cmda
