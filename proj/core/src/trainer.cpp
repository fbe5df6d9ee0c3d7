// SPDX-License-Identifier: Apache-2.0
#include "cmda/trainer.hpp"

#include <cmath>
#include <stdexcept>

namespace cmda {

namespace {

std::vector<double> batch_usage_entropy(std::span<const AssignmentGrid> grids, std::size_t k) {
  std::vector<double> entropy;
  entropy.reserve(grids.size());
  for (const auto& grid : grids) {
    std::vector<double> counts(k, 0.0);
    for (std::uint32_t idx : grid.indices) counts[idx] += 1.0;
    const double total = static_cast<double>(grid.indices.size());
    double h = 0.0;
    for (double c : counts)
      if (c > 0.0) h -= (c / total) * std::log(c / total);
    entropy.push_back(h);
  }
  return entropy;
}

}  // namespace

Trainer::Trainer(TrainConfig config, const SyntheticDataset& data,
                 std::vector<std::size_t> train_indices)
    : config_(std::move(config)),
      data_(&data),
      train_indices_(std::move(train_indices)),
      shuffle_rng_(Rng::derive(config_.seed, 20)),
      reset_rng_(Rng::derive(config_.seed, 21)) {
  config_.validate();
  if (data.config.mode != config_.mode)
    throw ConfigError("dataset modalities do not match the configured mode");
  if (config_.flags.cpc && data.config.timesteps < config_.horizon + 1)
    throw ConfigError("cpc requires timesteps > horizon");
  if (train_indices_.empty()) {
    train_indices_.resize(data.samples());
    for (std::size_t i = 0; i < train_indices_.size(); ++i) train_indices_[i] = i;
  }
  if (train_indices_.size() < config_.batch)
    throw ConfigError("training split smaller than one batch");

  const std::size_t n_mod = modality_count(config_.mode);
  ModelDims dims;
  for (std::size_t m = 0; m < n_mod; ++m) dims.raw.push_back(data.config.raw_dim(m));
  dims.embed = config_.embed_dim;
  dims.hidden = config_.hidden();

  Rng param_rng(Rng::derive(config_.seed, 1));
  params_ = ModelParams::init(config_.mode, dims, config_.horizon, param_rng);

  const auto mods = modalities(config_.mode);
  for (std::size_t m = 0; m < n_mod; ++m) {
    Rng book_rng(Rng::derive(config_.seed, 10 + m));
    books_.push_back(
        Codebook::random_init(mods[m], config_.codebook_size, config_.embed_dim, book_rng));
    ema_.push_back(EmaState::zero_init(config_.codebook_size, config_.embed_dim, config_.rho,
                                       config_.epsilon, config_.lambda_self.to_double(),
                                       config_.lambda_cross.to_double()));
  }

  Adam::Config adam;
  adam.learning_rate = config_.learning_rate;
  optimizer_ = Adam(adam, trainable_params(params_));
}

ForwardBuild Trainer::build_batch(std::span<const std::size_t> batch) {
  const std::size_t n_mod = modality_count(config_.mode);
  const std::size_t T = data_->timesteps();
  std::vector<Tensor> raw;
  raw.reserve(n_mod);
  for (std::size_t m = 0; m < n_mod; ++m) {
    const std::size_t dr = data_->config.raw_dim(m);
    Tensor x({batch.size() * T, dr});
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const std::size_t src = batch[b] * T * dr;
      for (std::size_t j = 0; j < T * dr; ++j) x[b * T * dr + j] = data_->raw[m][src + j];
    }
    raw.push_back(std::move(x));
  }
  return build_forward(params_, books_, raw, batch.size(), T, config_.flags, config_.tau,
                       config_.beta, config_.cmcm_floor);
}

losses::LossBundle Trainer::apply_gradients(const ForwardBuild& fb) {
  std::vector<NodeId> extras;
  const auto& comps = fb.components;
  for (NodeId id : comps.reconstruction) extras.push_back(id);
  for (NodeId id : comps.commitment) extras.push_back(id);
  for (NodeId id : comps.cpc) extras.push_back(id);
  for (NodeId id : comps.cmcm) extras.push_back(id);

  auto result = fb.graph.evaluate_with_gradients(fb.total, fb.inputs, extras);
  if (!std::isfinite(result.value.scalar_value()))
    throw std::runtime_error("trainer: non-finite total loss at step " + std::to_string(step_));

  const auto refs = trainable_params(params_);
  optimizer_.step(refs, std::span<const Tensor>(result.input_gradients.data(), refs.size()));

  losses::LossBundle bundle;
  std::size_t cursor = 0;
  auto take = [&](std::size_t n) {
    std::vector<double> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(result.extra_values[cursor++].scalar_value());
    return out;
  };
  bundle.reconstruction = take(comps.reconstruction.size());
  bundle.commitment = take(comps.commitment.size());
  bundle.cpc = take(comps.cpc.size());
  bundle.cmcm = take(comps.cmcm.size());
  const std::size_t n_pairs = modality_pairs(config_.mode).size();
  if (bundle.cpc.empty()) bundle.cpc.assign(n_pairs, 0.0);
  if (bundle.cmcm.empty()) bundle.cmcm.assign(n_pairs, 0.0);
  bundle.total = result.value.scalar_value();
  return bundle;
}

void Trainer::apply_dta(const ForwardBuild& fb) {
  if (!config_.flags.dta) return;
  for (std::size_t m = 0; m < books_.size(); ++m) {
    const Accumulators acc = accumulate(fb.latents, m, fb.assignments[m], books_[m].size);
    ema_update(ema_[m], acc, books_[m]);
  }
}

void Trainer::apply_csa() {
  if (!config_.flags.csa) return;
  csa::apply_to_codebooks(books_, config_.cascade_order, config_.mode);
}

void Trainer::apply_reset() {
  for (std::size_t m = 0; m < books_.size(); ++m) {
    double norm_sum = 0.0;
    for (std::size_t k = 0; k < books_[m].size; ++k) {
      double n2 = 0.0;
      for (double v : books_[m].entry(k)) n2 += v * v;
      norm_sum += std::sqrt(n2);
    }
    const double sigma = 0.01 * norm_sum / static_cast<double>(books_[m].size);
    reset_dead_codes(ema_[m], books_[m], config_.reset_threshold, ema_[m].counts, sigma,
                     reset_rng_);
  }
}

StepStats Trainer::run_step(std::span<const std::size_t> batch) {
  ForwardBuild fb = build_batch(batch);
  StepStats stats;
  stats.bundle = apply_gradients(fb);
  apply_dta(fb);
  apply_csa();
  apply_reset();
  step_ += 1;
  stats.step = step_;
  const auto agreement = agreement_rate(fb.assignments);
  stats.agreement_pairwise = agreement.pairwise;
  stats.agreement_overall = agreement.overall;
  stats.usage_entropy = batch_usage_entropy(fb.assignments, config_.codebook_size);
  return stats;
}

void Trainer::run(const std::function<void(const StepStats&)>& on_step) {
  std::vector<std::size_t> order = train_indices_;
  for (std::size_t epoch = 0; epoch < config_.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng_.uniform_index(i)]);
    const std::size_t full_batches = order.size() / config_.batch;
    for (std::size_t b = 0; b < full_batches; ++b) {
      StepStats stats =
          run_step(std::span<const std::size_t>(order.data() + b * config_.batch, config_.batch));
      if (on_step) on_step(stats);
    }
  }
}

Checkpoint Trainer::snapshot() const {
  Checkpoint cp;
  cp.config = config_;
  cp.step = step_;
  cp.params = params_;
  cp.books = books_;
  cp.ema = ema_;
  cp.adam_m = optimizer_.first_moments();
  cp.adam_v = optimizer_.second_moments();
  cp.adam_steps = optimizer_.steps_taken();
  cp.config_hash = config_.content_hash();
  return cp;
}

}  // namespace cmda
