// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

#include "cmda/checkpoint.hpp"
#include "cmda/synthdata.hpp"

namespace cmda {

enum class TaskKind { kGlobalClassification, kSegmentMultilabel };

/// Two-layer perceptron over quantized codes; the only trainable object
/// during downstream runs.
struct TaskHead {
  TaskKind kind = TaskKind::kGlobalClassification;
  std::size_t classes = 0;
  bool trimodal_input = false;
  ModalityId trained_on = ModalityId::kAudio;
  Tensor w1, b1, w2, b2;

  static TaskHead init(TaskKind kind, std::size_t input_dim, std::size_t hidden,
                       std::size_t classes, bool trimodal_input, Rng& rng);
  Tensor logits(const Tensor& features) const;  // (rows x classes)
};

struct TransferResult {
  ModalityId train_modality = ModalityId::kAudio;
  ModalityId eval_modality = ModalityId::kAudio;
  TaskKind kind = TaskKind::kGlobalClassification;
  double metric = 0.0;
  std::string metric_kind;  // "accuracy" or "segment-accuracy"
};

/// Quantized-code features of one sample under a frozen checkpoint.
/// Unimodal: the modality's own codewords (T x D). Trimodal: same-index
/// codewords of every modality concatenated (T x nD). pooled mean-pools
/// over time to a single row.
Tensor head_features(const Checkpoint& cp, std::size_t slot, const SyntheticDataset& data,
                     std::size_t sample, bool trimodal_input, bool pooled);

/// Trains a head on modality m's quantized codes. Encoders and codebooks are
/// frozen; any detected mutation is a hard failure.
TaskHead train_head(const Checkpoint& cp, ModalityId m, const SyntheticDataset& data,
                    std::span<const std::size_t> indices, TaskKind kind, const HeadConfig& config);

/// Applies a head trained on one modality to another modality's codes.
TransferResult eval_transfer(const TaskHead& head, const Checkpoint& cp, ModalityId m2,
                             const SyntheticDataset& data, std::span<const std::size_t> indices);

struct RetrievalResult {
  ModalityId query = ModalityId::kAudio;
  ModalityId gallery = ModalityId::kAudio;
  std::vector<std::size_t> k_values;
  std::vector<double> recall;
};

/// Mean-pooled quantized embeddings ranked by Euclidean distance; recall@k
/// is the fraction of queries whose paired sample ranks in the top k.
RetrievalResult zero_shot_retrieval(const Checkpoint& cp, ModalityId query, ModalityId gallery,
                                    const SyntheticDataset& data,
                                    std::span<const std::size_t> indices,
                                    std::span<const std::size_t> k_values);

/// Ranking core shared with the retrieval tests: rank of each query's true
/// pair under (distance, index) ordering, 1-based.
std::vector<std::size_t> retrieval_ranks(const std::vector<std::vector<double>>& queries,
                                         const std::vector<std::vector<double>>& gallery);

struct DiagnosticsReport {
  std::vector<std::vector<double>> usage;   // per slot, fraction per codeword
  std::vector<double> entropy;              // per slot
  std::vector<double> agreement_pairwise;   // canonical pair order
  double agreement_overall = 0.0;
  std::vector<double> cross_modal_distance; // per pair, mean over indices
};

DiagnosticsReport codebook_diagnostics(const Checkpoint& cp, const SyntheticDataset& data,
                                       std::span<const std::size_t> indices);

}  // namespace cmda
