// SPDX-License-Identifier: Apache-2.0
#include "cmda/cmg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cmda/graph.hpp"
#include "cmda/hash.hpp"
#include "cmda/optimizer.hpp"

namespace cmda {

namespace {

Tensor uniform_weights(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor w({rows, cols});
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  for (std::size_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-bound, bound);
  return w;
}

std::size_t argmax_row(const Tensor& logits, std::size_t row) {
  const std::size_t c = logits.cols();
  std::size_t best = 0;
  for (std::size_t j = 1; j < c; ++j)
    if (logits.at(row, j) > logits.at(row, best)) best = j;
  return best;
}

struct FrozenGuard {
  const Checkpoint& cp;
  std::uint64_t enc, books;
  explicit FrozenGuard(const Checkpoint& c) : cp(c), enc(c.encoder_hash()), books(c.codebook_hash()) {}
  void verify(const char* where) const {
    if (cp.encoder_hash() != enc || cp.codebook_hash() != books)
      throw std::runtime_error(std::string(where) + ": frozen parameters changed");
  }
};

}  // namespace

TaskHead TaskHead::init(TaskKind kind, std::size_t input_dim, std::size_t hidden,
                        std::size_t classes, bool trimodal_input, Rng& rng) {
  TaskHead head;
  head.kind = kind;
  head.classes = classes;
  head.trimodal_input = trimodal_input;
  head.w1 = uniform_weights(input_dim, hidden, rng);
  head.b1 = Tensor({hidden});
  head.w2 = uniform_weights(hidden, classes, rng);
  head.b2 = Tensor({classes});
  return head;
}

Tensor TaskHead::logits(const Tensor& features) const {
  Graph g;
  NodeId x = g.constant(features);
  NodeId hidden = g.tanh(g.add_rowvec(g.matmul(x, g.constant(w1)), g.constant(b1)));
  NodeId out = g.add_rowvec(g.matmul(hidden, g.constant(w2)), g.constant(b2));
  return g.eval(out, {});
}

Tensor head_features(const Checkpoint& cp, std::size_t slot, const SyntheticDataset& data,
                     std::size_t sample, bool trimodal_input, bool pooled) {
  const std::size_t T = data.timesteps();
  const std::size_t dr = data.config.raw_dim(slot);
  Tensor x({T, dr});
  for (std::size_t j = 0; j < T * dr; ++j) x[j] = data.raw[slot][sample * T * dr + j];

  const Tensor z = encode(cp.params.encoders[slot], x);
  const auto q = quantize_sequence(z, cp.books[slot]);

  const std::size_t D = cp.books[slot].dim;
  const std::size_t n_mod = cp.books.size();
  const std::size_t width = trimodal_input ? n_mod * D : D;
  Tensor features({T, width});
  for (std::size_t t = 0; t < T; ++t) {
    if (trimodal_input) {
      for (std::size_t m = 0; m < n_mod; ++m) {
        auto e = cp.books[m].entry(q.indices[t]);
        for (std::size_t c = 0; c < D; ++c) features.at(t, m * D + c) = e[c];
      }
    } else {
      for (std::size_t c = 0; c < D; ++c) features.at(t, c) = q.quantized.at(t, c);
    }
  }
  if (!pooled) return features;

  Tensor mean({1, width});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t c = 0; c < width; ++c) mean[c] += features.at(t, c);
  for (std::size_t c = 0; c < width; ++c) mean[c] /= static_cast<double>(T);
  return mean;
}

namespace {

struct HeadData {
  Tensor features;                  // rows x width
  std::vector<std::uint32_t> labels;
};

HeadData collect_features(const Checkpoint& cp, std::size_t slot, const SyntheticDataset& data,
                          std::span<const std::size_t> indices, TaskKind kind,
                          bool trimodal_input) {
  const bool pooled = kind == TaskKind::kGlobalClassification;
  const std::size_t T = data.timesteps();
  const std::size_t rows_per = pooled ? 1 : T;

  HeadData out;
  const Tensor probe = head_features(cp, slot, data, indices.empty() ? 0 : indices[0],
                                     trimodal_input, pooled);
  const std::size_t width = probe.cols();
  out.features = Tensor({indices.size() * rows_per, width});
  out.labels.reserve(indices.size() * rows_per);
  for (std::size_t n = 0; n < indices.size(); ++n) {
    const Tensor f = head_features(cp, slot, data, indices[n], trimodal_input, pooled);
    for (std::size_t r = 0; r < rows_per; ++r)
      for (std::size_t c = 0; c < width; ++c)
        out.features.at(n * rows_per + r, c) = f.at(r, c);
    if (pooled) {
      out.labels.push_back(data.global_labels[indices[n]]);
    } else {
      for (std::size_t t = 0; t < T; ++t) out.labels.push_back(data.frame_label(indices[n], t));
    }
  }
  return out;
}

double metric_against(const TaskHead& head, const HeadData& data) {
  if (data.labels.empty()) throw std::invalid_argument("eval: empty split");
  const Tensor logits = head.logits(data.features);
  std::size_t hits = 0;
  for (std::size_t r = 0; r < data.labels.size(); ++r)
    if (argmax_row(logits, r) == data.labels[r]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(data.labels.size());
}

}  // namespace

TaskHead train_head(const Checkpoint& cp, ModalityId m, const SyntheticDataset& data,
                    std::span<const std::size_t> indices, TaskKind kind,
                    const HeadConfig& config) {
  config.validate();
  if (indices.empty()) throw std::invalid_argument("train_head: empty split");
  const std::size_t slot = modality_slot(m, cp.config.mode);

  FrozenGuard guard(cp);
  const HeadData train = collect_features(cp, slot, data, indices, kind, config.trimodal_input);
  guard.verify("train_head");

  Rng rng(config.seed);
  TaskHead head = TaskHead::init(kind, train.features.cols(), config.hidden, data.config.classes,
                                 config.trimodal_input, rng);
  head.trained_on = m;

  std::vector<ParamRef> refs{{"head.w1", &head.w1},
                             {"head.b1", &head.b1},
                             {"head.w2", &head.w2},
                             {"head.b2", &head.b2}};
  Adam::Config adam;
  adam.learning_rate = config.learning_rate;
  Adam optimizer(adam, refs);

  const std::size_t rows = train.features.rows();
  const std::size_t width = train.features.cols();
  std::vector<std::size_t> order(rows);
  for (std::size_t i = 0; i < rows; ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = rows; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
    for (std::size_t start = 0; start < rows; start += config.batch) {
      const std::size_t count = std::min(config.batch, rows - start);
      Tensor xb({count, width});
      Tensor onehot({count, head.classes});
      for (std::size_t r = 0; r < count; ++r) {
        const std::size_t src = order[start + r];
        for (std::size_t c = 0; c < width; ++c) xb.at(r, c) = train.features.at(src, c);
        onehot.at(r, train.labels[src]) = 1.0;
      }

      Graph g;
      NodeId x = g.constant(std::move(xb));
      NodeId w1 = g.input(head.w1.shape());
      NodeId b1 = g.input(head.b1.shape());
      NodeId w2 = g.input(head.w2.shape());
      NodeId b2 = g.input(head.b2.shape());
      NodeId logits = g.add_rowvec(g.matmul(g.tanh(g.add_rowvec(g.matmul(x, w1), b1)), w2), b2);
      NodeId targets = g.constant(std::move(onehot));
      NodeId loss;
      if (kind == TaskKind::kGlobalClassification) {
        loss = g.scale(g.sum_all(g.mul(g.log_softmax_rows(logits), targets)),
                       -1.0 / static_cast<double>(count));
      } else {
        // Multi-label cross-entropy with logits: softplus(s) - y * s.
        NodeId bce = g.sub(g.sum_all(g.softplus(logits)), g.sum_all(g.mul(targets, logits)));
        loss = g.scale(bce, 1.0 / static_cast<double>(count));
      }

      std::vector<Tensor> inputs{head.w1, head.b1, head.w2, head.b2};
      auto result = g.evaluate_with_gradients(loss, inputs);
      optimizer.step(refs, result.input_gradients);
    }
  }
  guard.verify("train_head");
  return head;
}

TransferResult eval_transfer(const TaskHead& head, const Checkpoint& cp, ModalityId m2,
                             const SyntheticDataset& data,
                             std::span<const std::size_t> indices) {
  const std::size_t slot = modality_slot(m2, cp.config.mode);
  FrozenGuard guard(cp);
  const HeadData eval = collect_features(cp, slot, data, indices, head.kind, head.trimodal_input);
  TransferResult result;
  result.train_modality = head.trained_on;
  result.eval_modality = m2;
  result.kind = head.kind;
  result.metric = metric_against(head, eval);
  result.metric_kind =
      head.kind == TaskKind::kGlobalClassification ? "accuracy" : "segment-accuracy";
  guard.verify("eval_transfer");
  return result;
}

std::vector<std::size_t> retrieval_ranks(const std::vector<std::vector<double>>& queries,
                                         const std::vector<std::vector<double>>& gallery) {
  if (queries.size() != gallery.size())
    throw std::invalid_argument("retrieval: query/gallery must pair up");
  const std::size_t n = queries.size();
  std::vector<std::size_t> ranks(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto dist = [&](std::size_t j) {
      double d = 0.0;
      for (std::size_t c = 0; c < queries[i].size(); ++c) {
        const double diff = queries[i][c] - gallery[j][c];
        d += diff * diff;
      }
      return d;
    };
    // The true pair wins distance ties: an identical gallery ranks it first.
    const double d_true = dist(i);
    std::size_t rank = 1;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && dist(j) < d_true) ++rank;
    }
    ranks[i] = rank;
  }
  return ranks;
}

RetrievalResult zero_shot_retrieval(const Checkpoint& cp, ModalityId query, ModalityId gallery,
                                    const SyntheticDataset& data,
                                    std::span<const std::size_t> indices,
                                    std::span<const std::size_t> k_values) {
  if (indices.empty()) throw std::invalid_argument("zero_shot_retrieval: empty split");
  FrozenGuard guard(cp);
  const std::size_t q_slot = modality_slot(query, cp.config.mode);
  const std::size_t g_slot = modality_slot(gallery, cp.config.mode);

  std::vector<std::vector<double>> q_emb, g_emb;
  for (std::size_t idx : indices) {
    Tensor q = head_features(cp, q_slot, data, idx, false, true);
    Tensor g = head_features(cp, g_slot, data, idx, false, true);
    q_emb.emplace_back(q.data().begin(), q.data().end());
    g_emb.emplace_back(g.data().begin(), g.data().end());
  }
  const auto ranks = retrieval_ranks(q_emb, g_emb);

  RetrievalResult result;
  result.query = query;
  result.gallery = gallery;
  for (std::size_t k : k_values) {
    std::size_t hits = 0;
    for (std::size_t rank : ranks)
      if (rank <= k) ++hits;
    result.k_values.push_back(k);
    result.recall.push_back(static_cast<double>(hits) / static_cast<double>(ranks.size()));
  }
  guard.verify("zero_shot_retrieval");
  return result;
}

DiagnosticsReport codebook_diagnostics(const Checkpoint& cp, const SyntheticDataset& data,
                                       std::span<const std::size_t> indices) {
  if (indices.empty()) throw std::invalid_argument("codebook_diagnostics: empty split");
  FrozenGuard guard(cp);
  const std::size_t n_mod = cp.books.size();
  const std::size_t T = data.timesteps();
  const std::size_t K = cp.books[0].size;

  DiagnosticsReport report;
  std::vector<AssignmentGrid> grids(n_mod);
  for (std::size_t m = 0; m < n_mod; ++m) {
    grids[m].batch = indices.size();
    grids[m].timesteps = T;
    grids[m].indices.reserve(indices.size() * T);
    std::vector<double> counts(K, 0.0);
    const std::size_t dr = data.config.raw_dim(m);
    for (std::size_t idx : indices) {
      Tensor x({T, dr});
      for (std::size_t j = 0; j < T * dr; ++j) x[j] = data.raw[m][idx * T * dr + j];
      const auto q = quantize_sequence(encode(cp.params.encoders[m], x), cp.books[m]);
      for (std::uint32_t k : q.indices) {
        grids[m].indices.push_back(k);
        counts[k] += 1.0;
      }
    }
    const double total = static_cast<double>(indices.size() * T);
    double entropy = 0.0;
    for (auto& c : counts) {
      c /= total;
      if (c > 0.0) entropy -= c * std::log(c);
    }
    report.usage.push_back(std::move(counts));
    report.entropy.push_back(entropy);
  }

  const auto agreement = agreement_rate(grids);
  report.agreement_pairwise = agreement.pairwise;
  report.agreement_overall = agreement.overall;

  for (std::size_t a = 0; a < n_mod; ++a) {
    for (std::size_t b = a + 1; b < n_mod; ++b) {
      double mean = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        double d = 0.0;
        for (std::size_t c = 0; c < cp.books[a].dim; ++c) {
          const double diff = cp.books[a].entries[k * cp.books[a].dim + c] -
                              cp.books[b].entries[k * cp.books[b].dim + c];
          d += diff * diff;
        }
        mean += std::sqrt(d);
      }
      report.cross_modal_distance.push_back(mean / static_cast<double>(K));
    }
  }
  guard.verify("codebook_diagnostics");
  return report;
}

}  // namespace cmda
