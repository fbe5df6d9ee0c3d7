// SPDX-License-Identifier: Apache-2.0
#include "cmda/codebook.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace cmda {

Codebook Codebook::random_init(ModalityId m, std::size_t k, std::size_t d, Rng& rng) {
  if (k < 2) throw std::invalid_argument("Codebook: K must be at least 2");
  if (d < 1) throw std::invalid_argument("Codebook: D must be at least 1");
  Codebook book;
  book.modality = m;
  book.size = k;
  book.dim = d;
  book.entries = Tensor({k, d});
  const double sd = 1.0 / std::sqrt(static_cast<double>(d));
  for (std::size_t i = 0; i < k * d; ++i) book.entries[i] = sd * rng.normal();
  return book;
}

std::size_t assign_hard(std::span<const double> frame, const Codebook& book) {
  if (frame.size() != book.dim)
    throw std::invalid_argument("assign_hard: frame dimension " + std::to_string(frame.size()) +
                                " does not match codebook dim " + std::to_string(book.dim));
  for (double v : frame)
    if (!std::isfinite(v)) throw std::invalid_argument("assign_hard: non-finite frame value");

  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  const double* e = book.entries.data().data();
  for (std::size_t k = 0; k < book.size; ++k) {
    double dist = 0.0;
    for (std::size_t c = 0; c < book.dim; ++c) {
      const double diff = frame[c] - e[k * book.dim + c];
      dist += diff * diff;
    }
    if (dist < best_dist) {
      best_dist = dist;
      best = k;
    }
  }
  return best;
}

QuantizeResult quantize_sequence(const Tensor& z, const Codebook& book) {
  if (z.rank() != 2 || z.cols() != book.dim)
    throw std::invalid_argument("quantize_sequence: expected (T x " + std::to_string(book.dim) +
                                ") input, got " + z.shape_string());
  QuantizeResult result;
  result.quantized = Tensor(z.shape());
  result.indices.reserve(z.rows());
  for (std::size_t t = 0; t < z.rows(); ++t) {
    const std::size_t k = assign_hard(z.data().subspan(t * book.dim, book.dim), book);
    result.indices.push_back(static_cast<std::uint32_t>(k));
    auto entry = book.entry(k);
    for (std::size_t c = 0; c < book.dim; ++c) result.quantized[t * book.dim + c] = entry[c];
  }
  return result;
}

Tensor usage_distribution(const Tensor& z, const Codebook& book, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("usage_distribution: tau must be positive");
  if (z.rank() != 2 || z.cols() != book.dim)
    throw std::invalid_argument("usage_distribution: expected (T x " + std::to_string(book.dim) +
                                ") input, got " + z.shape_string());
  const std::size_t T = z.rows(), K = book.size, D = book.dim;
  Tensor p({K});
  std::vector<double> logits(K);
  for (std::size_t t = 0; t < T; ++t) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) {
      double dist = 0.0;
      for (std::size_t c = 0; c < D; ++c) {
        const double diff = z[t * D + c] - book.entries[k * D + c];
        dist += diff * diff;
      }
      logits[k] = -dist / tau;
      mx = std::max(mx, logits[k]);
    }
    double total = 0.0;
    for (std::size_t k = 0; k < K; ++k) total += std::exp(logits[k] - mx);
    for (std::size_t k = 0; k < K; ++k) p[k] += std::exp(logits[k] - mx) / total;
  }
  for (std::size_t k = 0; k < K; ++k) p[k] /= static_cast<double>(T);
  return p;
}

AgreementReport agreement_rate(std::span<const AssignmentGrid> grids) {
  if (grids.size() < 2) throw std::invalid_argument("agreement_rate: need at least two grids");
  const std::size_t B = grids[0].batch, T = grids[0].timesteps;
  for (const auto& g : grids) {
    if (g.batch != B || g.timesteps != T)
      throw std::invalid_argument("agreement_rate: grid shapes differ");
    if (g.indices.size() != B * T)
      throw std::invalid_argument("agreement_rate: grid size does not match B x T");
  }
  if (B * T == 0) throw std::invalid_argument("agreement_rate: empty grids");

  AgreementReport report;
  const double cells = static_cast<double>(B * T);
  for (std::size_t a = 0; a < grids.size(); ++a) {
    for (std::size_t b = a + 1; b < grids.size(); ++b) {
      std::size_t same = 0;
      for (std::size_t i = 0; i < B * T; ++i)
        if (grids[a].indices[i] == grids[b].indices[i]) ++same;
      report.pairwise.push_back(static_cast<double>(same) / cells);
    }
  }
  std::size_t all_same = 0;
  for (std::size_t i = 0; i < B * T; ++i) {
    bool same = true;
    for (std::size_t g = 1; g < grids.size(); ++g)
      if (grids[g].indices[i] != grids[0].indices[i]) {
        same = false;
        break;
      }
    if (same) ++all_same;
  }
  report.overall = static_cast<double>(all_same) / cells;
  return report;
}

void export_codebook_csv(const Codebook& book, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("export_codebook_csv: cannot open " + path);
  for (std::size_t k = 0; k < book.size; ++k) {
    for (std::size_t c = 0; c < book.dim; ++c) {
      if (c) out << ',';
      out << book.entries[k * book.dim + c];
    }
    out << '\n';
  }
}

}  // namespace cmda
