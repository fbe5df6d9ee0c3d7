// SPDX-License-Identifier: Apache-2.0
#include "cmda/csa.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace cmda {

namespace {

std::size_t slot_of(ModalityId m, Mode mode) {
  const auto mods = modalities(mode);
  for (std::size_t i = 0; i < mods.size(); ++i)
    if (mods[i] == m) return i;
  throw std::invalid_argument(std::string("cascade order: modality ") + modality_name(m) +
                              " is not part of this mode");
}

}  // namespace

CascadeOrder CascadeOrder::parse(const std::string& text) {
  CascadeOrder result;
  std::string token;
  auto flush = [&] {
    if (token.empty()) throw std::invalid_argument("cascade order: empty element in '" + text + "'");
    if (token == "a" || token == "audio") result.order.push_back(ModalityId::kAudio);
    else if (token == "v" || token == "video") result.order.push_back(ModalityId::kVideo);
    else if (token == "t" || token == "text") result.order.push_back(ModalityId::kText);
    else throw std::invalid_argument("cascade order: unknown modality '" + token + "'");
    token.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '-' || text[i] == '>') {
      if (!token.empty()) flush();
      continue;
    }
    token.push_back(text[i]);
  }
  if (!token.empty()) flush();
  if (result.order.empty()) throw std::invalid_argument("cascade order: empty string");
  return result;
}

std::vector<CascadeOrder> CascadeOrder::all_orders(Mode mode) {
  auto mods = modalities(mode);
  std::sort(mods.begin(), mods.end());
  std::vector<CascadeOrder> out;
  do {
    out.push_back({mods});
  } while (std::next_permutation(mods.begin(), mods.end()));
  return out;
}

std::string CascadeOrder::to_string() const {
  std::string s;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i) s += "->";
    s += modality_name(order[i])[0];
  }
  return s;
}

void CascadeOrder::validate(Mode mode) const {
  const auto mods = modalities(mode);
  if (order.size() != mods.size())
    throw std::invalid_argument("cascade order: expected " + std::to_string(mods.size()) +
                                " modalities, got " + std::to_string(order.size()));
  for (ModalityId m : mods) {
    if (std::count(order.begin(), order.end(), m) != 1)
      throw std::invalid_argument(std::string("cascade order: ") + modality_name(m) +
                                  " must appear exactly once");
  }
}

namespace csa {

namespace {

/// Mean in centered form: base + mean of differences. Exact when all inputs
/// coincide, which keeps equal centroids a true fixed point of the cascade.
std::vector<double> centered_mean(std::span<const std::vector<double>> vs) {
  const std::size_t d = vs[0].size();
  std::vector<double> mean(d, 0.0);
  for (const auto& v : vs)
    for (std::size_t c = 0; c < d; ++c) mean[c] += v[c] - vs[0][c];
  for (std::size_t c = 0; c < d; ++c) mean[c] = vs[0][c] + mean[c] / static_cast<double>(vs.size());
  return mean;
}

}  // namespace

std::vector<double> anchor(std::span<const std::vector<double>> pre) {
  if (pre.empty()) throw std::invalid_argument("anchor: no centroids");
  const std::size_t d = pre[0].size();
  for (const auto& v : pre)
    if (v.size() != d) throw std::invalid_argument("anchor: centroid dimensions differ");
  return centered_mean(pre);
}

std::vector<std::vector<double>> cascade(std::span<const std::vector<double>> pre,
                                         const CascadeOrder& order, Mode mode) {
  order.validate(mode);
  const std::size_t n = modality_count(mode);
  if (pre.size() != n) throw std::invalid_argument("cascade: centroid count does not match mode");
  const std::size_t d = pre[0].size();
  for (const auto& v : pre)
    if (v.size() != d) throw std::invalid_argument("cascade: centroid dimensions differ");

  std::vector<std::vector<double>> current(pre.begin(), pre.end());
  // Visiting a modality sets its centroid to the mean of all current
  // centroids; with no modality visited yet this is exactly the anchor.
  for (ModalityId m : order.order) {
    const std::size_t slot = slot_of(m, mode);
    current[slot] = centered_mean(current);
  }
  return current;
}

std::vector<std::vector<Rational>> closed_form_matrix(const CascadeOrder& order, Mode mode) {
  order.validate(mode);
  const std::size_t n = modality_count(mode);
  // Coefficient vectors over the pre-cascade centroids, unrolled symbolically.
  std::vector<std::vector<Rational>> coeff(n, std::vector<Rational>(n, Rational(0)));
  for (std::size_t i = 0; i < n; ++i) coeff[i][i] = Rational(1);

  const Rational inv_n(1, static_cast<std::int64_t>(n));
  for (ModalityId m : order.order) {
    const std::size_t slot = slot_of(m, mode);
    std::vector<Rational> mean(n, Rational(0));
    for (const auto& row : coeff)
      for (std::size_t c = 0; c < n; ++c) mean[c] = mean[c] + row[c];
    for (auto& x : mean) x = x * inv_n;
    coeff[slot] = std::move(mean);
  }
  return coeff;
}

std::vector<std::vector<double>> apply_matrix(const std::vector<std::vector<Rational>>& matrix,
                                              std::span<const std::vector<double>> pre) {
  const std::size_t n = matrix.size();
  if (pre.size() != n) throw std::invalid_argument("apply_matrix: centroid count mismatch");
  const std::size_t d = pre[0].size();
  std::vector<std::vector<double>> post(n, std::vector<double>(d, 0.0));
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t s = 0; s < n; ++s) {
      const double w = matrix[r][s].to_double();
      for (std::size_t c = 0; c < d; ++c) post[r][c] += w * pre[s][c];
    }
  return post;
}

void apply_to_codebooks(std::span<Codebook> books, const CascadeOrder& order, Mode mode) {
  const std::size_t n = modality_count(mode);
  if (books.size() != n) throw std::invalid_argument("apply_to_codebooks: codebook count mismatch");
  const std::size_t K = books[0].size, D = books[0].dim;
  for (const auto& b : books)
    if (b.size != K || b.dim != D)
      throw std::invalid_argument("apply_to_codebooks: codebook shapes differ");

  std::vector<std::vector<double>> pre(n, std::vector<double>(D));
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t s = 0; s < n; ++s) {
      auto e = books[s].entry(k);
      std::copy(e.begin(), e.end(), pre[s].begin());
    }
    auto post = cascade(pre, order, mode);
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t c = 0; c < D; ++c) books[s].entries[k * D + c] = post[s][c];
  }
}

void export_matrix_csv(const CascadeOrder& order, Mode mode, const std::string& path) {
  const auto matrix = closed_form_matrix(order, mode);
  const auto mods = modalities(mode);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("export_matrix_csv: cannot open " + path);
  out << "modality";
  for (ModalityId m : mods) out << ",w_" << modality_name(m);
  out << '\n';
  for (std::size_t r = 0; r < matrix.size(); ++r) {
    out << modality_name(mods[r]);
    for (const auto& x : matrix[r]) out << ',' << x.to_string();
    out << '\n';
  }
}

}  // namespace csa
}  // namespace cmda
