// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

#include "cmda/codebook.hpp"
#include "cmda/modality.hpp"
#include "cmda/rational.hpp"

namespace cmda {

/// Order in which modality centroids are pulled toward consensus.
/// Must be a permutation of the mode's modalities.
struct CascadeOrder {
  std::vector<ModalityId> order;

  static CascadeOrder trimodal_default() {
    return {{ModalityId::kText, ModalityId::kAudio, ModalityId::kVideo}};
  }
  static CascadeOrder bimodal_default() {
    return {{ModalityId::kAudio, ModalityId::kVideo}};
  }
  /// Parses "t->a->v" / "a->v" style strings.
  static CascadeOrder parse(const std::string& text);
  /// All permutations for a mode, in lexicographic slot order.
  static std::vector<CascadeOrder> all_orders(Mode mode);

  std::string to_string() const;
  void validate(Mode mode) const;
};

namespace csa {

/// Arithmetic mean of the pre-cascade centroids (the consensus anchor).
std::vector<double> anchor(std::span<const std::vector<double>> pre);

/// Sequential cascade: visit modalities in order, setting each visited
/// centroid to the mean of all current centroids. Input/output vectors are
/// indexed by modality slot (position in modalities(mode)).
std::vector<std::vector<double>> cascade(std::span<const std::vector<double>> pre,
                                         const CascadeOrder& order, Mode mode);

/// Unrolled cascade coefficients, exact. Row r holds the weights of the
/// post-cascade centroid of slot r over the pre-cascade centroids.
std::vector<std::vector<Rational>> closed_form_matrix(const CascadeOrder& order, Mode mode);

/// Matrix form of the cascade; used as the independent route against the
/// sequential form.
std::vector<std::vector<double>> apply_matrix(const std::vector<std::vector<Rational>>& matrix,
                                              std::span<const std::vector<double>> pre);

/// Cascade every codeword index of the modality codebooks in place.
void apply_to_codebooks(std::span<Codebook> books, const CascadeOrder& order, Mode mode);

void export_matrix_csv(const CascadeOrder& order, Mode mode, const std::string& path);

}  // namespace csa
}  // namespace cmda
