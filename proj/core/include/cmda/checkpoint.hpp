// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cmda/codebook.hpp"
#include "cmda/config.hpp"
#include "cmda/dta.hpp"
#include "cmda/model.hpp"

namespace cmda {

/// Full training state: reloading reproduces identical forward outputs on
/// identical inputs. Serialized as a versioned little-endian container.
struct Checkpoint {
  TrainConfig config;
  std::uint64_t step = 0;
  ModelParams params;
  std::vector<Codebook> books;
  std::vector<EmaState> ema;
  std::vector<Tensor> adam_m, adam_v;
  std::uint64_t adam_steps = 0;
  std::uint64_t config_hash = 0;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

  std::uint64_t codebook_hash() const;
  std::uint64_t encoder_hash() const { return hash_params(params); }
};

}  // namespace cmda
