// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

#include "cmda/csa.hpp"
#include "cmda/losses.hpp"
#include "cmda/modality.hpp"
#include "cmda/rational.hpp"
#include "cmda/synthdata.hpp"

namespace cmda {

/// A named invariant was violated at configuration load.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& invariant)
      : std::runtime_error("config invariant violated: " + invariant) {}
};

/// Flat key/value configuration in TOML syntax: `[section]` headers,
/// `key = value` lines, `#` comments. Section names prefix keys as
/// "section.key". Raw literals are preserved so mixing weights can be
/// parsed exactly.
class KeyValueConfig {
 public:
  static KeyValueConfig parse_string(const std::string& text);
  static KeyValueConfig parse_file(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, std::string raw) { values_[key] = std::move(raw); }

  std::string raw(const std::string& key) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  Rational get_rational(const std::string& key, const Rational& fallback) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// Pretraining configuration. Mixing weights are exact rationals so the
/// convexity constraint is checked without a floating tolerance.
struct TrainConfig {
  std::size_t epochs = 6;
  std::size_t batch = 64;
  double learning_rate = 2e-3;
  double beta = 0.25;
  double rho = 0.99;
  double epsilon = 1e-5;
  Rational lambda_self{3, 5};
  Rational lambda_cross{1, 5};
  double tau = 1.0;
  double cmcm_floor = 1e-8;
  std::uint64_t reset_threshold = 300;  // N_re
  std::size_t codebook_size = 32;       // K
  std::size_t embed_dim = 16;           // D
  std::size_t hidden_dim = 0;           // 0 means 2 * embed_dim
  std::size_t horizon = 2;              // H
  CascadeOrder cascade_order = CascadeOrder::trimodal_default();
  AblationFlags flags;
  Mode mode = Mode::kTrimodal;
  std::uint64_t seed = 1;

  std::size_t hidden() const { return hidden_dim ? hidden_dim : 2 * embed_dim; }
  void validate() const;  // throws ConfigError naming the invariant
  std::uint64_t content_hash() const;
};

/// Downstream task-head configuration.
struct HeadConfig {
  std::size_t hidden = 64;
  std::size_t epochs = 20;
  double learning_rate = 2.5e-4;
  std::size_t batch = 256;
  bool trimodal_input = true;
  std::uint64_t seed = 7;
  void validate() const;
};

struct SplitConfig {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
  std::uint64_t seed = 11;
  void validate() const;
};

// Schema application: unknown keys in a recognized section are rejected.
TrainConfig train_config_from(const KeyValueConfig& kv);
GeneratorConfig generator_config_from(const KeyValueConfig& kv);
HeadConfig head_config_from(const KeyValueConfig& kv);
SplitConfig split_config_from(const KeyValueConfig& kv);

/// Canonical serialization used inside checkpoints and manifests.
std::string train_config_to_text(const TrainConfig& config);

}  // namespace cmda
