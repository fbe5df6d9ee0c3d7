// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cmda/model.hpp"
#include "cmda/tensor.hpp"

namespace cmda {

/// Adam with bias correction. A zero gradient against zero moments yields a
/// zero update, including at the first step.
class Adam {
 public:
  struct Config {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
  };

  Adam() = default;
  Adam(Config config, std::span<const ParamRef> params);

  void step(std::span<const ParamRef> params, std::span<const Tensor> gradients);

  std::uint64_t steps_taken() const { return steps_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }
  void restore(std::vector<Tensor> m, std::vector<Tensor> v, std::uint64_t steps);
  const Config& config() const { return config_; }

 private:
  Config config_;
  std::vector<Tensor> m_, v_;
  std::uint64_t steps_ = 0;
};

}  // namespace cmda
