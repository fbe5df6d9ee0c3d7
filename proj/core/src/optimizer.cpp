// SPDX-License-Identifier: Apache-2.0
#include "cmda/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace cmda {

Adam::Adam(Config config, std::span<const ParamRef> params) : config_(config) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& ref : params) {
    m_.emplace_back(ref.tensor->shape());
    v_.emplace_back(ref.tensor->shape());
  }
}

void Adam::step(std::span<const ParamRef> params, std::span<const Tensor> gradients) {
  if (params.size() != m_.size() || gradients.size() != m_.size())
    throw std::invalid_argument("Adam::step: parameter/gradient count mismatch");
  steps_ += 1;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& w = *params[p].tensor;
    const Tensor& g = gradients[p];
    if (!w.same_shape(g))
      throw std::invalid_argument("Adam::step: gradient shape mismatch for " + params[p].name);
    Tensor& m = m_[p];
    Tensor& v = v_[p];
    for (std::size_t i = 0; i < w.numel(); ++i) {
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      w[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

void Adam::restore(std::vector<Tensor> m, std::vector<Tensor> v, std::uint64_t steps) {
  if (m.size() != m_.size() || v.size() != v_.size())
    throw std::invalid_argument("Adam::restore: moment count mismatch");
  m_ = std::move(m);
  v_ = std::move(v);
  steps_ = steps;
}

}  // namespace cmda
