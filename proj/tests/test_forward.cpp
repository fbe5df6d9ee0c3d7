// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <vector>

#include "cmda/forward.hpp"
#include "cmda/gradcheck.hpp"
#include "cmda/rng.hpp"

using namespace cmda;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double scale = 0.6) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = scale * rng.normal();
  return t;
}

struct TinySetup {
  ModelParams params;
  std::vector<Codebook> books;
  std::vector<Tensor> raw;
  std::size_t batch = 2, timesteps = 3;
};

TinySetup tiny_trimodal(std::uint64_t seed) {
  Rng rng(seed);
  TinySetup s;
  ModelDims dims;
  dims.raw = {3, 4, 2};
  dims.embed = 2;
  dims.hidden = 4;
  s.params = ModelParams::init(Mode::kTrimodal, dims, 1, rng);
  const auto mods = modalities(Mode::kTrimodal);
  for (std::size_t m = 0; m < 3; ++m)
    s.books.push_back(Codebook::random_init(mods[m], 3, dims.embed, rng));
  for (std::size_t m = 0; m < 3; ++m)
    s.raw.push_back(random_tensor({s.batch * s.timesteps, dims.raw[m]}, rng));
  return s;
}

}  // namespace

TEST_CASE("straight-through quantization: codeword values, identity gradient") {
  Graph g;
  NodeId z = g.input({2, 2});
  NodeId book = g.input({3, 2}, /*differentiable=*/false);
  NodeId picked = g.index_select(book, {2, 0});
  NodeId zq = g.add(z, g.stop_gradient(g.sub(picked, z)));
  NodeId out = g.sum_all(zq);

  Tensor zv = Tensor::matrix(2, 2, {0.1, 0.2, 0.3, 0.4});
  Tensor bv = Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6});
  std::vector<Tensor> inputs{zv, bv};
  auto r = g.evaluate_with_gradients(out, inputs);

  // Forward: exactly the selected codewords.
  Tensor q = g.eval(zq, inputs);
  CHECK(q.at(0, 0) == 5.0);
  CHECK(q.at(0, 1) == 6.0);
  CHECK(q.at(1, 0) == 1.0);
  CHECK(q.at(1, 1) == 2.0);
  // Backward: identity onto the encoder side.
  for (std::size_t i = 0; i < 4; ++i) CHECK(r.input_gradients[0][i] == 1.0);
}

TEST_CASE("forward build: assignments match direct quantization and books get no gradient") {
  TinySetup s = tiny_trimodal(91);
  ForwardBuild fb =
      build_forward(s.params, s.books, s.raw, s.batch, s.timesteps, AblationFlags{}, 1.0, 0.25, 1e-8);

  for (std::size_t m = 0; m < 3; ++m) {
    REQUIRE(fb.assignments[m].indices.size() == s.batch * s.timesteps);
    for (std::size_t r = 0; r < s.batch * s.timesteps; ++r) {
      const auto frame = fb.latents[m].data().subspan(r * 2, 2);
      CHECK(fb.assignments[m].indices[r] == assign_hard(frame, s.books[m]));
    }
  }

  auto result = fb.graph.evaluate_with_gradients(fb.total, fb.inputs);
  CHECK(std::isfinite(result.value.scalar_value()));
  // The codebook inputs sit at the tail and are non-differentiable.
  const std::size_t n_params = fb.inputs.size() - 3;
  for (std::size_t m = 0; m < 3; ++m)
    for (std::size_t i = 0; i < result.input_gradients[n_params + m].numel(); ++i)
      CHECK(result.input_gradients[n_params + m][i] == 0.0);
}

TEST_CASE("forward build: decoder, projection, and context gradients agree with differences") {
  TinySetup s = tiny_trimodal(17);
  ForwardBuild fb =
      build_forward(s.params, s.books, s.raw, s.batch, s.timesteps, AblationFlags{}, 1.0, 0.25, 1e-8);
  auto analytic = fb.graph.evaluate_with_gradients(fb.total, fb.inputs);

  // Encoder parameters are excluded: their reconstruction-path gradient is
  // the straight-through estimator, which is not the derivative of the
  // replayed forward map. Everything downstream of quantization and the
  // CPC/context path is a plain derivative and must match differences.
  const std::size_t per_slot = 12 + s.params.horizon;
  std::vector<Tensor> scratch = fb.inputs;
  for (std::size_t m = 0; m < 3; ++m) {
    for (std::size_t off = 4; off < per_slot; ++off) {
      const std::size_t i = m * per_slot + off;
      auto f = [&](const Tensor& probe) {
        scratch[i] = probe;
        const double v = fb.graph.eval(fb.total, scratch).scalar_value();
        scratch[i] = fb.inputs[i];
        return v;
      };
      Tensor numeric = finite_difference_gradient(f, fb.inputs[i], 1e-5);
      CHECK(gradient_relative_error(analytic.input_gradients[i], numeric) <= 1e-4);
    }
  }
}

TEST_CASE("forward build: disabled flags drop exactly their components") {
  TinySetup s = tiny_trimodal(23);
  AblationFlags all;
  ForwardBuild full =
      build_forward(s.params, s.books, s.raw, s.batch, s.timesteps, all, 1.0, 0.25, 1e-8);
  CHECK(full.components.cpc.size() == 3);
  CHECK(full.components.cmcm.size() == 3);

  AblationFlags no_cpc = all;
  no_cpc.cpc = false;
  ForwardBuild without =
      build_forward(s.params, s.books, s.raw, s.batch, s.timesteps, no_cpc, 1.0, 0.25, 1e-8);
  CHECK(without.components.cpc.empty());
  CHECK(without.components.cmcm.size() == 3);

  // The remaining terms are unchanged by the flag.
  std::vector<NodeId> full_outs{full.total};
  std::vector<NodeId> without_outs{without.total};
  const double full_total = full.graph.eval(full.total, full.inputs).scalar_value();
  const double without_total = without.graph.eval(without.total, without.inputs).scalar_value();
  double cpc_sum = 0.0;
  for (NodeId id : full.components.cpc) cpc_sum += full.graph.eval(id, full.inputs).scalar_value();
  CHECK(without_total == doctest::Approx(full_total - cpc_sum).epsilon(1e-12));
}

TEST_CASE("forward build validates pairing and temporal depth") {
  TinySetup s = tiny_trimodal(29);
  std::vector<Tensor> bad_raw = s.raw;
  bad_raw[1] = Tensor({4, 4});
  CHECK_THROWS_AS(build_forward(s.params, s.books, bad_raw, s.batch, s.timesteps, AblationFlags{},
                                1.0, 0.25, 1e-8),
                  std::invalid_argument);

  // timesteps == horizon is not enough for CPC.
  TinySetup s1 = tiny_trimodal(31);
  std::vector<Tensor> short_raw;
  for (std::size_t m = 0; m < 3; ++m)
    short_raw.push_back(Tensor({s1.batch * 1, s1.params.dims.raw[m]}));
  CHECK_THROWS_AS(build_forward(s1.params, s1.books, short_raw, s1.batch, 1, AblationFlags{}, 1.0,
                                0.25, 1e-8),
                  std::invalid_argument);
}
