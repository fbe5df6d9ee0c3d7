// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "cmda/codebook.hpp"
#include "cmda/gradcheck.hpp"
#include "cmda/losses.hpp"
#include "cmda/rng.hpp"

using namespace cmda;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double scale = 0.5) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = scale * rng.normal();
  return t;
}

double eval_cpc(const Tensor& contexts_t0, const Tensor& futures, std::size_t B, std::size_t T) {
  Graph g;
  std::vector<NodeId> contexts;
  contexts.push_back(g.constant(contexts_t0));
  for (std::size_t t = 1; t < T; ++t) contexts.push_back(g.constant(Tensor(contexts_t0.shape())));
  Tensor ident({contexts_t0.cols(), contexts_t0.cols()});
  for (std::size_t i = 0; i < contexts_t0.cols(); ++i) ident.at(i, i) = 1.0;
  std::vector<NodeId> weights{g.constant(ident)};
  NodeId out = losses::cpc_loss(g, contexts, g.constant(futures), B, T, 1, weights);
  return g.eval(out, {}).scalar_value();
}

}  // namespace

TEST_CASE("cpc: a single candidate gives zero loss") {
  // B=1: the candidate set is exactly the positive.
  Tensor c0 = Tensor::matrix(1, 2, {1.0, 2.0});
  Tensor futures = Tensor::matrix(2, 2, {0.0, 0.0, 0.7, -0.3});
  CHECK(eval_cpc(c0, futures, 1, 2) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("cpc: equal scores give ln(candidates)") {
  Tensor c0({2, 2});  // zero contexts: every score is zero
  Rng rng(3);
  Tensor futures = random_tensor({4, 2}, rng);
  CHECK(eval_cpc(c0, futures, 2, 2) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("cpc: hand-computed softmax with scores 2 and 0") {
  // Orthogonal construction: both anchors score 2 on the positive, 0 on the
  // negative.
  Tensor c0 = Tensor::matrix(2, 2, {2, 0, 0, 2});
  Tensor futures = Tensor::matrix(4, 2, {9, 9, 1, 0, 9, 9, 0, 1});  // rows 1 and 3 are candidates
  const double expected = -std::log(std::exp(2.0) / (std::exp(2.0) + 1.0));
  CHECK(eval_cpc(c0, futures, 2, 2) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(eval_cpc(c0, futures, 2, 2) == doctest::Approx(0.126928).epsilon(1e-5));
}

TEST_CASE("cpc: loss decreases with the positive margin and stays below ln K") {
  const std::size_t B = 4;
  double prev = std::log(static_cast<double>(B));
  for (double margin : {0.5, 1.0, 2.0, 4.0}) {
    // score(i,i) = margin, score(i,j) = 0 otherwise.
    Tensor c0({B, B});
    for (std::size_t i = 0; i < B; ++i) c0.at(i, i) = margin;
    Tensor futures({2 * B, B});
    for (std::size_t i = 0; i < B; ++i) futures.at(2 * i + 1, i) = 1.0;
    const double loss = eval_cpc(c0, futures, B, 2);
    CHECK(loss < std::log(static_cast<double>(B)));
    CHECK(loss < prev);
    prev = loss;
  }
}

TEST_CASE("cpc input validation") {
  Graph g;
  std::vector<NodeId> contexts{g.constant(Tensor({1, 2}))};
  std::vector<NodeId> weights{g.constant(Tensor({2, 2}))};
  NodeId futures = g.constant(Tensor({1, 2}));
  CHECK_THROWS_AS(losses::cpc_loss(g, contexts, futures, 0, 1, 1, weights), std::invalid_argument);
  CHECK_THROWS_AS(losses::cpc_loss(g, contexts, futures, 1, 1, 1, weights), std::invalid_argument);
}

TEST_CASE("cmcm: identical distributions across the batch give ln N") {
  for (std::size_t n : {2ul, 5ul}) {
    Graph g;
    Tensor p({n, 4});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < 4; ++k) p.at(i, k) = 0.25;
    NodeId out = losses::cmcm_loss(g, g.constant(p), g.constant(p), 1e-8);
    CHECK(g.eval(out, {}).scalar_value() ==
          doctest::Approx(std::log(static_cast<double>(n))).epsilon(1e-12));
  }
}

TEST_CASE("cmcm: a single pair gives zero") {
  Graph g;
  Tensor p = Tensor::matrix(1, 3, {0.2, 0.3, 0.5});
  Tensor q = Tensor::matrix(1, 3, {0.6, 0.1, 0.3});
  NodeId out = losses::cmcm_loss(g, g.constant(p), g.constant(q), 1e-8);
  CHECK(g.eval(out, {}).scalar_value() == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("cmcm: true pairing beats shuffled pairing on average") {
  Rng rng(7);
  const std::size_t N = 6, K = 5;
  double true_total = 0.0, shuffled_total = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Tensor p({N, K});
    for (std::size_t i = 0; i < N; ++i) {
      double total = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        p.at(i, k) = std::exp(rng.normal());
        total += p.at(i, k);
      }
      for (std::size_t k = 0; k < K; ++k) p.at(i, k) /= total;
    }
    // Matched partner distributions are identical: p_b^i := p_a^i.
    Graph g;
    NodeId pa = g.constant(p);
    true_total += g.eval(losses::cmcm_loss(g, pa, pa, 1e-8), {}).scalar_value();

    std::vector<std::size_t> perm(N);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = N; i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform_index(i)]);
    Tensor shuffled({N, K});
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t k = 0; k < K; ++k) shuffled.at(i, k) = p.at(perm[i], k);
    Graph g2;
    shuffled_total +=
        g2.eval(losses::cmcm_loss(g2, g2.constant(p), g2.constant(shuffled), 1e-8), {})
            .scalar_value();
  }
  CHECK(true_total <= shuffled_total);
}

TEST_CASE("cmcm: invariant under a shared index permutation") {
  Rng rng(11);
  const std::size_t N = 4, K = 6;
  Tensor pa({N, K}), pb({N, K});
  for (Tensor* t : {&pa, &pb})
    for (std::size_t i = 0; i < N; ++i) {
      double total = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        t->at(i, k) = std::exp(rng.normal());
        total += t->at(i, k);
      }
      for (std::size_t k = 0; k < K; ++k) t->at(i, k) /= total;
    }
  Graph g;
  const double base =
      g.eval(losses::cmcm_loss(g, g.constant(pa), g.constant(pb), 1e-8), {}).scalar_value();

  std::vector<std::size_t> perm(K);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = K; i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform_index(i)]);
  Tensor qa({N, K}), qb({N, K});
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t k = 0; k < K; ++k) {
      qa.at(i, perm[k]) = pa.at(i, k);
      qb.at(i, perm[k]) = pb.at(i, k);
    }
  Graph g2;
  const double permuted =
      g2.eval(losses::cmcm_loss(g2, g2.constant(qa), g2.constant(qb), 1e-8), {}).scalar_value();
  CHECK(permuted == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("cmcm rejects an empty batch and bad floors") {
  Graph g;
  NodeId p = g.constant(Tensor({0, 3}));
  CHECK_THROWS_AS(losses::cmcm_loss(g, p, p, 1e-8), std::invalid_argument);
  NodeId q = g.constant(Tensor::matrix(1, 1, {1.0}));
  CHECK_THROWS_AS(losses::cmcm_loss(g, q, q, 0.0), std::invalid_argument);
}

TEST_CASE("commitment: zero when latents equal every same-index codeword") {
  Graph g;
  Tensor book = Tensor::matrix(2, 2, {1, 0, 0, 1});
  std::vector<NodeId> books{g.constant(book), g.constant(book), g.constant(book)};
  NodeId z = g.constant(Tensor::matrix(1, 2, {1, 0}));
  std::vector<std::uint32_t> indices{0};
  NodeId out = losses::commitment_loss(g, z, books, 0, indices, 0.25);
  CHECK(g.eval(out, {}).scalar_value() == 0.0);
}

TEST_CASE("commitment: hand-worked value and gradient") {
  Graph g;
  NodeId z = g.input({1, 2});
  NodeId own = g.constant(Tensor::matrix(1, 2, {0, 0}));
  NodeId other = g.constant(Tensor::matrix(1, 2, {1, 0}));
  std::vector<NodeId> books{own, other, other};
  std::vector<std::uint32_t> indices{0};
  NodeId out = losses::commitment_loss(g, z, books, 0, indices, 0.25);

  std::vector<Tensor> inputs{Tensor::matrix(1, 2, {1, 0})};
  auto r = g.evaluate_with_gradients(out, inputs);
  CHECK(r.value.scalar_value() == doctest::Approx(0.25));
  CHECK(r.input_gradients[0][0] == doctest::Approx(0.5));
  CHECK(r.input_gradients[0][1] == doctest::Approx(0.0));
  CHECK(check_gradients(g, out, inputs).pass);
}

TEST_CASE("commitment: codebooks sit behind stop-gradient") {
  Rng rng(13);
  Graph g;
  NodeId z = g.input({3, 2});
  NodeId book_a = g.input({4, 2});
  NodeId book_b = g.input({4, 2});
  std::vector<NodeId> books{book_a, book_b};
  std::vector<std::uint32_t> indices{0, 3, 1};
  NodeId out = losses::commitment_loss(g, z, books, 0, indices, 0.25);

  std::vector<Tensor> inputs{random_tensor({3, 2}, rng), random_tensor({4, 2}, rng),
                             random_tensor({4, 2}, rng)};
  auto r = g.evaluate_with_gradients(out, inputs);
  for (std::size_t i = 1; i <= 2; ++i)
    for (std::size_t j = 0; j < 8; ++j) CHECK(r.input_gradients[i][j] == 0.0);

  // Perturbing codebook entries still changes the value.
  std::vector<Tensor> perturbed = inputs;
  perturbed[1][0] += 0.5;
  CHECK(g.eval(out, perturbed).scalar_value() != doctest::Approx(r.value.scalar_value()));

  // Out-of-range indices are rejected.
  std::vector<std::uint32_t> bad{0, 4, 1};
  CHECK_THROWS_AS(losses::commitment_loss(g, z, books, 0, bad, 0.25), std::invalid_argument);
}

TEST_CASE("reconstruction: hand values and symmetry") {
  Graph g;
  NodeId x = g.constant(Tensor::matrix(1, 2, {1, 2}));
  NodeId y = g.constant(Tensor::matrix(1, 2, {0, 0}));
  CHECK(g.eval(losses::reconstruction_loss(g, x, y), {}).scalar_value() == doctest::Approx(5.0));
  CHECK(g.eval(losses::reconstruction_loss(g, y, x), {}).scalar_value() == doctest::Approx(5.0));
  CHECK(g.eval(losses::reconstruction_loss(g, x, x), {}).scalar_value() == 0.0);
}

TEST_CASE("total: additivity and ablation flag audit") {
  Graph g;
  losses::ComponentNodes comps;
  comps.reconstruction = {g.constant(Tensor::scalar(1.0))};
  comps.commitment = {g.constant(Tensor::scalar(2.0))};
  comps.cpc = {g.constant(Tensor::scalar(3.0))};
  comps.cmcm = {g.constant(Tensor::scalar(4.0))};

  AblationFlags all;
  CHECK(g.eval(losses::total_loss(g, comps, all), {}).scalar_value() == doctest::Approx(10.0));

  AblationFlags no_cpc = all;
  no_cpc.cpc = false;
  CHECK(g.eval(losses::total_loss(g, comps, no_cpc), {}).scalar_value() == doctest::Approx(7.0));

  AblationFlags no_dqa = all;
  no_dqa.dqa = false;
  CHECK(g.eval(losses::total_loss(g, comps, no_dqa), {}).scalar_value() == doctest::Approx(6.0));

  losses::ComponentNodes missing = comps;
  missing.cpc.clear();
  CHECK_THROWS_AS(losses::total_loss(g, missing, all), std::invalid_argument);
  CHECK(g.eval(losses::total_loss(g, missing, no_cpc), {}).scalar_value() == doctest::Approx(7.0));

  losses::ComponentNodes zeros;
  zeros.reconstruction = {g.constant(Tensor::scalar(0.0))};
  zeros.commitment = {g.constant(Tensor::scalar(0.0))};
  AblationFlags none;
  none.cpc = none.dqa = false;
  CHECK(g.eval(losses::total_loss(g, zeros, none), {}).scalar_value() == 0.0);
}

TEST_CASE("soft usage matches the sequence-level distribution") {
  Rng rng(17);
  const std::size_t T = 4, D = 3, K = 5;
  Tensor z = random_tensor({T, D}, rng, 1.0);
  Codebook book = Codebook::random_init(ModalityId::kAudio, K, D, rng);

  Graph g;
  NodeId node = losses::soft_usage(g, g.constant(z), g.constant(book.entries), 1, T, 1.0);
  Tensor graph_p = g.eval(node, {});
  Tensor direct_p = usage_distribution(z, book, 1.0);
  for (std::size_t k = 0; k < K; ++k)
    CHECK(graph_p[k] == doctest::Approx(direct_p[k]).epsilon(1e-12));
}

TEST_CASE("gradient suite passes on a reduced instance count") {
  auto result = losses::run_gradient_suite(2024, 8);
  for (const auto& op : result.ops) {
    INFO(op.op, " worst rel err ", op.worst_rel_err);
    CHECK(op.pass);
  }
  CHECK(result.pass);
  CHECK(result.ops.size() == 5);
}
