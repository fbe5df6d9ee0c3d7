// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <vector>

#include "cmda/dta.hpp"
#include "cmda/rng.hpp"

using namespace cmda;

namespace {

Codebook make_book(std::size_t k, std::size_t d, std::vector<double> entries) {
  Codebook book;
  book.size = k;
  book.dim = d;
  book.entries = Tensor::matrix(k, d, std::move(entries));
  return book;
}

}  // namespace

TEST_CASE("accumulate: single cell sums the frame and its paired frames") {
  std::vector<Tensor> latents{Tensor::matrix(1, 2, {1, 1}), Tensor::matrix(1, 2, {2, 0}),
                              Tensor::matrix(1, 2, {0, 2})};
  AssignmentGrid grid{1, 1, {1}};
  auto acc = accumulate(latents, 0, grid, 3);
  CHECK(acc.counts == std::vector<double>{0, 1, 0});
  CHECK(acc.self_sum.at(1, 0) == 1.0);
  CHECK(acc.self_sum.at(1, 1) == 1.0);
  CHECK(acc.cross_sum.at(1, 0) == 2.0);
  CHECK(acc.cross_sum.at(1, 1) == 2.0);
  // Unassigned codewords have zero rows.
  for (std::size_t c = 0; c < 2; ++c) {
    CHECK(acc.self_sum.at(0, c) == 0.0);
    CHECK(acc.self_sum.at(2, c) == 0.0);
  }
}

TEST_CASE("accumulate: worked two-frame example") {
  // Assignments for the self modality come from the book [[0,0],[10,10]].
  Codebook book = make_book(2, 2, {0, 0, 10, 10});
  Tensor z_a = Tensor::matrix(2, 2, {1, 1, 9, 9});
  Tensor z_v = Tensor::matrix(2, 2, {2, 0, 8, 10});
  Tensor z_t = Tensor::matrix(2, 2, {0, 2, 10, 8});
  auto q = quantize_sequence(z_a, book);
  REQUIRE(q.indices == std::vector<std::uint32_t>{0, 1});

  std::vector<Tensor> latents{z_a, z_v, z_t};
  AssignmentGrid grid{1, 2, {q.indices[0], q.indices[1]}};
  auto acc = accumulate(latents, 0, grid, 2);

  CHECK(acc.counts == std::vector<double>{1, 1});
  CHECK(acc.self_sum.at(0, 0) == 1.0);
  CHECK(acc.self_sum.at(0, 1) == 1.0);
  CHECK(acc.self_sum.at(1, 0) == 9.0);
  CHECK(acc.self_sum.at(1, 1) == 9.0);
  CHECK(acc.cross_sum.at(0, 0) == 2.0);
  CHECK(acc.cross_sum.at(0, 1) == 2.0);
  CHECK(acc.cross_sum.at(1, 0) == 18.0);
  CHECK(acc.cross_sum.at(1, 1) == 18.0);
}

TEST_CASE("accumulate rejects violated pairing") {
  std::vector<Tensor> latents{Tensor({2, 2}), Tensor({3, 2})};
  AssignmentGrid grid{1, 2, {0, 0}};
  CHECK_THROWS_WITH_AS(accumulate(latents, 0, grid, 2), doctest::Contains("pairing"),
                       std::invalid_argument);
}

TEST_CASE("ema update: worked example from zero state") {
  Codebook book = make_book(2, 2, {0, 0, 10, 10});
  EmaState state = EmaState::zero_init(2, 2, 0.5, 1e-5, 0.6, 0.2);

  Accumulators acc;
  acc.self_sum = Tensor::matrix(2, 2, {1, 1, 9, 9});
  acc.cross_sum = Tensor::matrix(2, 2, {2, 2, 18, 18});
  acc.counts = {1, 1};

  ema_update(state, acc, book);
  // H(0) = 0.6*[1,1] + 0.2*[2,2] = [1,1]; S = [0.5,0.5]; C = 0.5.
  CHECK(state.feature_sums.at(0, 0) == doctest::Approx(0.5));
  CHECK(state.counts[0] == doctest::Approx(0.5));
  CHECK(book.entries.at(0, 0) == doctest::Approx(0.99998).epsilon(1e-7));
  CHECK(book.entries.at(0, 1) == doctest::Approx(0.99998).epsilon(1e-7));
  CHECK(book.entries.at(1, 0) == doctest::Approx(4.5 / 0.50001).epsilon(1e-9));
  CHECK(state.ages[0] == 0);
  CHECK(state.ages[1] == 0);
}

TEST_CASE("ema update: saturated fixed point stays within the epsilon bound") {
  const double eps = 1e-5;
  std::vector<double> u{2.0, -1.0};
  Codebook book = make_book(2, 2, {2, -1, 0, 0});
  EmaState state = EmaState::zero_init(2, 2, 0.99, eps, 0.6, 0.2);
  // Saturated statistics consistent with constant streams equal to u.
  const double count = 4.0;
  state.counts = {count, 0.0};
  for (std::size_t c = 0; c < 2; ++c) state.feature_sums[c] = u[c] * count;

  Accumulators acc;
  acc.self_sum = Tensor::matrix(2, 2, {4 * u[0], 4 * u[1], 0, 0});
  acc.cross_sum = Tensor::matrix(2, 2, {8 * u[0], 8 * u[1], 0, 0});
  acc.counts = {4, 0};

  ema_update(state, acc, book);
  const double norm_u = std::sqrt(u[0] * u[0] + u[1] * u[1]);
  const double bound = norm_u * eps / (count + eps);
  double err = 0.0;
  for (std::size_t c = 0; c < 2; ++c) err += (book.entries[c] - u[c]) * (book.entries[c] - u[c]);
  CHECK(std::sqrt(err) <= bound * 1.0001);
}

TEST_CASE("staleness counts consecutive unselected batches") {
  Codebook book = make_book(2, 1, {0, 5});
  EmaState state = EmaState::zero_init(2, 1, 0.9, 1e-5, 0.6, 0.2);
  Accumulators acc;
  acc.self_sum = Tensor::matrix(2, 1, {1, 0});
  acc.cross_sum = Tensor::matrix(2, 1, {2, 0});
  acc.counts = {1, 0};
  for (int i = 0; i < 3; ++i) ema_update(state, acc, book);
  CHECK(state.ages[0] == 0);
  CHECK(state.ages[1] == 3);
}

TEST_CASE("unselected codewords keep their entry bits") {
  Codebook book = make_book(2, 2, {1.25, -0.75, 3.5, 0.125});
  EmaState state = EmaState::zero_init(2, 2, 0.9, 1e-5, 0.6, 0.2);
  state.counts = {2.0, 1.5};
  state.feature_sums = Tensor::matrix(2, 2, {2.5, -1.5, 5.25, 0.1875});

  const double before0 = book.entries.at(1, 0), before1 = book.entries.at(1, 1);
  Accumulators acc;
  acc.self_sum = Tensor::matrix(2, 2, {1, 1, 0, 0});
  acc.cross_sum = Tensor::matrix(2, 2, {2, 2, 0, 0});
  acc.counts = {1, 0};
  ema_update(state, acc, book);

  CHECK(book.entries.at(1, 0) == before0);
  CHECK(book.entries.at(1, 1) == before1);
  // Statistics still decay.
  CHECK(state.counts[1] == doctest::Approx(0.9 * 1.5));
}

TEST_CASE("identical streams converge monotonically to the common vector") {
  Rng rng(55);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t D = 3;
    std::vector<double> u(D);
    for (auto& x : u) x = 2.0 * rng.normal();

    Codebook book = make_book(2, D, std::vector<double>(2 * D, 0.0));
    EmaState state = EmaState::zero_init(2, D, 0.9, 1e-5, 0.6, 0.2);

    Accumulators acc;
    acc.self_sum = Tensor({2, D});
    acc.cross_sum = Tensor({2, D});
    acc.counts = {3, 0};
    for (std::size_t c = 0; c < D; ++c) {
      acc.self_sum[c] = 3.0 * u[c];
      acc.cross_sum[c] = 6.0 * u[c];
    }

    double prev = 1e300;
    for (int step = 0; step < 50; ++step) {
      ema_update(state, acc, book);
      double err = 0.0;
      for (std::size_t c = 0; c < D; ++c) err += (book.entries[c] - u[c]) * (book.entries[c] - u[c]);
      err = std::sqrt(err);
      CHECK(err <= prev + 1e-15);
      prev = err;
    }
    CHECK(prev < 1e-4 * std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]) + 1e-12);
  }
}

TEST_CASE("ema update validates decay and epsilon") {
  Codebook book = make_book(2, 1, {0, 1});
  Accumulators acc;
  acc.self_sum = Tensor({2, 1});
  acc.cross_sum = Tensor({2, 1});
  acc.counts = {0, 0};

  EmaState bad_rho = EmaState::zero_init(2, 1, 1.0, 1e-5, 0.6, 0.2);
  CHECK_THROWS_AS(ema_update(bad_rho, acc, book), std::invalid_argument);
  EmaState bad_eps = EmaState::zero_init(2, 1, 0.5, 0.0, 0.6, 0.2);
  CHECK_THROWS_AS(ema_update(bad_eps, acc, book), std::invalid_argument);
}

TEST_CASE("reset: nothing stale leaves the book untouched") {
  Rng rng(7);
  Codebook book = make_book(3, 2, {0, 0, 1, 1, 2, 2});
  Tensor before = book.entries;
  EmaState state = EmaState::zero_init(3, 2, 0.9, 1e-5, 0.6, 0.2);
  state.ages = {0, 5, 10};
  state.counts = {1, 1, 1};
  auto outcome = reset_dead_codes(state, book, 300, state.counts, 0.01, rng);
  CHECK(outcome.reset_indices.empty());
  for (std::size_t i = 0; i < before.numel(); ++i) CHECK(book.entries[i] == before[i]);
}

TEST_CASE("reset: a starved codeword lands near an active one") {
  Rng rng(11);
  const double sigma = 0.05;
  Codebook book = make_book(3, 2, {0, 0, 4, 4, 9, 9});
  EmaState state = EmaState::zero_init(3, 2, 0.9, 1e-5, 0.6, 0.2);
  state.ages = {0, 0, 300};
  state.counts = {2.0, 4.0, 0.01};

  Tensor before = book.entries;
  auto outcome = reset_dead_codes(state, book, 300, state.counts, sigma, rng);
  REQUIRE(outcome.reset_indices == std::vector<std::size_t>{2});

  // Untouched rows are bit-identical.
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t c = 0; c < 2; ++c) CHECK(book.entries.at(k, c) == before.at(k, c));

  // The reset row sits within 5 sigma (per coordinate budget) of an active row.
  double best = 1e300;
  for (std::size_t k = 0; k < 2; ++k) {
    double d = 0.0;
    for (std::size_t c = 0; c < 2; ++c)
      d += (book.entries.at(2, c) - before.at(k, c)) * (book.entries.at(2, c) - before.at(k, c));
    best = std::min(best, std::sqrt(d));
  }
  CHECK(best <= 5.0 * sigma * std::sqrt(2.0));

  CHECK(state.ages[2] == 0);
  CHECK(state.counts[2] == doctest::Approx((2.0 + 4.0) / 2.0));
  for (std::size_t c = 0; c < 2; ++c)
    CHECK(state.feature_sums.at(2, c) == doctest::Approx(book.entries.at(2, c) * state.counts[2]));
}

TEST_CASE("reset: degenerate codebook is rejected") {
  Rng rng(13);
  Codebook book = make_book(2, 1, {0, 1});
  EmaState state = EmaState::zero_init(2, 1, 0.9, 1e-5, 0.6, 0.2);
  state.ages = {400, 500};
  state.counts = {0.5, 0.5};
  CHECK_THROWS_WITH_AS(reset_dead_codes(state, book, 300, state.counts, 0.01, rng),
                       doctest::Contains("degenerate"), std::invalid_argument);
  CHECK_THROWS_AS(reset_dead_codes(state, book, 0, state.counts, 0.01, rng),
                  std::invalid_argument);
}
