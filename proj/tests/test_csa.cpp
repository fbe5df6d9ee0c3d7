// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "cmda/csa.hpp"
#include "cmda/rng.hpp"

using namespace cmda;

namespace {

std::size_t slot(ModalityId m, Mode mode) {
  const auto mods = modalities(mode);
  return static_cast<std::size_t>(std::find(mods.begin(), mods.end(), m) - mods.begin());
}

}  // namespace

TEST_CASE("anchor is the arithmetic mean") {
  std::vector<std::vector<double>> equal{{1.5, -2.0}, {1.5, -2.0}, {1.5, -2.0}};
  auto a = csa::anchor(equal);
  CHECK(a[0] == 1.5);
  CHECK(a[1] == -2.0);

  std::vector<std::vector<double>> spread{{0, 0}, {3, 0}, {6, 0}};
  auto b = csa::anchor(spread);
  CHECK(b[0] == doctest::Approx(3.0));
  CHECK(b[1] == doctest::Approx(0.0));

  std::vector<std::vector<double>> negated{{0, 0}, {-3, 0}, {-6, 0}};
  auto c = csa::anchor(negated);
  CHECK(c[0] == doctest::Approx(-3.0));

  std::vector<std::vector<double>> mismatched{{0, 0}, {1}};
  CHECK_THROWS_AS(csa::anchor(mismatched), std::invalid_argument);
}

TEST_CASE("worked cascade, text->audio->video") {
  const Mode mode = Mode::kTrimodal;
  // Slots are (audio, video, text).
  std::vector<std::vector<double>> pre(3);
  pre[slot(ModalityId::kText, mode)] = {0, 0};
  pre[slot(ModalityId::kAudio, mode)] = {3, 0};
  pre[slot(ModalityId::kVideo, mode)] = {6, 0};

  auto post = csa::cascade(pre, CascadeOrder::trimodal_default(), mode);
  CHECK(post[slot(ModalityId::kText, mode)][0] == doctest::Approx(3.0));
  CHECK(post[slot(ModalityId::kAudio, mode)][0] == doctest::Approx(4.0));
  CHECK(post[slot(ModalityId::kVideo, mode)][0] == doctest::Approx(13.0 / 3.0));
  for (const auto& v : post) CHECK(v[1] == doctest::Approx(0.0));
}

TEST_CASE("equal centroids are a fixed point, exactly") {
  std::vector<std::vector<double>> pre(3, std::vector<double>{0.7, -1.3, 2.2});
  for (const auto& order : CascadeOrder::all_orders(Mode::kTrimodal)) {
    auto post = csa::cascade(pre, order, Mode::kTrimodal);
    for (std::size_t s = 0; s < 3; ++s)
      for (std::size_t c = 0; c < 3; ++c) CHECK(post[s][c] == pre[s][c]);
  }
}

TEST_CASE("closed form for text->audio->video matches the exact coefficients") {
  const Mode mode = Mode::kTrimodal;
  auto m = csa::closed_form_matrix(CascadeOrder::trimodal_default(), mode);
  const std::size_t t = slot(ModalityId::kText, mode);
  const std::size_t a = slot(ModalityId::kAudio, mode);
  const std::size_t v = slot(ModalityId::kVideo, mode);

  CHECK(m[t][t] == Rational(1, 3));
  CHECK(m[t][a] == Rational(1, 3));
  CHECK(m[t][v] == Rational(1, 3));

  CHECK(m[a][t] == Rational(1, 9));
  CHECK(m[a][a] == Rational(4, 9));
  CHECK(m[a][v] == Rational(4, 9));

  CHECK(m[v][t] == Rational(4, 27));
  CHECK(m[v][a] == Rational(7, 27));
  CHECK(m[v][v] == Rational(16, 27));
}

TEST_CASE("closed-form rows are nonnegative and sum to one, all orders") {
  for (Mode mode : {Mode::kBimodal, Mode::kTrimodal}) {
    for (const auto& order : CascadeOrder::all_orders(mode)) {
      auto m = csa::closed_form_matrix(order, mode);
      for (const auto& row : m) {
        Rational sum(0);
        for (const auto& x : row) {
          CHECK(x.num >= 0);
          sum = sum + x;
        }
        CHECK(sum == Rational(1));
      }
    }
  }
}

TEST_CASE("self-weight of the last-ordered modality dominates its row") {
  for (Mode mode : {Mode::kBimodal, Mode::kTrimodal}) {
    for (const auto& order : CascadeOrder::all_orders(mode)) {
      auto m = csa::closed_form_matrix(order, mode);
      const std::size_t last = slot(order.order.back(), mode);
      for (std::size_t c = 0; c < m.size(); ++c) {
        if (c == last) continue;
        CHECK(m[last][c] < m[last][last]);
      }
    }
  }
}

TEST_CASE("sequential cascade equals the unrolled matrix on random triples") {
  Rng rng(17);
  const std::size_t D = 5;
  for (Mode mode : {Mode::kBimodal, Mode::kTrimodal}) {
    const std::size_t n = modality_count(mode);
    for (const auto& order : CascadeOrder::all_orders(mode)) {
      auto matrix = csa::closed_form_matrix(order, mode);
      for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::vector<double>> pre(n, std::vector<double>(D));
        for (auto& v : pre)
          for (auto& x : v) x = 3.0 * rng.normal();
        auto seq = csa::cascade(pre, order, mode);
        auto mat = csa::apply_matrix(matrix, pre);
        for (std::size_t s = 0; s < n; ++s)
          for (std::size_t c = 0; c < D; ++c)
            CHECK(std::abs(seq[s][c] - mat[s][c]) <= 1e-12);
      }
    }
  }
}

TEST_CASE("bimodal closed form: (1/2,1/2) then (1/4,3/4)") {
  auto m = csa::closed_form_matrix(CascadeOrder::parse("a->v"), Mode::kBimodal);
  const std::size_t a = 0, v = 1;  // bimodal slots
  CHECK(m[a][a] == Rational(1, 2));
  CHECK(m[a][v] == Rational(1, 2));
  CHECK(m[v][a] == Rational(1, 4));
  CHECK(m[v][v] == Rational(3, 4));
}

TEST_CASE("cascade contracts the maximum pairwise spread") {
  Rng rng(29);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::vector<double>> pre(3, std::vector<double>(4));
    for (auto& v : pre)
      for (auto& x : v) x = 5.0 * rng.normal();
    auto spread = [](const std::vector<std::vector<double>>& cs) {
      double worst = 0.0;
      for (std::size_t i = 0; i < cs.size(); ++i)
        for (std::size_t j = i + 1; j < cs.size(); ++j) {
          double d = 0.0;
          for (std::size_t c = 0; c < cs[i].size(); ++c)
            d += (cs[i][c] - cs[j][c]) * (cs[i][c] - cs[j][c]);
          worst = std::max(worst, std::sqrt(d));
        }
      return worst;
    };
    for (const auto& order : CascadeOrder::all_orders(Mode::kTrimodal)) {
      auto post = csa::cascade(pre, order, Mode::kTrimodal);
      CHECK(spread(post) <= spread(pre) + 1e-12);
    }
  }
}

TEST_CASE("invalid orders are rejected") {
  CHECK_THROWS_AS(csa::cascade(std::vector<std::vector<double>>(3, std::vector<double>{0.0}),
                               CascadeOrder::parse("a->a->v"), Mode::kTrimodal),
                  std::invalid_argument);
  CHECK_THROWS_AS(csa::cascade(std::vector<std::vector<double>>(2, std::vector<double>{0.0}),
                               CascadeOrder::parse("a->v->t"), Mode::kBimodal),
                  std::invalid_argument);
  CHECK_THROWS_AS(CascadeOrder::parse("a->x"), std::invalid_argument);
  CHECK(CascadeOrder::parse("t->a->v").to_string() == "t->a->v");
  CHECK(CascadeOrder::all_orders(Mode::kTrimodal).size() == 6);
  CHECK(CascadeOrder::all_orders(Mode::kBimodal).size() == 2);
}

TEST_CASE("cascading codebooks applies per index") {
  Rng rng(41);
  std::vector<Codebook> books;
  const auto mods = modalities(Mode::kTrimodal);
  for (std::size_t s = 0; s < 3; ++s) books.push_back(Codebook::random_init(mods[s], 4, 2, rng));
  std::vector<Codebook> copy = books;

  csa::apply_to_codebooks(books, CascadeOrder::trimodal_default(), Mode::kTrimodal);
  for (std::size_t k = 0; k < 4; ++k) {
    std::vector<std::vector<double>> pre(3);
    for (std::size_t s = 0; s < 3; ++s) {
      auto e = copy[s].entry(k);
      pre[s].assign(e.begin(), e.end());
    }
    auto post = csa::cascade(pre, CascadeOrder::trimodal_default(), Mode::kTrimodal);
    for (std::size_t s = 0; s < 3; ++s)
      for (std::size_t c = 0; c < 2; ++c)
        CHECK(books[s].entries[k * 2 + c] == doctest::Approx(post[s][c]).epsilon(1e-15));
  }
}
