// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>

#include "cmda/graph.hpp"
#include "cmda/optimizer.hpp"
#include "cmda/synthdata.hpp"

using namespace cmda;

namespace {

GeneratorConfig small_config() {
  GeneratorConfig c;
  c.samples = 64;
  c.timesteps = 6;
  c.classes = 4;
  c.signal_dims = {6, 8, 5};
  c.nuisance_dims = {2, 2, 2};
  c.noise = {0.3, 0.3, 0.3};
  c.seed = 5;
  return c;
}

}  // namespace

TEST_CASE("degenerate chain: persistence 1, no noise, no nuisance") {
  GeneratorConfig c = small_config();
  c.persistence = 1.0;
  c.noise = {0.0, 0.0, 0.0};
  c.nuisance_dims = {0, 0, 0};
  SyntheticDataset data = generate(c);

  for (std::size_t i = 0; i < c.samples; ++i) {
    for (std::size_t t = 1; t < c.timesteps; ++t) {
      CHECK(data.frame_label(i, t) == data.frame_label(i, 0));
      for (std::size_t m = 0; m < 3; ++m) {
        const std::size_t dr = c.raw_dim(m);
        for (std::size_t d = 0; d < dr; ++d)
          CHECK(data.raw[m][(i * c.timesteps + t) * dr + d] ==
                data.raw[m][(i * c.timesteps) * dr + d]);
      }
    }
    CHECK(data.global_labels[i] == data.frame_label(i, 0));
  }
}

TEST_CASE("same seed, same dataset; different seed differs") {
  GeneratorConfig c = small_config();
  SyntheticDataset a = generate(c);
  SyntheticDataset b = generate(c);
  for (std::size_t m = 0; m < 3; ++m)
    for (std::size_t i = 0; i < a.raw[m].numel(); ++i) CHECK(a.raw[m][i] == b.raw[m][i]);
  CHECK(a.frame_labels == b.frame_labels);

  c.seed = 6;
  SyntheticDataset other = generate(c);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.raw[0].numel() && !any_diff; ++i)
    any_diff = a.raw[0][i] != other.raw[0][i];
  CHECK(any_diff);
}

TEST_CASE("labels are shared across modalities by construction") {
  // One label grid serves every modality; rendering consumes it read-only.
  GeneratorConfig c = small_config();
  SyntheticDataset data = generate(c);
  CHECK(data.frame_labels.size() == c.samples * c.timesteps);
  for (auto v : data.frame_labels) CHECK(v < c.classes);
}

TEST_CASE("class-conditional means approach the class embeddings") {
  GeneratorConfig c = small_config();
  c.samples = 512;
  c.persistence = 0.5;
  SyntheticDataset data = generate(c);

  for (std::size_t m = 0; m < 3; ++m) {
    const std::size_t ds = c.signal_dims[m];
    const std::size_t dr = c.raw_dim(m);
    std::vector<std::vector<double>> mean(c.classes, std::vector<double>(ds, 0.0));
    std::vector<std::size_t> count(c.classes, 0);
    for (std::size_t row = 0; row < c.samples * c.timesteps; ++row) {
      const auto cls = data.frame_labels[row];
      count[cls] += 1;
      for (std::size_t d = 0; d < ds; ++d) mean[cls][d] += data.raw[m][row * dr + d];
    }
    for (std::size_t cls = 0; cls < c.classes; ++cls) {
      REQUIRE(count[cls] > 100);
      const double bound = 3.0 * c.noise[m] / std::sqrt(static_cast<double>(count[cls]));
      std::size_t inside = 0;
      for (std::size_t d = 0; d < ds; ++d) {
        const double got = mean[cls][d] / static_cast<double>(count[cls]);
        if (std::abs(got - data.class_embeddings[m][cls * ds + d]) <= bound) ++inside;
      }
      // 3-sigma bound per coordinate: allow a single outlier.
      CHECK(inside + 1 >= ds);
    }
  }
}

TEST_CASE("invalid generator configs name the offending field") {
  GeneratorConfig c = small_config();
  c.classes = 1;
  CHECK_THROWS_WITH_AS(generate(c), doctest::Contains("classes"), std::invalid_argument);
  c = small_config();
  c.noise[1] = -0.5;
  CHECK_THROWS_WITH_AS(generate(c), doctest::Contains("noise"), std::invalid_argument);
  c = small_config();
  c.persistence = 1.5;
  CHECK_THROWS_WITH_AS(generate(c), doctest::Contains("persistence"), std::invalid_argument);
}

TEST_CASE("split: partition laws and floor-then-distribute sizes") {
  auto s = split(100, 0.8, 0.1, 0.1, 3);
  CHECK(s.train.size() == 80);
  CHECK(s.validation.size() == 10);
  CHECK(s.test.size() == 10);

  std::set<std::size_t> seen;
  for (const auto* part : {&s.train, &s.validation, &s.test})
    for (std::size_t idx : *part) CHECK(seen.insert(idx).second);
  CHECK(seen.size() == 100);

  auto all = split(7, 1.0, 0.0, 0.0, 3);
  CHECK(all.train.size() == 7);
  CHECK(all.validation.empty());

  // Remainder goes to train, then validation, then test.
  // floor: 5, 2, 2 -> one index left over -> train takes it first.
  auto odd = split(10, 0.5, 0.25, 0.25, 9);
  CHECK(odd.train.size() == 6);
  CHECK(odd.validation.size() == 2);
  CHECK(odd.test.size() == 2);

  CHECK_THROWS_AS(split(10, 0.5, 0.25, 0.1, 1), std::invalid_argument);

  auto again = split(100, 0.8, 0.1, 0.1, 3);
  CHECK(again.train == s.train);
}

TEST_CASE("dataset binary round-trip is exact") {
  GeneratorConfig c = small_config();
  SyntheticDataset data = generate(c);
  const std::string path = (std::filesystem::temp_directory_path() / "cmda_ds_test.bin").string();
  save_dataset(data, path);
  SyntheticDataset loaded = load_dataset(path);
  std::remove(path.c_str());

  CHECK(loaded.config.samples == c.samples);
  CHECK(loaded.config.timesteps == c.timesteps);
  CHECK(loaded.config.classes == c.classes);
  CHECK(loaded.config.mode == c.mode);
  for (std::size_t m = 0; m < 3; ++m) {
    CHECK(loaded.config.raw_dim(m) == c.raw_dim(m));
    REQUIRE(loaded.raw[m].numel() == data.raw[m].numel());
    for (std::size_t i = 0; i < data.raw[m].numel(); ++i)
      CHECK(loaded.raw[m][i] == data.raw[m][i]);
  }
  CHECK(loaded.frame_labels == data.frame_labels);
  CHECK(loaded.global_labels == data.global_labels);
}

TEST_CASE("default-difficulty data is linearly separable per timestep") {
  // Calibration: a softmax probe on raw frames of a single modality reaches
  // 95% accuracy at the default noise level.
  GeneratorConfig c;  // default difficulty, smaller sample count
  c.samples = 256;
  c.timesteps = 6;
  c.seed = 12;
  SyntheticDataset data = generate(c);

  for (std::size_t m : {0ul}) {
    const std::size_t dr = c.raw_dim(m);
    const std::size_t rows = c.samples * c.timesteps;
    const std::size_t train_rows = rows * 3 / 4;

    Tensor w({dr, c.classes});
    Tensor b({c.classes});
    std::vector<ParamRef> refs{{"w", &w}, {"b", &b}};
    Adam optimizer(Adam::Config{0.05, 0.9, 0.999, 1e-8}, refs);

    Tensor x_train({train_rows, dr});
    Tensor onehot({train_rows, c.classes});
    for (std::size_t r = 0; r < train_rows; ++r) {
      for (std::size_t d = 0; d < dr; ++d) x_train.at(r, d) = data.raw[m][r * dr + d];
      onehot.at(r, data.frame_labels[r]) = 1.0;
    }
    for (int step = 0; step < 150; ++step) {
      Graph g;
      NodeId wn = g.input(w.shape());
      NodeId bn = g.input(b.shape());
      NodeId logits = g.add_rowvec(g.matmul(g.constant(x_train), wn), bn);
      NodeId loss = g.scale(g.sum_all(g.mul(g.log_softmax_rows(logits), g.constant(onehot))),
                            -1.0 / static_cast<double>(train_rows));
      std::vector<Tensor> inputs{w, b};
      auto res = g.evaluate_with_gradients(loss, inputs);
      optimizer.step(refs, res.input_gradients);
    }

    std::size_t hits = 0;
    Graph g;
    NodeId logits = g.add_rowvec(g.matmul(g.input({rows - train_rows, dr}), g.constant(w)),
                                 g.constant(b));
    Tensor x_test({rows - train_rows, dr});
    for (std::size_t r = train_rows; r < rows; ++r)
      for (std::size_t d = 0; d < dr; ++d) x_test.at(r - train_rows, d) = data.raw[m][r * dr + d];
    Tensor scores = g.eval(logits, std::vector<Tensor>{x_test});
    for (std::size_t r = 0; r < rows - train_rows; ++r) {
      std::size_t best = 0;
      for (std::size_t ccol = 1; ccol < c.classes; ++ccol)
        if (scores.at(r, ccol) > scores.at(r, best)) best = ccol;
      if (best == data.frame_labels[train_rows + r]) ++hits;
    }
    const double accuracy = static_cast<double>(hits) / static_cast<double>(rows - train_rows);
    INFO("probe accuracy ", accuracy);
    CHECK(accuracy >= 0.95);
  }
}
