// SPDX-License-Identifier: Apache-2.0
#include "cmda/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "cmda/rng.hpp"
#include "cmda/serialize.hpp"

namespace cmda {

void GeneratorConfig::validate() const {
  const std::size_t n = modality_count(mode);
  if (samples < 1) throw std::invalid_argument("generator config: samples must be at least 1");
  if (timesteps < 1) throw std::invalid_argument("generator config: timesteps must be at least 1");
  if (classes < 2) throw std::invalid_argument("generator config: classes must be at least 2");
  if (signal_dims.size() != n)
    throw std::invalid_argument("generator config: signal_dims must have one entry per modality");
  if (nuisance_dims.size() != n)
    throw std::invalid_argument("generator config: nuisance_dims must have one entry per modality");
  if (noise.size() != n)
    throw std::invalid_argument("generator config: noise must have one entry per modality");
  for (std::size_t d : signal_dims)
    if (d < 1) throw std::invalid_argument("generator config: signal_dims entries must be at least 1");
  for (double v : noise)
    if (v < 0.0) throw std::invalid_argument("generator config: noise must be nonnegative");
  if (persistence < 0.0 || persistence > 1.0)
    throw std::invalid_argument("generator config: persistence must lie in [0, 1]");
  if (nuisance_step < 0.0)
    throw std::invalid_argument("generator config: nuisance_step must be nonnegative");
  if (instance_scale < 0.0)
    throw std::invalid_argument("generator config: instance_scale must be nonnegative");
  if (!(class_scale > 0.0))
    throw std::invalid_argument("generator config: class_scale must be positive");
}

SyntheticDataset generate(const GeneratorConfig& config) {
  config.validate();
  const std::size_t n_mod = modality_count(config.mode);
  const std::size_t N = config.samples, T = config.timesteps, C = config.classes;

  SyntheticDataset data;
  data.config = config;

  // Frozen per-modality class embeddings.
  for (std::size_t m = 0; m < n_mod; ++m) {
    Rng rng(Rng::derive(config.seed, 100 + m));
    Tensor emb({C, config.signal_dims[m]});
    for (std::size_t i = 0; i < emb.numel(); ++i) emb[i] = config.class_scale * rng.normal();
    data.class_embeddings.push_back(std::move(emb));
  }

  // Shared latent class chain, sticky with the persistence probability.
  data.frame_labels.resize(N * T);
  data.global_labels.resize(N);
  {
    Rng rng(Rng::derive(config.seed, 200));
    std::vector<std::size_t> histogram(C);
    for (std::size_t i = 0; i < N; ++i) {
      std::uint32_t state = static_cast<std::uint32_t>(rng.uniform_index(C));
      std::fill(histogram.begin(), histogram.end(), 0);
      for (std::size_t t = 0; t < T; ++t) {
        if (t > 0 && rng.uniform() >= config.persistence) {
          // Jump to a different class, uniformly.
          auto next = static_cast<std::uint32_t>(rng.uniform_index(C - 1));
          state = next >= state ? next + 1 : next;
        }
        data.frame_labels[i * T + t] = state;
        histogram[state] += 1;
      }
      std::size_t best = 0;
      for (std::size_t c = 1; c < C; ++c)
        if (histogram[c] > histogram[best]) best = c;
      data.global_labels[i] = static_cast<std::uint32_t>(best);
    }
  }

  // Shared per-sample instance vectors, constant over time.
  data.instances = Tensor({N, config.instance_dims});
  if (config.instance_dims > 0) {
    Rng rng(Rng::derive(config.seed, 500));
    for (std::size_t i = 0; i < data.instances.numel(); ++i) data.instances[i] = rng.normal();
  }
  const Tensor& instances = data.instances;

  // Render each modality: class embedding + instance render + private
  // random walk + noise.
  for (std::size_t m = 0; m < n_mod; ++m) {
    Rng walk_rng(Rng::derive(config.seed, 300 + m));
    Rng noise_rng(Rng::derive(config.seed, 400 + m));
    const std::size_t ds = config.signal_dims[m];
    const std::size_t dn = config.nuisance_dims[m];
    const std::size_t du = config.instance_dims;
    const std::size_t dr = ds + dn;

    // Frozen instance renderer; unit per-dim output variance at scale 1.
    Tensor render({du, ds});
    if (du > 0) {
      Rng render_rng(Rng::derive(config.seed, 600 + m));
      const double sd =
          config.instance_scale * config.class_scale / std::sqrt(static_cast<double>(du));
      for (std::size_t i = 0; i < render.numel(); ++i) render[i] = sd * render_rng.normal();
    }

    Tensor x({N * T, dr});
    std::vector<double> walk(dn);
    for (std::size_t i = 0; i < N; ++i) {
      std::fill(walk.begin(), walk.end(), 0.0);
      for (std::size_t t = 0; t < T; ++t) {
        const std::size_t row = i * T + t;
        const std::uint32_t cls = data.frame_labels[row];
        for (std::size_t c = 0; c < ds; ++c) {
          double v = data.class_embeddings[m][cls * ds + c] + config.noise[m] * noise_rng.normal();
          for (std::size_t u = 0; u < du; ++u)
            v += instances[i * du + u] * render[u * ds + c];
          x[row * dr + c] = v;
        }
        for (std::size_t c = 0; c < dn; ++c) {
          walk[c] += config.nuisance_step * walk_rng.normal();
          x[row * dr + ds + c] = walk[c] + config.noise[m] * noise_rng.normal();
        }
      }
    }
    data.raw.push_back(std::move(x));
    data.instance_renderers.push_back(std::move(render));
  }
  return data;
}

SplitIndices split(std::size_t n, double train_frac, double validation_frac, double test_frac,
                   std::uint64_t seed) {
  if (!(train_frac >= 0.0 && validation_frac >= 0.0 && test_frac >= 0.0))
    throw std::invalid_argument("split: fractions must be nonnegative");
  const double total = train_frac + validation_frac + test_frac;
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("split: fractions must sum to 1");

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);

  std::size_t sizes[3] = {static_cast<std::size_t>(std::floor(train_frac * n)),
                          static_cast<std::size_t>(std::floor(validation_frac * n)),
                          static_cast<std::size_t>(std::floor(test_frac * n))};
  std::size_t assigned = sizes[0] + sizes[1] + sizes[2];
  for (std::size_t s = 0; assigned < n; s = (s + 1) % 3) {
    sizes[s] += 1;
    assigned += 1;
  }

  SplitIndices out;
  auto it = order.begin();
  out.train.assign(it, it + sizes[0]);
  it += sizes[0];
  out.validation.assign(it, it + sizes[1]);
  it += sizes[1];
  out.test.assign(it, it + sizes[2]);
  return out;
}

void save_dataset(const SyntheticDataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_dataset: cannot open " + path);
  const std::size_t n_mod = modality_count(data.config.mode);
  io::write_magic(out, "CDR1");
  io::write_i64(out, static_cast<std::int64_t>(n_mod));
  io::write_i64(out, static_cast<std::int64_t>(data.config.samples));
  io::write_i64(out, static_cast<std::int64_t>(data.config.timesteps));
  io::write_i64(out, static_cast<std::int64_t>(data.config.classes));
  for (std::size_t m = 0; m < n_mod; ++m) {
    io::write_i64(out, static_cast<std::int64_t>(data.config.signal_dims[m]));
    io::write_i64(out, static_cast<std::int64_t>(data.config.nuisance_dims[m]));
  }
  io::write_i64(out, static_cast<std::int64_t>(data.config.seed));
  for (std::size_t m = 0; m < n_mod; ++m)
    for (double v : data.raw[m].data()) io::write_f64(out, v);
  for (std::uint32_t v : data.frame_labels) io::write_u32(out, v);
  for (std::uint32_t v : data.global_labels) io::write_u32(out, v);
  if (!out) throw std::runtime_error("save_dataset: write failed for " + path);
}

SyntheticDataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_dataset: cannot open " + path);
  io::expect_magic(in, "CDR1", "load_dataset");

  SyntheticDataset data;
  const auto n_mod = static_cast<std::size_t>(io::read_i64(in));
  if (n_mod != 2 && n_mod != 3) throw std::runtime_error("load_dataset: bad modality count");
  data.config.mode = n_mod == 2 ? Mode::kBimodal : Mode::kTrimodal;
  data.config.samples = static_cast<std::size_t>(io::read_i64(in));
  data.config.timesteps = static_cast<std::size_t>(io::read_i64(in));
  data.config.classes = static_cast<std::size_t>(io::read_i64(in));
  data.config.signal_dims.clear();
  data.config.nuisance_dims.clear();
  data.config.noise.assign(n_mod, 0.0);
  for (std::size_t m = 0; m < n_mod; ++m) {
    data.config.signal_dims.push_back(static_cast<std::size_t>(io::read_i64(in)));
    data.config.nuisance_dims.push_back(static_cast<std::size_t>(io::read_i64(in)));
  }
  data.config.seed = static_cast<std::uint64_t>(io::read_i64(in));

  const std::size_t rows = data.config.samples * data.config.timesteps;
  for (std::size_t m = 0; m < n_mod; ++m) {
    Tensor x({rows, data.config.raw_dim(m)});
    for (std::size_t i = 0; i < x.numel(); ++i) x[i] = io::read_f64(in);
    data.raw.push_back(std::move(x));
  }
  data.frame_labels.resize(rows);
  for (auto& v : data.frame_labels) v = io::read_u32(in);
  data.global_labels.resize(data.config.samples);
  for (auto& v : data.global_labels) v = io::read_u32(in);
  return data;
}

void export_dataset_csv(const SyntheticDataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("export_dataset_csv: cannot open " + path);
  const std::size_t n_mod = modality_count(data.config.mode);
  const auto mods = modalities(data.config.mode);
  out << "sample,timestep,frame_label,global_label";
  for (std::size_t m = 0; m < n_mod; ++m)
    for (std::size_t c = 0; c < data.config.raw_dim(m); ++c)
      out << ',' << modality_name(mods[m]) << '_' << c;
  out << '\n';
  for (std::size_t i = 0; i < data.config.samples; ++i) {
    for (std::size_t t = 0; t < data.config.timesteps; ++t) {
      const std::size_t row = i * data.config.timesteps + t;
      out << i << ',' << t << ',' << data.frame_labels[row] << ',' << data.global_labels[i];
      for (std::size_t m = 0; m < n_mod; ++m) {
        const std::size_t dr = data.config.raw_dim(m);
        for (std::size_t c = 0; c < dr; ++c) out << ',' << data.raw[m][row * dr + c];
      }
      out << '\n';
    }
  }
}

}  // namespace cmda
