// SPDX-License-Identifier: Apache-2.0
#include "cmda/checkpoint.hpp"

#include <fstream>

#include "cmda/hash.hpp"
#include "cmda/serialize.hpp"

namespace cmda {

namespace {
constexpr std::uint64_t kVersion = 1;
}

std::uint64_t Checkpoint::codebook_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& book : books) h = hash_tensor(book.entries, h);
  return h;
}

void Checkpoint::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("Checkpoint::save: cannot open " + path);
  io::write_magic(out, "CDRC");
  io::write_u64(out, kVersion);

  io::write_string(out, train_config_to_text(config));
  io::write_u64(out, step);
  io::write_u64(out, config_hash);

  // Model parameters, fixed registry order.
  auto& mutable_params = const_cast<ModelParams&>(params);
  const auto refs = trainable_params(mutable_params);
  io::write_u64(out, refs.size());
  for (const auto& ref : refs) {
    io::write_string(out, ref.name);
    io::write_tensor(out, *ref.tensor);
  }
  io::write_u64(out, params.dims.raw.size());
  for (std::size_t d : params.dims.raw) io::write_u64(out, d);
  io::write_u64(out, params.dims.embed);
  io::write_u64(out, params.dims.hidden);
  io::write_u64(out, params.horizon);

  io::write_u64(out, books.size());
  for (const auto& book : books) {
    io::write_u64(out, static_cast<std::uint64_t>(book.modality));
    io::write_u64(out, book.size);
    io::write_u64(out, book.dim);
    io::write_tensor(out, book.entries);
  }

  io::write_u64(out, ema.size());
  for (const auto& state : ema) {
    io::write_tensor(out, state.feature_sums);
    io::write_u64(out, state.counts.size());
    for (double c : state.counts) io::write_f64(out, c);
    for (std::uint64_t a : state.ages) io::write_u64(out, a);
    io::write_f64(out, state.decay);
    io::write_f64(out, state.epsilon);
    io::write_f64(out, state.lambda_self);
    io::write_f64(out, state.lambda_cross);
  }

  io::write_u64(out, adam_m.size());
  for (const auto& t : adam_m) io::write_tensor(out, t);
  for (const auto& t : adam_v) io::write_tensor(out, t);
  io::write_u64(out, adam_steps);
  if (!out) throw std::runtime_error("Checkpoint::save: write failed for " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("Checkpoint::load: cannot open " + path);
  io::expect_magic(in, "CDRC", "Checkpoint::load");
  const std::uint64_t version = io::read_u64(in);
  if (version != kVersion)
    throw std::runtime_error("Checkpoint::load: unsupported version " + std::to_string(version));

  Checkpoint cp;
  cp.config = train_config_from(KeyValueConfig::parse_string(io::read_string(in)));
  cp.step = io::read_u64(in);
  cp.config_hash = io::read_u64(in);

  const std::uint64_t n_refs = io::read_u64(in);
  std::vector<std::pair<std::string, Tensor>> blobs;
  blobs.reserve(n_refs);
  for (std::uint64_t i = 0; i < n_refs; ++i) {
    std::string name = io::read_string(in);
    blobs.emplace_back(std::move(name), io::read_tensor(in));
  }
  ModelDims dims;
  const std::uint64_t n_raw = io::read_u64(in);
  for (std::uint64_t i = 0; i < n_raw; ++i) dims.raw.push_back(io::read_u64(in));
  dims.embed = io::read_u64(in);
  dims.hidden = io::read_u64(in);
  const std::uint64_t horizon = io::read_u64(in);

  // Rebuild the parameter block and fill it from the named blobs.
  Rng scratch(0);
  cp.params = ModelParams::init(cp.config.mode, dims, horizon, scratch);
  auto refs = trainable_params(cp.params);
  if (refs.size() != blobs.size())
    throw std::runtime_error("Checkpoint::load: parameter count mismatch");
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (refs[i].name != blobs[i].first)
      throw std::runtime_error("Checkpoint::load: parameter order mismatch at " + blobs[i].first);
    *refs[i].tensor = std::move(blobs[i].second);
  }

  const std::uint64_t n_books = io::read_u64(in);
  for (std::uint64_t i = 0; i < n_books; ++i) {
    Codebook book;
    book.modality = static_cast<ModalityId>(io::read_u64(in));
    book.size = io::read_u64(in);
    book.dim = io::read_u64(in);
    book.entries = io::read_tensor(in);
    cp.books.push_back(std::move(book));
  }

  const std::uint64_t n_ema = io::read_u64(in);
  for (std::uint64_t i = 0; i < n_ema; ++i) {
    EmaState state;
    state.feature_sums = io::read_tensor(in);
    const std::uint64_t k = io::read_u64(in);
    state.counts.resize(k);
    for (auto& c : state.counts) c = io::read_f64(in);
    state.ages.resize(k);
    for (auto& a : state.ages) a = io::read_u64(in);
    state.decay = io::read_f64(in);
    state.epsilon = io::read_f64(in);
    state.lambda_self = io::read_f64(in);
    state.lambda_cross = io::read_f64(in);
    cp.ema.push_back(std::move(state));
  }

  const std::uint64_t n_moments = io::read_u64(in);
  cp.adam_m.reserve(n_moments);
  cp.adam_v.reserve(n_moments);
  for (std::uint64_t i = 0; i < n_moments; ++i) cp.adam_m.push_back(io::read_tensor(in));
  for (std::uint64_t i = 0; i < n_moments; ++i) cp.adam_v.push_back(io::read_tensor(in));
  cp.adam_steps = io::read_u64(in);
  return cp;
}

}  // namespace cmda
