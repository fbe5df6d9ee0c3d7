// SPDX-License-Identifier: Apache-2.0
#include "cmda/model.hpp"

#include <cmath>
#include <stdexcept>

#include "cmda/hash.hpp"

namespace cmda {

namespace {

Tensor uniform_weights(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor w({rows, cols});
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  for (std::size_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-bound, bound);
  return w;
}

void check_finite_rows(const Tensor& x, const char* where) {
  if (!x.all_finite()) throw std::invalid_argument(std::string(where) + ": non-finite input");
}

}  // namespace

ModelParams ModelParams::init(Mode mode, ModelDims dims, std::size_t horizon, Rng& rng) {
  const std::size_t n = modality_count(mode);
  if (dims.raw.size() != n)
    throw std::invalid_argument("ModelParams::init: raw dims count does not match mode");
  if (dims.embed < 1 || dims.hidden < 1) throw std::invalid_argument("ModelParams::init: bad dims");
  if (horizon < 1) throw std::invalid_argument("ModelParams::init: horizon must be at least 1");

  ModelParams p;
  p.mode = mode;
  p.dims = dims;
  p.horizon = horizon;
  const std::size_t D = dims.embed;
  const std::size_t dec_in = D * (n + 1);
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t raw = dims.raw[s];
    EncoderParams enc;
    enc.w1 = uniform_weights(raw, dims.hidden, rng);
    enc.b1 = Tensor({dims.hidden});
    enc.w2 = uniform_weights(dims.hidden, D, rng);
    enc.b2 = Tensor({D});
    p.encoders.push_back(std::move(enc));

    p.projections.push_back({uniform_weights(raw, D, rng)});

    DecoderParams dec;
    dec.w1 = uniform_weights(dec_in, dims.hidden, rng);
    dec.b1 = Tensor({dims.hidden});
    dec.w2 = uniform_weights(dims.hidden, raw, rng);
    dec.b2 = Tensor({raw});
    p.decoders.push_back(std::move(dec));

    ContextParams ctx;
    ctx.w_in = uniform_weights(D, D, rng);
    ctx.w_rec = uniform_weights(D, D, rng);
    ctx.b = Tensor({D});
    for (std::size_t h = 0; h < horizon; ++h) ctx.horizon.push_back(uniform_weights(D, D, rng));
    p.contexts.push_back(std::move(ctx));
  }
  return p;
}

std::vector<ParamRef> trainable_params(ModelParams& params) {
  std::vector<ParamRef> refs;
  const auto mods = modalities(params.mode);
  for (std::size_t s = 0; s < mods.size(); ++s) {
    const std::string prefix = modality_name(mods[s]);
    auto& enc = params.encoders[s];
    refs.push_back({prefix + ".encoder.w1", &enc.w1});
    refs.push_back({prefix + ".encoder.b1", &enc.b1});
    refs.push_back({prefix + ".encoder.w2", &enc.w2});
    refs.push_back({prefix + ".encoder.b2", &enc.b2});
    refs.push_back({prefix + ".projection.w", &params.projections[s].w});
    auto& dec = params.decoders[s];
    refs.push_back({prefix + ".decoder.w1", &dec.w1});
    refs.push_back({prefix + ".decoder.b1", &dec.b1});
    refs.push_back({prefix + ".decoder.w2", &dec.w2});
    refs.push_back({prefix + ".decoder.b2", &dec.b2});
    auto& ctx = params.contexts[s];
    refs.push_back({prefix + ".context.w_in", &ctx.w_in});
    refs.push_back({prefix + ".context.w_rec", &ctx.w_rec});
    refs.push_back({prefix + ".context.b", &ctx.b});
    for (std::size_t h = 0; h < ctx.horizon.size(); ++h)
      refs.push_back({prefix + ".context.w_h" + std::to_string(h), &ctx.horizon[h]});
  }
  return refs;
}

std::uint64_t hash_params(const ModelParams& params) {
  auto& mutable_params = const_cast<ModelParams&>(params);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& ref : trainable_params(mutable_params)) h = hash_tensor(*ref.tensor, h);
  return h;
}

namespace model {

NodeId build_encoder(Graph& g, NodeId x, const EncoderNodes& p) {
  NodeId hidden = g.tanh(g.add_rowvec(g.matmul(x, p.w1), p.b1));
  return g.add_rowvec(g.matmul(hidden, p.w2), p.b2);
}

NodeId build_projection(Graph& g, NodeId x, const ProjectionNodes& p) {
  return g.matmul(x, p.w);
}

NodeId build_decoder(Graph& g, NodeId codes, NodeId projection, const DecoderNodes& p) {
  NodeId joined = g.concat_cols(codes, projection);
  NodeId hidden = g.tanh(g.add_rowvec(g.matmul(joined, p.w1), p.b1));
  return g.add_rowvec(g.matmul(hidden, p.w2), p.b2);
}

std::vector<NodeId> build_context_steps(Graph& g, NodeId z, std::size_t batch,
                                        std::size_t timesteps, const ContextNodes& p) {
  if (batch * timesteps != g.shape_of(z)[0])
    throw std::invalid_argument("build_context_steps: latent rows do not match B*T");
  std::vector<NodeId> steps;
  steps.reserve(timesteps);
  NodeId state = 0;
  for (std::size_t t = 0; t < timesteps; ++t) {
    std::vector<std::size_t> rows(batch);
    for (std::size_t i = 0; i < batch; ++i) rows[i] = i * timesteps + t;
    NodeId zt = g.index_select(z, std::move(rows));
    NodeId pre = g.add_rowvec(g.matmul(zt, p.w_in), p.b);
    if (t > 0) pre = g.add(pre, g.matmul(state, p.w_rec));
    state = g.tanh(pre);
    steps.push_back(state);
  }
  return steps;
}

}  // namespace model

Tensor encode(const EncoderParams& params, const Tensor& x) {
  check_finite_rows(x, "encode");
  if (x.rank() != 2 || x.rows() < 1 || x.cols() != params.w1.rows())
    throw std::invalid_argument("encode: expected (T x " + std::to_string(params.w1.rows()) +
                                ") input, got " + x.shape_string());
  Graph g;
  model::EncoderNodes nodes{g.constant(params.w1), g.constant(params.b1), g.constant(params.w2),
                            g.constant(params.b2)};
  NodeId out = model::build_encoder(g, g.constant(x), nodes);
  return g.eval(out, {});
}

Tensor project(const ProjectionParams& params, const Tensor& x) {
  check_finite_rows(x, "project");
  if (x.rank() != 2 || x.cols() != params.w.rows())
    throw std::invalid_argument("project: expected (T x " + std::to_string(params.w.rows()) +
                                ") input, got " + x.shape_string());
  Graph g;
  NodeId out = model::build_projection(g, g.constant(x), {g.constant(params.w)});
  return g.eval(out, {});
}

Tensor decode(const DecoderParams& params, const Tensor& codes, const Tensor& projection) {
  if (codes.rank() != 2 || projection.rank() != 2 || codes.rows() != projection.rows() ||
      codes.cols() + projection.cols() != params.w1.rows())
    throw std::invalid_argument("decode: concatenated width does not match decoder input " +
                                std::to_string(params.w1.rows()));
  Graph g;
  model::DecoderNodes nodes{g.constant(params.w1), g.constant(params.b1), g.constant(params.w2),
                            g.constant(params.b2)};
  NodeId out = model::build_decoder(g, g.constant(codes), g.constant(projection), nodes);
  return g.eval(out, {});
}

Tensor summarize_context(const ContextParams& params, const Tensor& z, std::size_t t) {
  if (z.rank() != 2) throw std::invalid_argument("summarize_context: expected (T x D)");
  if (t >= z.rows())
    throw std::invalid_argument("summarize_context: timestep " + std::to_string(t) +
                                " out of range " + std::to_string(z.rows()));
  Graph g;
  model::ContextNodes nodes{g.constant(params.w_in), g.constant(params.w_rec), g.constant(params.b), {}};
  auto steps = model::build_context_steps(g, g.constant(z), 1, z.rows(), nodes);
  Tensor row = g.eval(steps[t], {});
  return Tensor::vector(std::vector<double>(row.data().begin(), row.data().end()));
}

}  // namespace cmda
