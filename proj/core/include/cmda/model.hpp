// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cmda/graph.hpp"
#include "cmda/modality.hpp"
#include "cmda/rng.hpp"
#include "cmda/tensor.hpp"

namespace cmda {

struct ModelDims {
  std::vector<std::size_t> raw;  // per modality slot
  std::size_t embed = 16;        // D
  std::size_t hidden = 32;       // encoder/decoder hidden width, 2*D by default
};

/// Two-layer per-timestep perceptron, tanh after the first layer.
struct EncoderParams {
  Tensor w1, b1, w2, b2;
};

/// Single linear map raw -> D.
struct ProjectionParams {
  Tensor w;
};

/// Two layers mapping [multimodal code ; projection] back to raw dimension.
struct DecoderParams {
  Tensor w1, b1, w2, b2;
};

/// Causal tanh recurrence producing contexts, plus per-horizon-step score
/// projections.
struct ContextParams {
  Tensor w_in, w_rec, b;
  std::vector<Tensor> horizon;  // H matrices, D x D
};

struct ModelParams {
  Mode mode = Mode::kTrimodal;
  ModelDims dims;
  std::size_t horizon = 2;
  std::vector<EncoderParams> encoders;
  std::vector<ProjectionParams> projections;
  std::vector<DecoderParams> decoders;
  std::vector<ContextParams> contexts;

  /// Zero biases; weights uniform in +-1/sqrt(fan-in).
  static ModelParams init(Mode mode, ModelDims dims, std::size_t horizon, Rng& rng);

  std::size_t decoder_input_dim() const {
    return dims.embed * (modality_count(mode) + 1);
  }
};

struct ParamRef {
  std::string name;
  Tensor* tensor;
};

/// Every gradient-trained tensor, in a fixed order shared by the optimizer,
/// checkpoints, and hashing. Codebooks are deliberately absent.
std::vector<ParamRef> trainable_params(ModelParams& params);

std::uint64_t hash_params(const ModelParams& params);

namespace model {

// Graph-node bundles mirroring the parameter structs.
struct EncoderNodes {
  NodeId w1, b1, w2, b2;
};
struct ProjectionNodes {
  NodeId w;
};
struct DecoderNodes {
  NodeId w1, b1, w2, b2;
};
struct ContextNodes {
  NodeId w_in, w_rec, b;
  std::vector<NodeId> horizon;
};

NodeId build_encoder(Graph& g, NodeId x, const EncoderNodes& p);
NodeId build_projection(Graph& g, NodeId x, const ProjectionNodes& p);
NodeId build_decoder(Graph& g, NodeId codes, NodeId projection, const DecoderNodes& p);

/// Strictly causal contexts for a sample-major (B*T x D) latent block.
/// Returns one (B x D) node per timestep.
std::vector<NodeId> build_context_steps(Graph& g, NodeId z, std::size_t batch,
                                        std::size_t timesteps, const ContextNodes& p);

}  // namespace model

// Replay wrappers over the graph builders, for single sequences.
Tensor encode(const EncoderParams& params, const Tensor& x);
Tensor project(const ProjectionParams& params, const Tensor& x);
Tensor decode(const DecoderParams& params, const Tensor& codes, const Tensor& projection);
/// Context at 0-based timestep t; depends only on frames with index <= t.
Tensor summarize_context(const ContextParams& params, const Tensor& z, std::size_t t);

}  // namespace cmda
