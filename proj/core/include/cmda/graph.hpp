// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "cmda/tensor.hpp"

namespace cmda {

using NodeId = std::uint32_t;

/// A recorded computation: an append-only, acyclic list of primitive
/// operations over tensors. Replaying the record with identical inputs is
/// bit-identical; reverse-mode gradients of a scalar output are available
/// with respect to every differentiable input.
///
/// The op set is exactly what the model needs; this is not a general
/// autodiff engine. stop_gradient passes values forward and blocks the
/// reverse sweep.
class Graph {
 public:
  enum class Op : std::uint8_t {
    kInput,
    kConstant,
    kAdd,
    kSub,
    kMul,
    kScale,
    kAddRowVec,
    kMatMul,
    kTranspose,
    kTanh,
    kLog,
    kClampMin,
    kSoftmaxRows,
    kLogSoftmaxRows,
    kSoftplus,
    kSumAll,
    kSquaredNorm,
    kConcatRows,
    kConcatCols,
    kIndexSelect,
    kPairwiseSqDist,
    kStopGradient,
  };

  /// Declare a replay-time input. Gradients are reported per input, in
  /// declaration order; non-differentiable inputs report zeros.
  NodeId input(std::vector<std::size_t> shape, bool differentiable = true);
  NodeId constant(Tensor value);

  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId a, double s);
  /// matrix (n x d) plus a length-d vector broadcast over rows.
  NodeId add_rowvec(NodeId m, NodeId v);
  NodeId matmul(NodeId a, NodeId b);
  NodeId transpose(NodeId a);
  NodeId tanh(NodeId a);
  NodeId log(NodeId a);
  NodeId clamp_min(NodeId a, double floor);
  NodeId softmax_rows(NodeId a);
  NodeId log_softmax_rows(NodeId a);
  NodeId softplus(NodeId a);
  NodeId sum_all(NodeId a);
  NodeId squared_norm(NodeId a);
  NodeId concat_rows(NodeId a, NodeId b);
  NodeId concat_cols(NodeId a, NodeId b);
  NodeId index_select(NodeId a, std::vector<std::size_t> row_indices);
  /// (n x d, k x d) -> (n x k) of squared Euclidean distances.
  NodeId pairwise_sqdist(NodeId z, NodeId e);
  NodeId stop_gradient(NodeId a);

  std::size_t input_count() const { return input_ids_.size(); }
  bool input_differentiable(std::size_t i) const { return nodes_[input_ids_.at(i)].differentiable; }
  std::size_t node_count() const { return nodes_.size(); }
  const std::vector<std::size_t>& shape_of(NodeId id) const;

  Tensor eval(NodeId output, std::span<const Tensor> inputs) const;
  std::vector<Tensor> eval_many(std::span<const NodeId> outputs, std::span<const Tensor> inputs) const;

  struct GradientResult {
    Tensor value;
    std::vector<Tensor> input_gradients;
    std::vector<Tensor> extra_values;
  };

  /// Forward replay plus reverse sweep. `output` must be a scalar.
  GradientResult evaluate_with_gradients(NodeId output, std::span<const Tensor> inputs,
                                         std::span<const NodeId> extras = {}) const;

 private:
  struct Node {
    Op op;
    std::array<NodeId, 2> args{0, 0};
    std::uint8_t arity = 0;
    std::vector<std::size_t> shape;
    double attr = 0.0;
    bool differentiable = false;          // inputs only
    std::vector<std::size_t> indices;     // index_select only
    Tensor value;                         // constants only
  };

  NodeId push(Node node);
  const Node& node(NodeId id) const;
  void check_exists(NodeId id, const char* where) const;
  [[noreturn]] void fail(NodeId at, const std::string& msg) const;

  void forward(std::span<const Tensor> inputs, std::vector<Tensor>& values) const;

  std::vector<Node> nodes_;
  std::vector<NodeId> input_ids_;
};

}  // namespace cmda
