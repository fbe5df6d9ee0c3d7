// SPDX-License-Identifier: Apache-2.0
#include "cmda/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cmda {

namespace {

void matmul_into(const Tensor& a, const Tensor& b, Tensor& out, bool accumulate) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  if (!accumulate) out.fill(0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t l = 0; l < k; ++l) {
      const double av = pa[i * k + l];
      if (av == 0.0) continue;
      const double* brow = pb + l * m;
      double* orow = po + i * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
}

Tensor transposed(const Tensor& a) {
  Tensor out({a.cols(), a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out.at(j, i) = a.at(i, j);
  return out;
}

}  // namespace

NodeId Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return static_cast<NodeId>(nodes_.size() - 1);
}

const Graph::Node& Graph::node(NodeId id) const { return nodes_[id]; }

void Graph::check_exists(NodeId id, const char* where) const {
  if (id >= nodes_.size())
    throw std::invalid_argument(std::string(where) + ": node " + std::to_string(id) + " does not exist");
}

void Graph::fail(NodeId at, const std::string& msg) const {
  throw std::invalid_argument(msg + " (operation index " + std::to_string(at) + ")");
}

const std::vector<std::size_t>& Graph::shape_of(NodeId id) const {
  check_exists(id, "shape_of");
  return nodes_[id].shape;
}

NodeId Graph::input(std::vector<std::size_t> shape, bool differentiable) {
  Node n;
  n.op = Op::kInput;
  n.shape = std::move(shape);
  n.differentiable = differentiable;
  NodeId id = push(std::move(n));
  input_ids_.push_back(id);
  return id;
}

NodeId Graph::constant(Tensor value) {
  Node n;
  n.op = Op::kConstant;
  n.shape = value.shape();
  n.value = std::move(value);
  return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
  check_exists(a, "add");
  check_exists(b, "add");
  if (nodes_[a].shape != nodes_[b].shape)
    fail(static_cast<NodeId>(nodes_.size()), "add: shape mismatch " + Tensor(nodes_[a].shape).shape_string() +
                                                 " vs " + Tensor(nodes_[b].shape).shape_string());
  Node n;
  n.op = Op::kAdd;
  n.args = {a, b};
  n.arity = 2;
  n.shape = nodes_[a].shape;
  return push(std::move(n));
}

NodeId Graph::sub(NodeId a, NodeId b) {
  check_exists(a, "sub");
  check_exists(b, "sub");
  if (nodes_[a].shape != nodes_[b].shape)
    fail(static_cast<NodeId>(nodes_.size()), "sub: shape mismatch");
  Node n;
  n.op = Op::kSub;
  n.args = {a, b};
  n.arity = 2;
  n.shape = nodes_[a].shape;
  return push(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
  check_exists(a, "mul");
  check_exists(b, "mul");
  if (nodes_[a].shape != nodes_[b].shape)
    fail(static_cast<NodeId>(nodes_.size()), "mul: shape mismatch");
  Node n;
  n.op = Op::kMul;
  n.args = {a, b};
  n.arity = 2;
  n.shape = nodes_[a].shape;
  return push(std::move(n));
}

NodeId Graph::scale(NodeId a, double s) {
  check_exists(a, "scale");
  Node n;
  n.op = Op::kScale;
  n.args = {a, 0};
  n.arity = 1;
  n.shape = nodes_[a].shape;
  n.attr = s;
  return push(std::move(n));
}

NodeId Graph::add_rowvec(NodeId m, NodeId v) {
  check_exists(m, "add_rowvec");
  check_exists(v, "add_rowvec");
  const auto& ms = nodes_[m].shape;
  const auto& vs = nodes_[v].shape;
  if (ms.size() != 2 || vs.size() != 1 || vs[0] != ms[1])
    fail(static_cast<NodeId>(nodes_.size()), "add_rowvec: expected (n x d) and (d)");
  Node n;
  n.op = Op::kAddRowVec;
  n.args = {m, v};
  n.arity = 2;
  n.shape = ms;
  return push(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b) {
  check_exists(a, "matmul");
  check_exists(b, "matmul");
  const auto& as = nodes_[a].shape;
  const auto& bs = nodes_[b].shape;
  if (as.size() != 2 || bs.size() != 2 || as[1] != bs[0])
    fail(static_cast<NodeId>(nodes_.size()),
         "matmul: incompatible shapes " + Tensor(as).shape_string() + " x " + Tensor(bs).shape_string());
  Node n;
  n.op = Op::kMatMul;
  n.args = {a, b};
  n.arity = 2;
  n.shape = {as[0], bs[1]};
  return push(std::move(n));
}

NodeId Graph::transpose(NodeId a) {
  check_exists(a, "transpose");
  const auto& as = nodes_[a].shape;
  if (as.size() != 2) fail(static_cast<NodeId>(nodes_.size()), "transpose: expected a matrix");
  Node n;
  n.op = Op::kTranspose;
  n.args = {a, 0};
  n.arity = 1;
  n.shape = {as[1], as[0]};
  return push(std::move(n));
}

NodeId Graph::tanh(NodeId a) {
  check_exists(a, "tanh");
  Node n;
  n.op = Op::kTanh;
  n.args = {a, 0};
  n.arity = 1;
  n.shape = nodes_[a].shape;
  return push(std::move(n));
}

NodeId Graph::log(NodeId a) {
  check_exists(a, "log");
  Node n;
  n.op = Op::kLog;
  n.args = {a, 0};
  n.arity = 1;
  n.shape = nodes_[a].shape;
  return push(std::move(n));
}

NodeId Graph::clamp_min(NodeId a, double floor) {
  check_exists(a, "clamp_min");
  Node n;
  n.op = Op::kClampMin;
  n.args = {a, 0};
  n.arity = 1;
  n.shape = nodes_[a].shape;
  n.attr = floor;
  return push(std::move(n));
}

NodeId Graph::softmax_rows(NodeId a) {
  check_exists(a, "softmax_rows");
  const auto& as = nodes_[a].shape;
  if (as.size() != 1 && as.size() != 2)
    fail(static_cast<NodeId>(nodes_.size()), "softmax_rows: expected vector or matrix");
  Node n;
  n.op = Op::kSoftmaxRows;
  n.args = {a, 0};
  n.arity = 1;
  n.shape = as;
  return push(std::move(n));
}

NodeId Graph::log_softmax_rows(NodeId a) {
  check_exists(a, "log_softmax_rows");
  const auto& as = nodes_[a].shape;
  if (as.size() != 1 && as.size() != 2)
    fail(static_cast<NodeId>(nodes_.size()), "log_softmax_rows: expected vector or matrix");
  Node n;
  n.op = Op::kLogSoftmaxRows;
  n.args = {a, 0};
  n.arity = 1;
  n.shape = as;
  return push(std::move(n));
}

NodeId Graph::softplus(NodeId a) {
  check_exists(a, "softplus");
  Node n;
  n.op = Op::kSoftplus;
  n.args = {a, 0};
  n.arity = 1;
  n.shape = nodes_[a].shape;
  return push(std::move(n));
}

NodeId Graph::sum_all(NodeId a) {
  check_exists(a, "sum_all");
  Node n;
  n.op = Op::kSumAll;
  n.args = {a, 0};
  n.arity = 1;
  n.shape = {};
  return push(std::move(n));
}

NodeId Graph::squared_norm(NodeId a) {
  check_exists(a, "squared_norm");
  Node n;
  n.op = Op::kSquaredNorm;
  n.args = {a, 0};
  n.arity = 1;
  n.shape = {};
  return push(std::move(n));
}

NodeId Graph::concat_rows(NodeId a, NodeId b) {
  check_exists(a, "concat_rows");
  check_exists(b, "concat_rows");
  const auto& as = nodes_[a].shape;
  const auto& bs = nodes_[b].shape;
  if (as.size() != 2 || bs.size() != 2 || as[1] != bs[1])
    fail(static_cast<NodeId>(nodes_.size()), "concat_rows: column counts differ");
  Node n;
  n.op = Op::kConcatRows;
  n.args = {a, b};
  n.arity = 2;
  n.shape = {as[0] + bs[0], as[1]};
  return push(std::move(n));
}

NodeId Graph::concat_cols(NodeId a, NodeId b) {
  check_exists(a, "concat_cols");
  check_exists(b, "concat_cols");
  const auto& as = nodes_[a].shape;
  const auto& bs = nodes_[b].shape;
  if (as.size() != 2 || bs.size() != 2 || as[0] != bs[0])
    fail(static_cast<NodeId>(nodes_.size()), "concat_cols: row counts differ");
  Node n;
  n.op = Op::kConcatCols;
  n.args = {a, b};
  n.arity = 2;
  n.shape = {as[0], as[1] + bs[1]};
  return push(std::move(n));
}

NodeId Graph::index_select(NodeId a, std::vector<std::size_t> row_indices) {
  check_exists(a, "index_select");
  const auto& as = nodes_[a].shape;
  if (as.size() != 2) fail(static_cast<NodeId>(nodes_.size()), "index_select: expected a matrix");
  for (std::size_t idx : row_indices)
    if (idx >= as[0])
      fail(static_cast<NodeId>(nodes_.size()),
           "index_select: row " + std::to_string(idx) + " out of range " + std::to_string(as[0]));
  Node n;
  n.op = Op::kIndexSelect;
  n.args = {a, 0};
  n.arity = 1;
  n.shape = {row_indices.size(), as[1]};
  n.indices = std::move(row_indices);
  return push(std::move(n));
}

NodeId Graph::pairwise_sqdist(NodeId z, NodeId e) {
  check_exists(z, "pairwise_sqdist");
  check_exists(e, "pairwise_sqdist");
  const auto& zs = nodes_[z].shape;
  const auto& es = nodes_[e].shape;
  if (zs.size() != 2 || es.size() != 2 || zs[1] != es[1])
    fail(static_cast<NodeId>(nodes_.size()), "pairwise_sqdist: expected (n x d) and (k x d)");
  Node n;
  n.op = Op::kPairwiseSqDist;
  n.args = {z, e};
  n.arity = 2;
  n.shape = {zs[0], es[0]};
  return push(std::move(n));
}

NodeId Graph::stop_gradient(NodeId a) {
  check_exists(a, "stop_gradient");
  Node n;
  n.op = Op::kStopGradient;
  n.args = {a, 0};
  n.arity = 1;
  n.shape = nodes_[a].shape;
  return push(std::move(n));
}

void Graph::forward(std::span<const Tensor> inputs, std::vector<Tensor>& values) const {
  if (inputs.size() != input_ids_.size())
    throw std::invalid_argument("Graph::forward: expected " + std::to_string(input_ids_.size()) +
                                " inputs, got " + std::to_string(inputs.size()));
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].shape() != nodes_[input_ids_[i]].shape)
      fail(input_ids_[i], "input " + std::to_string(i) + ": shape " + inputs[i].shape_string() +
                              " does not match declared " + Tensor(nodes_[input_ids_[i]].shape).shape_string());
  }

  values.assign(nodes_.size(), Tensor{});
  std::size_t next_input = 0;
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    const Node& n = nodes_[id];
    switch (n.op) {
      case Op::kInput:
        values[id] = inputs[next_input++];
        break;
      case Op::kConstant:
        values[id] = n.value;
        break;
      case Op::kAdd: {
        const Tensor& a = values[n.args[0]];
        const Tensor& b = values[n.args[1]];
        Tensor out = a;
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b[i];
        values[id] = std::move(out);
        break;
      }
      case Op::kSub: {
        const Tensor& a = values[n.args[0]];
        const Tensor& b = values[n.args[1]];
        Tensor out = a;
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= b[i];
        values[id] = std::move(out);
        break;
      }
      case Op::kMul: {
        const Tensor& a = values[n.args[0]];
        const Tensor& b = values[n.args[1]];
        Tensor out = a;
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= b[i];
        values[id] = std::move(out);
        break;
      }
      case Op::kScale: {
        Tensor out = values[n.args[0]];
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= n.attr;
        values[id] = std::move(out);
        break;
      }
      case Op::kAddRowVec: {
        const Tensor& m = values[n.args[0]];
        const Tensor& v = values[n.args[1]];
        Tensor out = m;
        const std::size_t d = m.cols();
        for (std::size_t r = 0; r < m.rows(); ++r)
          for (std::size_t c = 0; c < d; ++c) out[r * d + c] += v[c];
        values[id] = std::move(out);
        break;
      }
      case Op::kMatMul: {
        Tensor out(n.shape);
        matmul_into(values[n.args[0]], values[n.args[1]], out, false);
        values[id] = std::move(out);
        break;
      }
      case Op::kTranspose:
        values[id] = transposed(values[n.args[0]]);
        break;
      case Op::kTanh: {
        Tensor out = values[n.args[0]];
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(out[i]);
        values[id] = std::move(out);
        break;
      }
      case Op::kLog: {
        Tensor out = values[n.args[0]];
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::log(out[i]);
        values[id] = std::move(out);
        break;
      }
      case Op::kClampMin: {
        Tensor out = values[n.args[0]];
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::max(out[i], n.attr);
        values[id] = std::move(out);
        break;
      }
      case Op::kSoftmaxRows:
      case Op::kLogSoftmaxRows: {
        const Tensor& a = values[n.args[0]];
        const std::size_t cols = a.rank() == 2 ? a.shape()[1] : a.numel();
        const std::size_t rows = a.numel() / std::max<std::size_t>(cols, 1);
        Tensor out = a;
        for (std::size_t r = 0; r < rows; ++r) {
          double* row = out.data().data() + r * cols;
          double mx = row[0];
          for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, row[c]);
          double total = 0.0;
          for (std::size_t c = 0; c < cols; ++c) total += std::exp(row[c] - mx);
          if (n.op == Op::kSoftmaxRows) {
            for (std::size_t c = 0; c < cols; ++c) row[c] = std::exp(row[c] - mx) / total;
          } else {
            const double lse = mx + std::log(total);
            for (std::size_t c = 0; c < cols; ++c) row[c] -= lse;
          }
        }
        values[id] = std::move(out);
        break;
      }
      case Op::kSoftplus: {
        Tensor out = values[n.args[0]];
        for (std::size_t i = 0; i < out.numel(); ++i)
          out[i] = out[i] > 0.0 ? out[i] + std::log1p(std::exp(-out[i]))
                                : std::log1p(std::exp(out[i]));
        values[id] = std::move(out);
        break;
      }
      case Op::kSumAll: {
        const Tensor& a = values[n.args[0]];
        double s = 0.0;
        for (double v : a.data()) s += v;
        values[id] = Tensor::scalar(s);
        break;
      }
      case Op::kSquaredNorm: {
        const Tensor& a = values[n.args[0]];
        double s = 0.0;
        for (double v : a.data()) s += v * v;
        values[id] = Tensor::scalar(s);
        break;
      }
      case Op::kConcatRows: {
        const Tensor& a = values[n.args[0]];
        const Tensor& b = values[n.args[1]];
        Tensor out(n.shape);
        std::copy(a.data().begin(), a.data().end(), out.data().begin());
        std::copy(b.data().begin(), b.data().end(), out.data().begin() + a.numel());
        values[id] = std::move(out);
        break;
      }
      case Op::kConcatCols: {
        const Tensor& a = values[n.args[0]];
        const Tensor& b = values[n.args[1]];
        Tensor out(n.shape);
        const std::size_t da = a.cols(), db = b.cols();
        for (std::size_t r = 0; r < a.rows(); ++r) {
          std::copy_n(a.data().begin() + r * da, da, out.data().begin() + r * (da + db));
          std::copy_n(b.data().begin() + r * db, db, out.data().begin() + r * (da + db) + da);
        }
        values[id] = std::move(out);
        break;
      }
      case Op::kIndexSelect: {
        const Tensor& a = values[n.args[0]];
        const std::size_t d = a.cols();
        Tensor out(n.shape);
        for (std::size_t r = 0; r < n.indices.size(); ++r)
          std::copy_n(a.data().begin() + n.indices[r] * d, d, out.data().begin() + r * d);
        values[id] = std::move(out);
        break;
      }
      case Op::kPairwiseSqDist: {
        const Tensor& z = values[n.args[0]];
        const Tensor& e = values[n.args[1]];
        const std::size_t d = z.cols();
        Tensor out(n.shape);
        for (std::size_t i = 0; i < z.rows(); ++i) {
          const double* zi = z.data().data() + i * d;
          for (std::size_t j = 0; j < e.rows(); ++j) {
            const double* ej = e.data().data() + j * d;
            double s = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
              const double diff = zi[c] - ej[c];
              s += diff * diff;
            }
            out.at(i, j) = s;
          }
        }
        values[id] = std::move(out);
        break;
      }
      case Op::kStopGradient:
        values[id] = values[n.args[0]];
        break;
    }
  }
}

Tensor Graph::eval(NodeId output, std::span<const Tensor> inputs) const {
  check_exists(output, "eval");
  std::vector<Tensor> values;
  forward(inputs, values);
  return values[output];
}

std::vector<Tensor> Graph::eval_many(std::span<const NodeId> outputs, std::span<const Tensor> inputs) const {
  for (NodeId id : outputs) check_exists(id, "eval_many");
  std::vector<Tensor> values;
  forward(inputs, values);
  std::vector<Tensor> out;
  out.reserve(outputs.size());
  for (NodeId id : outputs) out.push_back(values[id]);
  return out;
}

Graph::GradientResult Graph::evaluate_with_gradients(NodeId output, std::span<const Tensor> inputs,
                                                     std::span<const NodeId> extras) const {
  check_exists(output, "evaluate_with_gradients");
  if (shape_numel(nodes_[output].shape) != 1)
    fail(output, "evaluate_with_gradients: output is not a scalar");

  std::vector<Tensor> values;
  forward(inputs, values);

  std::vector<Tensor> adjoints(nodes_.size());
  for (NodeId id = 0; id < nodes_.size(); ++id) adjoints[id] = Tensor(nodes_[id].shape);
  adjoints[output][0] = 1.0;

  for (NodeId id = static_cast<NodeId>(nodes_.size()); id-- > 0;) {
    const Node& n = nodes_[id];
    const Tensor& g = adjoints[id];
    switch (n.op) {
      case Op::kInput:
      case Op::kConstant:
      case Op::kStopGradient:
        break;
      case Op::kAdd: {
        Tensor& ga = adjoints[n.args[0]];
        Tensor& gb = adjoints[n.args[1]];
        for (std::size_t i = 0; i < g.numel(); ++i) {
          ga[i] += g[i];
          gb[i] += g[i];
        }
        break;
      }
      case Op::kSub: {
        Tensor& ga = adjoints[n.args[0]];
        Tensor& gb = adjoints[n.args[1]];
        for (std::size_t i = 0; i < g.numel(); ++i) {
          ga[i] += g[i];
          gb[i] -= g[i];
        }
        break;
      }
      case Op::kMul: {
        Tensor& ga = adjoints[n.args[0]];
        Tensor& gb = adjoints[n.args[1]];
        const Tensor& va = values[n.args[0]];
        const Tensor& vb = values[n.args[1]];
        for (std::size_t i = 0; i < g.numel(); ++i) {
          ga[i] += g[i] * vb[i];
          gb[i] += g[i] * va[i];
        }
        break;
      }
      case Op::kScale: {
        Tensor& ga = adjoints[n.args[0]];
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * n.attr;
        break;
      }
      case Op::kAddRowVec: {
        Tensor& gm = adjoints[n.args[0]];
        Tensor& gv = adjoints[n.args[1]];
        const std::size_t d = n.shape[1];
        for (std::size_t i = 0; i < g.numel(); ++i) gm[i] += g[i];
        for (std::size_t r = 0; r < n.shape[0]; ++r)
          for (std::size_t c = 0; c < d; ++c) gv[c] += g[r * d + c];
        break;
      }
      case Op::kMatMul: {
        const Tensor& a = values[n.args[0]];
        const Tensor& b = values[n.args[1]];
        matmul_into(g, transposed(b), adjoints[n.args[0]], true);
        matmul_into(transposed(a), g, adjoints[n.args[1]], true);
        break;
      }
      case Op::kTranspose: {
        Tensor& ga = adjoints[n.args[0]];
        const std::size_t r = n.shape[0], c = n.shape[1];
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) ga[j * r + i] += g[i * c + j];
        break;
      }
      case Op::kTanh: {
        Tensor& ga = adjoints[n.args[0]];
        const Tensor& y = values[id];
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
        break;
      }
      case Op::kLog: {
        Tensor& ga = adjoints[n.args[0]];
        const Tensor& x = values[n.args[0]];
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] / x[i];
        break;
      }
      case Op::kClampMin: {
        Tensor& ga = adjoints[n.args[0]];
        const Tensor& x = values[n.args[0]];
        for (std::size_t i = 0; i < g.numel(); ++i)
          if (x[i] > n.attr) ga[i] += g[i];
        break;
      }
      case Op::kSoftmaxRows: {
        Tensor& ga = adjoints[n.args[0]];
        const Tensor& y = values[id];
        const std::size_t cols = n.shape.size() == 2 ? n.shape[1] : y.numel();
        const std::size_t rows = y.numel() / std::max<std::size_t>(cols, 1);
        for (std::size_t r = 0; r < rows; ++r) {
          double dot = 0.0;
          for (std::size_t c = 0; c < cols; ++c) dot += g[r * cols + c] * y[r * cols + c];
          for (std::size_t c = 0; c < cols; ++c)
            ga[r * cols + c] += y[r * cols + c] * (g[r * cols + c] - dot);
        }
        break;
      }
      case Op::kLogSoftmaxRows: {
        Tensor& ga = adjoints[n.args[0]];
        const Tensor& y = values[id];
        const std::size_t cols = n.shape.size() == 2 ? n.shape[1] : y.numel();
        const std::size_t rows = y.numel() / std::max<std::size_t>(cols, 1);
        for (std::size_t r = 0; r < rows; ++r) {
          double gsum = 0.0;
          for (std::size_t c = 0; c < cols; ++c) gsum += g[r * cols + c];
          for (std::size_t c = 0; c < cols; ++c)
            ga[r * cols + c] += g[r * cols + c] - std::exp(y[r * cols + c]) * gsum;
        }
        break;
      }
      case Op::kSoftplus: {
        Tensor& ga = adjoints[n.args[0]];
        const Tensor& x = values[n.args[0]];
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] / (1.0 + std::exp(-x[i]));
        break;
      }
      case Op::kSumAll: {
        Tensor& ga = adjoints[n.args[0]];
        const double gs = g[0];
        for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += gs;
        break;
      }
      case Op::kSquaredNorm: {
        Tensor& ga = adjoints[n.args[0]];
        const Tensor& x = values[n.args[0]];
        const double gs = 2.0 * g[0];
        for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += gs * x[i];
        break;
      }
      case Op::kConcatRows: {
        Tensor& ga = adjoints[n.args[0]];
        Tensor& gb = adjoints[n.args[1]];
        for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += g[i];
        for (std::size_t i = 0; i < gb.numel(); ++i) gb[i] += g[ga.numel() + i];
        break;
      }
      case Op::kConcatCols: {
        Tensor& ga = adjoints[n.args[0]];
        Tensor& gb = adjoints[n.args[1]];
        const std::size_t da = ga.cols(), db = gb.cols();
        for (std::size_t r = 0; r < ga.rows(); ++r) {
          for (std::size_t c = 0; c < da; ++c) ga[r * da + c] += g[r * (da + db) + c];
          for (std::size_t c = 0; c < db; ++c) gb[r * db + c] += g[r * (da + db) + da + c];
        }
        break;
      }
      case Op::kIndexSelect: {
        Tensor& ga = adjoints[n.args[0]];
        const std::size_t d = n.shape[1];
        for (std::size_t r = 0; r < n.indices.size(); ++r)
          for (std::size_t c = 0; c < d; ++c) ga[n.indices[r] * d + c] += g[r * d + c];
        break;
      }
      case Op::kPairwiseSqDist: {
        Tensor& gz = adjoints[n.args[0]];
        Tensor& ge = adjoints[n.args[1]];
        const Tensor& z = values[n.args[0]];
        const Tensor& e = values[n.args[1]];
        const std::size_t nrows = z.rows(), krows = e.rows(), d = z.cols();
        for (std::size_t i = 0; i < nrows; ++i) {
          for (std::size_t j = 0; j < krows; ++j) {
            const double gij = g[i * krows + j];
            if (gij == 0.0) continue;
            for (std::size_t c = 0; c < d; ++c) {
              const double diff = 2.0 * gij * (z[i * d + c] - e[j * d + c]);
              gz[i * d + c] += diff;
              ge[j * d + c] -= diff;
            }
          }
        }
        break;
      }
    }
  }

  GradientResult result;
  result.value = values[output];
  result.input_gradients.reserve(input_ids_.size());
  for (NodeId id : input_ids_) {
    if (nodes_[id].differentiable) {
      result.input_gradients.push_back(std::move(adjoints[id]));
    } else {
      result.input_gradients.push_back(Tensor(nodes_[id].shape));
    }
  }
  result.extra_values.reserve(extras.size());
  for (NodeId id : extras) {
    check_exists(id, "evaluate_with_gradients extras");
    result.extra_values.push_back(values[id]);
  }
  return result;
}

}  // namespace cmda
