#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mgrad/params.hpp"
#include "mgrad/tensor.hpp"

namespace mgrad {

using NodeId = std::size_t;

enum class OpKind {
  Leaf,
  Matmul,
  Transpose,
  Add,
  Subtract,
  Multiply,        // elementwise
  ScalarMultiply,  // by a fixed coefficient
  Scale,           // tensor times a scalar node
  Tanh,
  Relu,
  MeanSquaredError,
  SoftmaxCrossEntropy,  // (logits [B,C], labels [B]) -> mean negative log-likelihood
  Softmax,              // row-wise
  ReduceMean,
  ReduceSum,
  BroadcastAddBias,  // [B,n] + [n]
  SumRows,           // [B,n] -> [n]
};

const char* op_name(OpKind kind);

/// Append-only tape of pure operations over Tensors.
///
/// Every node caches its output value. Inputs always reference earlier
/// nodes. Vector-Jacobian products are themselves emitted as nodes, which
/// is what makes gradient-of-gradient available: `backward(..., true)`
/// returns nodes that a later `backward` can differentiate again.
///
/// A Graph belongs to one thread; use one Graph per task.
class Graph {
 public:
  NodeId variable(Tensor value, std::string name = {});
  NodeId constant(Tensor value);

  /// Evaluates `kind` on `inputs` and appends the result. `coeff` is the
  /// multiplier of ScalarMultiply and ignored otherwise.
  NodeId apply(OpKind kind, std::span<const NodeId> inputs, double coeff = 0.0);

  const Tensor& value(NodeId id) const { return nodes_.at(id).value; }
  OpKind kind(NodeId id) const { return nodes_.at(id).kind; }
  std::size_t size() const { return nodes_.size(); }

  /// Variables registered so far, in registration order.
  const std::vector<NodeId>& roots() const { return roots_; }
  const std::string& root_name(std::size_t i) const { return root_names_.at(i); }

  /// Gradient of scalar `output` with respect to each node in `wrt`.
  ///
  /// Nodes in `wrt` that `output` does not depend on get an exact zero
  /// tensor. With `create_graph` the returned nodes are differentiable
  /// functions of the graph; otherwise they are detached constants.
  std::vector<NodeId> backward(NodeId output, std::span<const NodeId> wrt, bool create_graph);

 private:
  struct Node {
    OpKind kind;
    std::vector<NodeId> inputs;
    double coeff;
    Tensor value;
  };

  NodeId push(OpKind kind, std::vector<NodeId> inputs, double coeff, Tensor value);
  Tensor evaluate(OpKind kind, std::span<const NodeId> inputs, double coeff) const;
  void emit_vjp(NodeId node, NodeId adjoint, const std::vector<char>& needed, std::vector<NodeId>& adjoints,
                std::vector<char>& has_adjoint);

  std::vector<Node> nodes_;
  std::vector<NodeId> roots_;
  std::vector<std::string> root_names_;
  bool recording_ = true;
};

/// Handle to a graph node with expression-style free functions.
class Var {
 public:
  Var(Graph& graph, NodeId id) : graph_(&graph), id_(id) {}

  Graph& graph() const { return *graph_; }
  NodeId id() const { return id_; }
  const Tensor& value() const { return graph_->value(id_); }

 private:
  Graph* graph_;
  NodeId id_;
};

Var matmul(Var a, Var b);
Var transpose(Var a);
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var hadamard(Var a, Var b);
Var operator*(double c, Var a);
Var scale(Var t, Var s);
Var tanh(Var a);
Var relu(Var a);
Var mse(Var prediction, Var target);
Var softmax_cross_entropy(Var logits, Var labels);
Var softmax(Var logits);
Var reduce_mean(Var a);
Var reduce_sum(Var a);
Var add_bias(Var x, Var bias);
Var sum_rows(Var x);

/// Registers every entry of `params` as a graph variable named after it.
std::vector<NodeId> bind(Graph& graph, const ParamSet& params);

/// Gradient of `output` w.r.t. every graph root, keyed by root name.
GradMap backward(Graph& graph, NodeId output, bool create_graph);

/// Same, restricted to `nodes` and keyed by `names`.
GradMap backward(Graph& graph, NodeId output, std::span<const NodeId> nodes, const std::vector<std::string>& names,
                 bool create_graph);

/// Central-difference gradient (f(θ+h·e) − f(θ−h·e)) / 2h per coordinate.
GradMap finite_diff_grad(const std::function<double(const ParamSet&)>& loss, const ParamSet& params, double h);

}  // namespace mgrad
