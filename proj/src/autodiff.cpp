#include "mgrad/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace mgrad {

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Leaf: return "leaf";
    case OpKind::Matmul: return "matmul";
    case OpKind::Transpose: return "transpose";
    case OpKind::Add: return "add";
    case OpKind::Subtract: return "subtract";
    case OpKind::Multiply: return "elementwise-multiply";
    case OpKind::ScalarMultiply: return "scalar-multiply";
    case OpKind::Scale: return "scale";
    case OpKind::Tanh: return "tanh";
    case OpKind::Relu: return "relu";
    case OpKind::MeanSquaredError: return "mean-squared-error";
    case OpKind::SoftmaxCrossEntropy: return "softmax-cross-entropy";
    case OpKind::Softmax: return "softmax";
    case OpKind::ReduceMean: return "reduce-mean";
    case OpKind::ReduceSum: return "reduce-sum";
    case OpKind::BroadcastAddBias: return "broadcast-add-bias";
    case OpKind::SumRows: return "sum-rows";
  }
  return "unknown";
}

namespace {

std::size_t arity(OpKind kind) {
  switch (kind) {
    case OpKind::Leaf: return 0;
    case OpKind::Matmul:
    case OpKind::Add:
    case OpKind::Subtract:
    case OpKind::Multiply:
    case OpKind::Scale:
    case OpKind::MeanSquaredError:
    case OpKind::SoftmaxCrossEntropy:
    case OpKind::BroadcastAddBias: return 2;
    default: return 1;
  }
}

[[noreturn]] void mismatch(OpKind kind, const Tensor& a) {
  throw ShapeError(std::string(op_name(kind)) + ": unsupported shape " + shape_string(a.shape()));
}

[[noreturn]] void mismatch(OpKind kind, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op_name(kind)) + ": shape mismatch " + shape_string(a.shape()) + " and " +
                   shape_string(b.shape()));
}

using RowMatrix = Tensor::Matrix;

RowMatrix row_softmax(const Tensor& logits) {
  RowMatrix z = logits.matrix();
  Eigen::VectorXd row_max = z.rowwise().maxCoeff();
  RowMatrix e = (z.colwise() - row_max).array().exp().matrix();
  Eigen::VectorXd total = e.rowwise().sum();
  for (Index r = 0; r < e.rows(); ++r) e.row(r) /= total[r];
  return e;
}

Index checked_label(const Tensor& labels, Index row, Index classes) {
  double v = labels[row];
  auto label = static_cast<Index>(v);
  if (static_cast<double>(label) != v || label < 0 || label >= classes) {
    throw ShapeError("softmax-cross-entropy: label " + std::to_string(v) + " at row " + std::to_string(row) +
                     " is not a class index in [0," + std::to_string(classes) + ")");
  }
  return label;
}

Tensor one_hot(const Tensor& labels, Index classes) {
  Tensor out(Shape{labels.size(), classes});
  auto m = out.matrix();
  for (Index r = 0; r < labels.size(); ++r) m(r, checked_label(labels, r, classes)) = 1.0;
  return out;
}

}  // namespace

NodeId Graph::push(OpKind kind, std::vector<NodeId> inputs, double coeff, Tensor value) {
  nodes_.push_back({kind, std::move(inputs), coeff, std::move(value)});
  return nodes_.size() - 1;
}

NodeId Graph::variable(Tensor value, std::string name) {
  NodeId id = push(OpKind::Leaf, {}, 0.0, std::move(value));
  roots_.push_back(id);
  root_names_.push_back(name.empty() ? "v" + std::to_string(id) : std::move(name));
  return id;
}

NodeId Graph::constant(Tensor value) { return push(OpKind::Leaf, {}, 0.0, std::move(value)); }

NodeId Graph::apply(OpKind kind, std::span<const NodeId> inputs, double coeff) {
  if (kind == OpKind::Leaf) throw Error("apply: leaves are created with variable() or constant()");
  if (inputs.size() != arity(kind)) {
    throw Error(std::string(op_name(kind)) + ": expected " + std::to_string(arity(kind)) + " inputs, got " +
                std::to_string(inputs.size()));
  }
  for (NodeId in : inputs) {
    if (in >= nodes_.size()) throw Error(std::string(op_name(kind)) + ": unknown input node " + std::to_string(in));
  }
  Tensor out = evaluate(kind, inputs, coeff);
  if (!recording_) return push(OpKind::Leaf, {}, 0.0, std::move(out));
  return push(kind, std::vector<NodeId>(inputs.begin(), inputs.end()), coeff, std::move(out));
}

Tensor Graph::evaluate(OpKind kind, std::span<const NodeId> inputs, double coeff) const {
  const Tensor& a = nodes_[inputs[0]].value;
  switch (kind) {
    case OpKind::Matmul: {
      const Tensor& b = nodes_[inputs[1]].value;
      if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) mismatch(kind, a, b);
      return Tensor::from_matrix(a.matrix() * b.matrix());
    }
    case OpKind::Transpose: {
      if (a.rank() != 2) mismatch(kind, a);
      return Tensor::from_matrix(a.matrix().transpose());
    }
    case OpKind::Add:
    case OpKind::Subtract:
    case OpKind::Multiply: {
      const Tensor& b = nodes_[inputs[1]].value;
      if (a.shape() != b.shape()) mismatch(kind, a, b);
      if (kind == OpKind::Add) return Tensor(a.shape(), a.values() + b.values());
      if (kind == OpKind::Subtract) return Tensor(a.shape(), a.values() - b.values());
      return Tensor(a.shape(), a.values() * b.values());
    }
    case OpKind::ScalarMultiply: return Tensor(a.shape(), coeff * a.values());
    case OpKind::Scale: {
      const Tensor& s = nodes_[inputs[1]].value;
      if (s.size() != 1) mismatch(kind, a, s);
      return Tensor(a.shape(), a.values() * s[0]);
    }
    case OpKind::Tanh: return Tensor(a.shape(), a.values().tanh());
    case OpKind::Relu: return Tensor(a.shape(), a.values().max(0.0));
    case OpKind::MeanSquaredError: {
      const Tensor& b = nodes_[inputs[1]].value;
      if (a.shape() != b.shape()) mismatch(kind, a, b);
      return Tensor::scalar((a.values() - b.values()).square().mean());
    }
    case OpKind::SoftmaxCrossEntropy: {
      const Tensor& labels = nodes_[inputs[1]].value;
      if (a.rank() != 2 || labels.rank() != 1 || labels.shape()[0] != a.shape()[0]) mismatch(kind, a, labels);
      auto z = a.matrix();
      double total = 0.0;
      for (Index r = 0; r < z.rows(); ++r) {
        double m = z.row(r).maxCoeff();
        double lse = m + std::log((z.row(r).array() - m).exp().sum());
        total += lse - z(r, checked_label(labels, r, z.cols()));
      }
      return Tensor::scalar(total / static_cast<double>(z.rows()));
    }
    case OpKind::Softmax: {
      if (a.rank() != 2) mismatch(kind, a);
      return Tensor::from_matrix(row_softmax(a));
    }
    case OpKind::ReduceMean: return Tensor::scalar(a.values().mean());
    case OpKind::ReduceSum: return Tensor::scalar(a.values().sum());
    case OpKind::BroadcastAddBias: {
      const Tensor& b = nodes_[inputs[1]].value;
      if (a.rank() != 2 || b.rank() != 1 || b.shape()[0] != a.shape()[1]) mismatch(kind, a, b);
      Tensor out(a.shape());
      out.matrix() = a.matrix().rowwise() + b.matrix().row(0);
      return out;
    }
    case OpKind::SumRows: {
      if (a.rank() != 2) mismatch(kind, a);
      Tensor out(Shape{a.shape()[1]});
      out.matrix() = a.matrix().colwise().sum();
      return out;
    }
    case OpKind::Leaf: break;
  }
  throw Error("evaluate: unhandled op");
}

void Graph::emit_vjp(NodeId node, NodeId adjoint, const std::vector<char>& needed, std::vector<NodeId>& adjoints,
                     std::vector<char>& has_adjoint) {
  // Copies: emitting nodes may reallocate nodes_.
  const OpKind kind = nodes_[node].kind;
  const std::vector<NodeId> in = nodes_[node].inputs;
  const double coeff = nodes_[node].coeff;

  auto wants = [&](std::size_t k) { return k < in.size() && needed[in[k]]; };
  auto accumulate = [&](std::size_t k, Var contribution) {
    NodeId target = in[k];
    if (has_adjoint[target]) {
      adjoints[target] = (Var(*this, adjoints[target]) + contribution).id();
    } else {
      adjoints[target] = contribution.id();
      has_adjoint[target] = 1;
    }
  };
  auto shape_of = [&](NodeId id) { return nodes_[id].value.shape(); };

  Var dC(*this, adjoint);
  switch (kind) {
    case OpKind::Matmul: {
      Var a(*this, in[0]), b(*this, in[1]);
      if (wants(0)) accumulate(0, matmul(dC, transpose(b)));
      if (wants(1)) accumulate(1, matmul(transpose(a), dC));
      break;
    }
    case OpKind::Transpose:
      if (wants(0)) accumulate(0, transpose(dC));
      break;
    case OpKind::Add:
      if (wants(0)) accumulate(0, dC);
      if (wants(1)) accumulate(1, dC);
      break;
    case OpKind::Subtract:
      if (wants(0)) accumulate(0, dC);
      if (wants(1)) accumulate(1, -1.0 * dC);
      break;
    case OpKind::Multiply: {
      Var a(*this, in[0]), b(*this, in[1]);
      if (wants(0)) accumulate(0, hadamard(dC, b));
      if (wants(1)) accumulate(1, hadamard(dC, a));
      break;
    }
    case OpKind::ScalarMultiply:
      if (wants(0)) accumulate(0, coeff * dC);
      break;
    case OpKind::Scale: {
      Var t(*this, in[0]), s(*this, in[1]);
      if (wants(0)) accumulate(0, scale(dC, s));
      if (wants(1)) accumulate(1, reduce_sum(hadamard(dC, t)));
      break;
    }
    case OpKind::Tanh: {
      if (!wants(0)) break;
      Var y(*this, node);
      Var ones(*this, constant(Tensor::constant(shape_of(node), 1.0)));
      accumulate(0, hadamard(dC, ones - hadamard(y, y)));
      break;
    }
    case OpKind::Relu: {
      if (!wants(0)) break;
      // Derivative at exactly 0 is taken as 0.
      const Tensor& x = nodes_[in[0]].value;
      Tensor mask(x.shape(), (x.values() > 0.0).cast<double>());
      accumulate(0, hadamard(dC, Var(*this, constant(std::move(mask)))));
      break;
    }
    case OpKind::MeanSquaredError: {
      if (!wants(0) && !wants(1)) break;
      Var a(*this, in[0]), b(*this, in[1]);
      const double n = static_cast<double>(nodes_[in[0]].value.size());
      Var d_pred = scale((2.0 / n) * (a - b), dC);
      if (wants(0)) accumulate(0, d_pred);
      if (wants(1)) accumulate(1, -1.0 * d_pred);
      break;
    }
    case OpKind::SoftmaxCrossEntropy: {
      if (!wants(0)) break;
      Var z(*this, in[0]);
      const Shape logits_shape = shape_of(in[0]);
      const double batch = static_cast<double>(logits_shape[0]);
      Var target(*this, constant(one_hot(nodes_[in[1]].value, logits_shape[1])));
      accumulate(0, scale((1.0 / batch) * (softmax(z) - target), dC));
      break;
    }
    case OpKind::Softmax: {
      if (!wants(0)) break;
      Var s(*this, node);
      const Index classes = shape_of(node)[1];
      Var col_ones(*this, constant(Tensor::constant(Shape{classes, 1}, 1.0)));
      Var row_ones(*this, constant(Tensor::constant(Shape{1, classes}, 1.0)));
      Var weighted = hadamard(s, dC);
      Var row_totals = matmul(matmul(weighted, col_ones), row_ones);
      accumulate(0, weighted - hadamard(s, row_totals));
      break;
    }
    case OpKind::ReduceMean: {
      if (!wants(0)) break;
      Var ones(*this, constant(Tensor::constant(shape_of(in[0]), 1.0)));
      accumulate(0, (1.0 / static_cast<double>(nodes_[in[0]].value.size())) * scale(ones, dC));
      break;
    }
    case OpKind::ReduceSum: {
      if (!wants(0)) break;
      Var ones(*this, constant(Tensor::constant(shape_of(in[0]), 1.0)));
      accumulate(0, scale(ones, dC));
      break;
    }
    case OpKind::BroadcastAddBias:
      if (wants(0)) accumulate(0, dC);
      if (wants(1)) accumulate(1, sum_rows(dC));
      break;
    case OpKind::SumRows: {
      if (!wants(0)) break;
      Var zeros(*this, constant(Tensor::zeros(shape_of(in[0]))));
      accumulate(0, add_bias(zeros, dC));
      break;
    }
    case OpKind::Leaf: break;
  }
}

std::vector<NodeId> Graph::backward(NodeId output, std::span<const NodeId> wrt, bool create_graph) {
  if (output >= nodes_.size()) throw Error("backward: unknown output node");
  if (nodes_[output].value.size() != 1) {
    throw ShapeError("backward: output must be a scalar, got shape " + shape_string(nodes_[output].value.shape()));
  }
  const std::size_t n = output + 1;

  // Nodes that depend on some wrt node...
  std::vector<char> reach(n, 0);
  NodeId first = n;
  for (NodeId w : wrt) {
    if (w < n) {
      reach[w] = 1;
      first = std::min(first, w);
    }
  }
  for (NodeId i = first; i < n; ++i) {
    if (reach[i]) continue;
    for (NodeId in : nodes_[i].inputs) {
      if (reach[in]) {
        reach[i] = 1;
        break;
      }
    }
  }
  // ...and that the output depends on.
  std::vector<char> needed(n, 0);
  needed[output] = reach[output];
  for (NodeId i = n; i-- > 0;) {
    if (!needed[i]) continue;
    for (NodeId in : nodes_[i].inputs) {
      if (reach[in]) needed[in] = 1;
    }
  }

  struct RecordingScope {
    bool& flag;
    bool saved;
    ~RecordingScope() { flag = saved; }
  } scope{recording_, recording_};
  recording_ = create_graph;
  std::vector<NodeId> adjoints(n, 0);
  std::vector<char> has_adjoint(n, 0);
  if (needed[output]) {
    adjoints[output] = constant(Tensor::constant(nodes_[output].value.shape(), 1.0));
    has_adjoint[output] = 1;
  }
  for (NodeId i = n; i-- > 0;) {
    if (needed[i] && has_adjoint[i] && nodes_[i].kind != OpKind::Leaf) {
      emit_vjp(i, adjoints[i], needed, adjoints, has_adjoint);
    }
  }

  std::vector<NodeId> result;
  result.reserve(wrt.size());
  for (NodeId w : wrt) {
    if (w < n && has_adjoint[w]) {
      result.push_back(adjoints[w]);
    } else {
      result.push_back(constant(Tensor::zeros(nodes_.at(w).value.shape())));
    }
  }
  return result;
}

namespace {

Var unary(OpKind kind, Var a, double coeff = 0.0) {
  NodeId in[] = {a.id()};
  return Var(a.graph(), a.graph().apply(kind, in, coeff));
}

Var binary(OpKind kind, Var a, Var b) {
  if (&a.graph() != &b.graph()) throw Error(std::string(op_name(kind)) + ": operands live in different graphs");
  NodeId in[] = {a.id(), b.id()};
  return Var(a.graph(), a.graph().apply(kind, in));
}

}  // namespace

Var matmul(Var a, Var b) { return binary(OpKind::Matmul, a, b); }
Var transpose(Var a) { return unary(OpKind::Transpose, a); }
Var operator+(Var a, Var b) { return binary(OpKind::Add, a, b); }
Var operator-(Var a, Var b) { return binary(OpKind::Subtract, a, b); }
Var hadamard(Var a, Var b) { return binary(OpKind::Multiply, a, b); }
Var operator*(double c, Var a) { return unary(OpKind::ScalarMultiply, a, c); }
Var scale(Var t, Var s) { return binary(OpKind::Scale, t, s); }
Var tanh(Var a) { return unary(OpKind::Tanh, a); }
Var relu(Var a) { return unary(OpKind::Relu, a); }
Var mse(Var prediction, Var target) { return binary(OpKind::MeanSquaredError, prediction, target); }
Var softmax_cross_entropy(Var logits, Var labels) { return binary(OpKind::SoftmaxCrossEntropy, logits, labels); }
Var softmax(Var logits) { return unary(OpKind::Softmax, logits); }
Var reduce_mean(Var a) { return unary(OpKind::ReduceMean, a); }
Var reduce_sum(Var a) { return unary(OpKind::ReduceSum, a); }
Var add_bias(Var x, Var bias) { return binary(OpKind::BroadcastAddBias, x, bias); }
Var sum_rows(Var x) { return unary(OpKind::SumRows, x); }

std::vector<NodeId> bind(Graph& graph, const ParamSet& params) {
  std::vector<NodeId> ids;
  ids.reserve(params.size());
  for (const auto& e : params) ids.push_back(graph.variable(e.value, e.name));
  return ids;
}

GradMap backward(Graph& graph, NodeId output, std::span<const NodeId> nodes, const std::vector<std::string>& names,
                 bool create_graph) {
  if (nodes.size() != names.size()) throw Error("backward: node/name count mismatch");
  GradMap grads;
  grads.names = names;
  std::vector<NodeId> ids = graph.backward(output, nodes, create_graph);
  for (NodeId id : ids) grads.values.push_back(graph.value(id));
  if (create_graph) grads.nodes = std::move(ids);
  return grads;
}

GradMap backward(Graph& graph, NodeId output, bool create_graph) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < graph.roots().size(); ++i) names.push_back(graph.root_name(i));
  std::vector<NodeId> roots = graph.roots();
  return backward(graph, output, roots, names, create_graph);
}

GradMap finite_diff_grad(const std::function<double(const ParamSet&)>& loss, const ParamSet& params, double h) {
  if (!(h > 0.0)) throw Error("finite_diff_grad: step must be positive");
  ParamSet probe = params;
  GradMap grads;
  Index flat = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor g(params.value(i).shape());
    for (Index k = 0; k < g.size(); ++k, ++flat) {
      const double x = params.value(i)[k];
      probe.value(i)[k] = x + h;
      const double up = loss(probe);
      probe.value(i)[k] = x - h;
      const double down = loss(probe);
      probe.value(i)[k] = x;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NonFiniteError("finite_diff_grad: non-finite loss at coordinate " + std::to_string(flat) + " (" +
                             params[i].name + "[" + std::to_string(k) + "])");
      }
      g[k] = (up - down) / (2.0 * h);
    }
    grads.names.push_back(params[i].name);
    grads.values.push_back(std::move(g));
  }
  return grads;
}

}  // namespace mgrad
