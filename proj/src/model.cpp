#include "mgrad/model.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mgrad {

void MlpSpec::validate() const {
  if (layer_dims.size() < 2) throw ConfigError("MlpSpec: need at least input and output widths");
  for (Index d : layer_dims) {
    if (d <= 0) throw ConfigError("MlpSpec: layer widths must be positive");
  }
}

std::string layer_label(const MlpSpec& spec, std::size_t layer) {
  return layer + 1 == spec.n_layers() ? "OUT" : "L" + std::to_string(layer);
}

std::vector<std::string> layer_labels(const MlpSpec& spec) {
  std::vector<std::string> out;
  for (std::size_t l = 0; l < spec.n_layers(); ++l) out.push_back(layer_label(spec, l));
  return out;
}

ParamSet init_mlp(const MlpSpec& spec, RngStream& rng) {
  spec.validate();
  ParamSet params;
  for (std::size_t l = 0; l < spec.n_layers(); ++l) {
    const Index fan_in = spec.layer_dims[l];
    const Index fan_out = spec.layer_dims[l + 1];
    const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor w(Shape{fan_in, fan_out});
    for (Index k = 0; k < w.size(); ++k) w[k] = rng.uniform(-s, s);
    const std::string label = layer_label(spec, l);
    params.add(label + ".w", label, std::move(w));
    params.add(label + ".b", label, Tensor::zeros(Shape{fan_out}));
  }
  return params;
}

void check_layout(const ParamSet& params, const MlpSpec& spec) {
  spec.validate();
  if (params.size() != 2 * spec.n_layers()) {
    throw ShapeError("MLP: " + std::to_string(params.size()) + " parameters for a " +
                     std::to_string(spec.n_layers()) + "-layer network");
  }
  for (std::size_t l = 0; l < spec.n_layers(); ++l) {
    const std::string label = layer_label(spec, l);
    const Shape w_shape{spec.layer_dims[l], spec.layer_dims[l + 1]};
    const Shape b_shape{spec.layer_dims[l + 1]};
    const auto& w = params[2 * l];
    const auto& b = params[2 * l + 1];
    if (w.name != label + ".w" || w.layer != label || w.value.shape() != w_shape) {
      throw ShapeError("MLP: expected " + label + ".w " + shape_string(w_shape) + ", found " + w.name + " " +
                       shape_string(w.value.shape()));
    }
    if (b.name != label + ".b" || b.layer != label || b.value.shape() != b_shape) {
      throw ShapeError("MLP: expected " + label + ".b " + shape_string(b_shape) + ", found " + b.name + " " +
                       shape_string(b.value.shape()));
    }
  }
}

Var forward(Graph& graph, std::span<const NodeId> params, const MlpSpec& spec, Var x,
            const ActivationDropout* dropout) {
  spec.validate();
  if (params.size() != 2 * spec.n_layers()) throw ShapeError("forward: parameter count does not match MlpSpec");
  const Tensor& input = x.value();
  if (input.rank() != 2 || input.shape()[1] != spec.input_dim()) {
    throw ShapeError("forward: input shape " + shape_string(input.shape()) + " does not match input width " +
                     std::to_string(spec.input_dim()));
  }
  Var h = x;
  for (std::size_t l = 0; l < spec.n_layers(); ++l) {
    h = add_bias(matmul(h, Var(graph, params[2 * l])), Var(graph, params[2 * l + 1]));
    if (l + 1 == spec.n_layers()) break;
    h = spec.activation == Activation::Tanh ? tanh(h) : relu(h);
    if (dropout && dropout->rate > 0.0) {
      const double keep = 1.0 - dropout->rate;
      Tensor mask(h.value().shape());
      for (Index k = 0; k < mask.size(); ++k) mask[k] = dropout->rng->uniform() < dropout->rate ? 0.0 : 1.0 / keep;
      h = hadamard(h, Var(graph, graph.constant(std::move(mask))));
    }
  }
  return h;
}

NodeId forward(const ParamSet& params, const MlpSpec& spec, const Tensor& x, Graph& graph,
               std::optional<ActivationDropout> dropout) {
  check_layout(params, spec);
  std::vector<NodeId> ids = bind(graph, params);
  Var in(graph, graph.constant(x));
  return forward(graph, ids, spec, in, dropout ? &*dropout : nullptr).id();
}

Tensor predict(const ParamSet& params, const MlpSpec& spec, const Tensor& x) {
  Graph graph;
  return graph.value(forward(params, spec, x, graph));
}

Var head_loss(Var output, Var target, Head head) {
  return head == Head::Regression ? mse(output, target) : softmax_cross_entropy(output, target);
}

namespace {

constexpr const char* kMagic = "MGRAD1";

void append_shortest(std::string& out, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

[[noreturn]] void malformed(std::size_t line, const std::string& what) {
  throw CheckpointError("checkpoint line " + std::to_string(line) + ": " + what);
}

}  // namespace

std::string format_checkpoint(const ParamSet& params) {
  std::string out = kMagic;
  out += '\n';
  for (const auto& e : params) {
    if (!e.value.all_finite()) throw CheckpointError("checkpoint: parameter '" + e.name + "' is not finite");
    out += e.name;
    out += ' ';
    out += e.layer;
    for (Index d : e.value.shape()) out += ' ' + std::to_string(d);
    out += '\n';
    for (Index k = 0; k < e.value.size(); ++k) {
      if (k) out += ' ';
      append_shortest(out, e.value[k]);
    }
    out += '\n';
  }
  return out;
}

ParamSet parse_checkpoint(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line) || line != kMagic) {
    throw CheckpointError("checkpoint line 1: expected magic '" + std::string(kMagic) + "'");
  }
  ParamSet params;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      malformed(line_no, "empty header line");
    }
    std::istringstream header(line);
    std::string name, layer;
    if (!(header >> name >> layer)) malformed(line_no, "expected 'name layer dims...'");
    Shape shape;
    std::string tok;
    while (header >> tok) {
      Index d = 0;
      auto res = std::from_chars(tok.data(), tok.data() + tok.size(), d);
      if (res.ec != std::errc() || res.ptr != tok.data() + tok.size() || d <= 0) {
        malformed(line_no, "bad extent '" + tok + "'");
      }
      shape.push_back(d);
    }
    const std::size_t header_line = line_no;
    if (!std::getline(in, line)) malformed(header_line + 1, "missing values for '" + name + "'");
    ++line_no;
    Tensor value(shape);
    Index k = 0;
    const char* p = line.data();
    const char* end = p + line.size();
    while (p < end) {
      if (*p == ' ') {
        ++p;
        continue;
      }
      if (k >= value.size()) malformed(line_no, "too many values for '" + name + "'");
      double v = 0.0;
      auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc()) malformed(line_no, "bad number in values of '" + name + "'");
      value[k++] = v;
      p = res.ptr;
    }
    if (k != value.size()) {
      malformed(line_no, std::to_string(k) + " values for '" + name + "' of shape " + shape_string(shape));
    }
    try {
      params.add(name, layer, std::move(value));
    } catch (const Error& err) {
      malformed(header_line, err.what());
    }
  }
  return params;
}

void save_checkpoint(const ParamSet& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("checkpoint: cannot write " + path.string());
  out << format_checkpoint(params);
  if (!out) throw CheckpointError("checkpoint: write failed for " + path.string());
}

ParamSet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint: cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str());
}

}  // namespace mgrad
