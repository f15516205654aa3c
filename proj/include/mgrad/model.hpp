#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mgrad/autodiff.hpp"
#include "mgrad/params.hpp"
#include "mgrad/rng.hpp"

namespace mgrad {

enum class Activation { Tanh, Relu };
enum class Head { Regression, Classification };

/// Fully connected network. `layer_dims` lists the input width first and
/// the output width last, so [1, 40, 40, 1] has two hidden layers.
struct MlpSpec {
  std::vector<Index> layer_dims;
  Activation activation = Activation::Tanh;
  Head head = Head::Regression;

  void validate() const;
  std::size_t n_layers() const { return layer_dims.size() - 1; }
  Index input_dim() const { return layer_dims.front(); }
  Index output_dim() const { return layer_dims.back(); }
};

/// "L0", "L1", ... for hidden layers and "OUT" for the last one.
std::string layer_label(const MlpSpec& spec, std::size_t layer);

/// Labels of every layer in forward order.
std::vector<std::string> layer_labels(const MlpSpec& spec);

/// Glorot-uniform weights, zero biases. Parameters are named
/// "<label>.w" (shape [fan_in, fan_out]) and "<label>.b" (shape [fan_out]).
ParamSet init_mlp(const MlpSpec& spec, RngStream& rng);

/// Throws unless `params` has exactly the layout init_mlp produces for `spec`.
void check_layout(const ParamSet& params, const MlpSpec& spec);

/// Inverted dropout on hidden activations. Each forward pass draws fresh
/// masks from `rng`.
struct ActivationDropout {
  double rate = 0.0;
  RngStream* rng = nullptr;
};

/// Traces the network on `x` using `params` (one node per parameter, in
/// ParamSet order). Returns the output node, shape [batch, output_dim].
Var forward(Graph& graph, std::span<const NodeId> params, const MlpSpec& spec, Var x,
            const ActivationDropout* dropout = nullptr);

/// Binds `params` as graph variables and traces the network on `x`.
NodeId forward(const ParamSet& params, const MlpSpec& spec, const Tensor& x, Graph& graph,
               std::optional<ActivationDropout> dropout = std::nullopt);

/// Untraced evaluation.
Tensor predict(const ParamSet& params, const MlpSpec& spec, const Tensor& x);

/// Mean squared error for regression, softmax cross-entropy for
/// classification (targets are class indices of shape [batch]).
Var head_loss(Var output, Var target, Head head);

/// Plain-text checkpoint: a `MGRAD1` magic line, then per parameter a
/// `name layer d0 d1 ...` line followed by one line of shortest
/// round-trip decimal values.
std::string format_checkpoint(const ParamSet& params);
ParamSet parse_checkpoint(const std::string& text);

void save_checkpoint(const ParamSet& params, const std::filesystem::path& path);
ParamSet load_checkpoint(const std::filesystem::path& path);

}  // namespace mgrad
