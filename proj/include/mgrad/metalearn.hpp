#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mgrad/autodiff.hpp"
#include "mgrad/dropgrad.hpp"
#include "mgrad/model.hpp"
#include "mgrad/tasks.hpp"

namespace mgrad {

enum class Algorithm { Maml2, Maml1, MetaSgd };

const char* algorithm_name(Algorithm algorithm);
Algorithm parse_algorithm(const std::string& text);

enum class OptimizerKind { Sgd, Adam };

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct MetaConfig {
  Algorithm algorithm = Algorithm::Maml2;
  double alpha0 = 0.01;
  double eta = 0.001;
  int n_inner = 5;
  int meta_batch = 4;
  OptimizerKind optimizer = OptimizerKind::Adam;
  AdamSettings adam;
  NoiseConfig noise;
  /// Rate of the activation-dropout baseline; 0 disables it.
  double activation_dropout = 0.0;
  /// MetaSGD only: compute the learning-rate gradient but never apply it.
  bool freeze_alpha = false;

  void validate() const;
};

/// Per-parameter inner learning rates, keyed like the ParamSet. MAML uses a
/// constant set; MetaSGD learns it.
using AlphaSet = ParamSet;

AlphaSet make_alpha(const ParamSet& params, double alpha0);

/// Builds a scalar loss from the current parameter nodes.
using LossBuilder = std::function<Var(Graph&, std::span<const NodeId>)>;

/// Support or query loss of the network on `batch`, optionally through
/// activation dropout.
LossBuilder mlp_loss(const MlpSpec& spec, const Batch& batch, const ActivationDropout* dropout = nullptr);

/// Graph-level adaptation: runs `n_inner` steps of
///   g ← ∇L^s(θ_k),  g' ← g ⊙ n,  θ_{k+1} ← θ_k − α ⊙ g'
/// starting from the nodes `theta` and returns the nodes of θ_n. With
/// `create_graph` the result is differentiable w.r.t. θ (and α, when `alpha`
/// holds variables); otherwise each g is a detached constant and θ_n
/// depends on θ only through the identity term.
///
/// `noise_rng` may be null only when the noise mode is off.
std::vector<NodeId> inner_adapt(Graph& graph, const ParamSet& layout, std::span<const NodeId> theta,
                                std::span<const NodeId> alpha, const LossBuilder& support_loss, int n_inner,
                                const NoiseConfig& noise, RngStream* noise_rng, bool create_graph);

/// Value-level adaptation of `params`; no graph survives the call.
ParamSet inner_adapt(const ParamSet& params, const AlphaSet& alpha, const MlpSpec& spec, const Batch& support,
                     int n_inner, const NoiseConfig& noise, RngStream* noise_rng);

/// Random streams one task consumes during a meta-training step.
struct TaskStreams {
  RngStream noise;
  RngStream dropout;
};

struct MetaGradient {
  GradMap theta;
  std::optional<GradMap> alpha;  // MetaSGD only
  double query_loss = 0.0;
};

/// Gradient of the post-adaptation query loss w.r.t. the initialization
/// (and, for MetaSGD, the learning rates), for arbitrary losses.
MetaGradient meta_gradient(const ParamSet& params, const AlphaSet& alpha, const LossBuilder& support_loss,
                           const LossBuilder& query_loss, const MetaConfig& config, RngStream& noise);

/// Network version: support and query losses of `task`.
MetaGradient meta_gradient(const ParamSet& params, const AlphaSet& alpha, const Task& task, const MetaConfig& config,
                           const MlpSpec& spec, TaskStreams& streams);

/// Outer-optimizer state. Moment buffers are positional over θ then α.
struct OptimizerState {
  long step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

/// One SGD or bias-corrected Adam step on `targets`, in place.
void outer_update(std::span<Tensor* const> targets, std::span<const Tensor> grads, const MetaConfig& config,
                  OptimizerState& state);

struct MetaStepResult {
  ParamSet params;
  AlphaSet alpha;
  OptimizerState state;
  double mean_query_loss = 0.0;
};

/// One outer update over a meta-batch. Task i draws noise from
/// `noise.substream("task-<i>")` and activation masks from
/// `dropout.substream("task-<i>")`; gradients are averaged in task order.
MetaStepResult meta_step(const ParamSet& params, const AlphaSet& alpha, std::span<const Task> tasks,
                         const MetaConfig& config, const MlpSpec& spec, const RngStream& noise,
                         const RngStream& dropout, const OptimizerState& state);

struct EvalResult {
  double loss = 0.0;
  std::optional<double> accuracy;
};

/// Meta-test protocol: adapt on the support set with noise and dropout
/// off, then score the query set. Query targets are only read after
/// adaptation is complete.
EvalResult meta_test_adapt(const ParamSet& params, const AlphaSet& alpha, const Task& task, const MetaConfig& config,
                           const MlpSpec& spec);

}  // namespace mgrad
