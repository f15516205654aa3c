#include "mgrad/metalearn.hpp"

#include <cmath>

namespace mgrad {

const char* algorithm_name(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::Maml2: return "maml2";
    case Algorithm::Maml1: return "maml1";
    case Algorithm::MetaSgd: return "metasgd";
  }
  return "maml2";
}

Algorithm parse_algorithm(const std::string& text) {
  if (text == "maml2") return Algorithm::Maml2;
  if (text == "maml1") return Algorithm::Maml1;
  if (text == "metasgd") return Algorithm::MetaSgd;
  throw ConfigError("unknown algorithm '" + text + "' (expected maml2, maml1 or metasgd)");
}

void MetaConfig::validate() const {
  if (!(alpha0 > 0.0)) throw ConfigError("alpha0 must be positive");
  if (!(eta > 0.0)) throw ConfigError("eta must be positive");
  if (n_inner < 1) throw ConfigError("n_inner must be at least 1");
  if (meta_batch < 1) throw ConfigError("meta_batch must be at least 1");
  if (!(activation_dropout >= 0.0 && activation_dropout < 1.0)) {
    throw ConfigError("activation_dropout must be in [0,1)");
  }
  if (optimizer == OptimizerKind::Adam) {
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) || !(adam.eps > 0.0)) {
      throw ConfigError("adam: betas must lie in [0,1) and eps must be positive");
    }
  }
  noise.validate();
}

AlphaSet make_alpha(const ParamSet& params, double alpha0) {
  AlphaSet alpha;
  for (const auto& e : params) alpha.add(e.name, e.layer, Tensor::constant(e.value.shape(), alpha0));
  return alpha;
}

LossBuilder mlp_loss(const MlpSpec& spec, const Batch& batch, const ActivationDropout* dropout) {
  return [&spec, &batch, dropout](Graph& graph, std::span<const NodeId> params) {
    Var x(graph, graph.constant(batch.x));
    Var y(graph, graph.constant(batch.y));
    return head_loss(forward(graph, params, spec, x, dropout), y, spec.head);
  };
}

std::vector<NodeId> inner_adapt(Graph& graph, const ParamSet& layout, std::span<const NodeId> theta,
                                std::span<const NodeId> alpha, const LossBuilder& support_loss, int n_inner,
                                const NoiseConfig& noise, RngStream* noise_rng, bool create_graph) {
  if (theta.size() != layout.size() || alpha.size() != layout.size()) {
    throw Error("inner_adapt: parameter/learning-rate node count does not match layout");
  }
  if (n_inner < 1) throw ConfigError("inner_adapt: n_inner must be at least 1");
  noise.validate();
  if (noise.active() && !noise_rng) throw Error("inner_adapt: noise enabled without a random stream");

  std::vector<NodeId> current(theta.begin(), theta.end());
  std::vector<std::optional<Tensor>> masks;
  if (!noise.resample_per_step && noise.active()) masks = sample_masks(layout, noise, *noise_rng);

  for (int step = 0; step < n_inner; ++step) {
    Var loss = support_loss(graph, current);
    if (!std::isfinite(loss.value().item())) {
      throw NonFiniteError("inner_adapt: non-finite support loss at step " + std::to_string(step));
    }
    std::vector<NodeId> grads = graph.backward(loss.id(), current, create_graph);
    if (noise.resample_per_step && noise.active()) masks = sample_masks(layout, noise, *noise_rng);
    for (std::size_t i = 0; i < current.size(); ++i) {
      Var g(graph, grads[i]);
      if (!masks.empty() && masks[i]) g = hadamard(g, Var(graph, graph.constant(*masks[i])));
      current[i] = (Var(graph, current[i]) - hadamard(Var(graph, alpha[i]), g)).id();
    }
  }
  return current;
}

ParamSet inner_adapt(const ParamSet& params, const AlphaSet& alpha, const MlpSpec& spec, const Batch& support,
                     int n_inner, const NoiseConfig& noise, RngStream* noise_rng) {
  check_layout(params, spec);
  if (!alpha.congruent(params)) throw ShapeError("inner_adapt: AlphaSet is not congruent with parameters");
  if (support.x.rows() < 1) throw ConfigError("inner_adapt: empty support set");
  Graph graph;
  std::vector<NodeId> theta = bind(graph, params);
  std::vector<NodeId> rates;
  for (const auto& e : alpha) rates.push_back(graph.constant(e.value));
  std::vector<NodeId> adapted =
      inner_adapt(graph, params, theta, rates, mlp_loss(spec, support), n_inner, noise, noise_rng, false);
  ParamSet out;
  for (std::size_t i = 0; i < params.size(); ++i) out.add(params[i].name, params[i].layer, graph.value(adapted[i]));
  return out;
}

MetaGradient meta_gradient(const ParamSet& params, const AlphaSet& alpha, const LossBuilder& support_loss,
                           const LossBuilder& query_loss, const MetaConfig& config, RngStream& noise) {
  if (!alpha.congruent(params)) throw ShapeError("meta_gradient: AlphaSet is not congruent with parameters");

  Graph graph;
  std::vector<NodeId> theta = bind(graph, params);
  const bool learn_alpha = config.algorithm == Algorithm::MetaSgd;
  std::vector<NodeId> rates;
  for (const auto& e : alpha) {
    rates.push_back(learn_alpha ? graph.variable(e.value, "alpha/" + e.name) : graph.constant(e.value));
  }

  // First-order MAML adapts with detached gradients.
  const bool second_order = config.algorithm != Algorithm::Maml1;
  std::vector<NodeId> adapted =
      inner_adapt(graph, params, theta, rates, support_loss, config.n_inner, config.noise, &noise, second_order);
  Var loss = query_loss(graph, adapted);

  MetaGradient result;
  result.query_loss = loss.value().item();
  if (!std::isfinite(result.query_loss)) throw NonFiniteError("meta_gradient: non-finite query loss");

  std::vector<NodeId> wrt = theta;
  if (learn_alpha) wrt.insert(wrt.end(), rates.begin(), rates.end());
  std::vector<NodeId> grads = graph.backward(loss.id(), wrt, false);

  result.theta.names = params.names();
  for (std::size_t i = 0; i < params.size(); ++i) result.theta.values.push_back(graph.value(grads[i]));
  if (learn_alpha) {
    GradMap ga;
    ga.names = alpha.names();
    for (std::size_t i = 0; i < alpha.size(); ++i) ga.values.push_back(graph.value(grads[params.size() + i]));
    result.alpha = std::move(ga);
  }
  return result;
}

MetaGradient meta_gradient(const ParamSet& params, const AlphaSet& alpha, const Task& task, const MetaConfig& config,
                           const MlpSpec& spec, TaskStreams& streams) {
  check_layout(params, spec);
  if (task.support.x.rows() < 1) throw ConfigError("meta_gradient: empty support set");
  ActivationDropout dropout{config.activation_dropout, &streams.dropout};
  const ActivationDropout* dropout_ptr = config.activation_dropout > 0.0 ? &dropout : nullptr;
  return meta_gradient(params, alpha, mlp_loss(spec, task.support, dropout_ptr), mlp_loss(spec, task.query, dropout_ptr),
                       config, streams.noise);
}

void outer_update(std::span<Tensor* const> targets, std::span<const Tensor> grads, const MetaConfig& config,
                  OptimizerState& state) {
  if (targets.size() != grads.size()) throw Error("outer_update: target/gradient count mismatch");
  if (config.optimizer == OptimizerKind::Sgd) {
    for (std::size_t i = 0; i < targets.size(); ++i) targets[i]->values() -= config.eta * grads[i].values();
    ++state.step;
    return;
  }
  if (state.m.empty()) {
    for (const Tensor* t : targets) {
      state.m.push_back(Tensor::zeros(t->shape()));
      state.v.push_back(Tensor::zeros(t->shape()));
    }
  }
  if (state.m.size() != targets.size()) throw Error("adam: optimizer state does not match parameter count");
  ++state.step;
  const auto& a = config.adam;
  const double correction1 = 1.0 - std::pow(a.beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(a.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < targets.size(); ++i) {
    auto& m = state.m[i].values();
    auto& v = state.v[i].values();
    const auto& g = grads[i].values();
    m = a.beta1 * m + (1.0 - a.beta1) * g;
    v = a.beta2 * v + (1.0 - a.beta2) * g.square();
    targets[i]->values() -= config.eta * (m / correction1) / ((v / correction2).sqrt() + a.eps);
  }
}

MetaStepResult meta_step(const ParamSet& params, const AlphaSet& alpha, std::span<const Task> tasks,
                         const MetaConfig& config, const MlpSpec& spec, const RngStream& noise,
                         const RngStream& dropout, const OptimizerState& state) {
  config.validate();
  if (tasks.size() != static_cast<std::size_t>(config.meta_batch)) {
    throw ConfigError("meta_step: got " + std::to_string(tasks.size()) + " tasks for meta_batch " +
                      std::to_string(config.meta_batch));
  }
  const bool learn_alpha = config.algorithm == Algorithm::MetaSgd && !config.freeze_alpha;

  std::vector<Tensor> theta_sum;
  std::vector<Tensor> alpha_sum;
  double loss_sum = 0.0;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const std::string sub = "task-" + std::to_string(t);
    TaskStreams streams{noise.substream(sub), dropout.substream(sub)};
    MetaGradient mg = meta_gradient(params, alpha, tasks[t], config, spec, streams);
    loss_sum += mg.query_loss;
    if (t == 0) {
      theta_sum = std::move(mg.theta.values);
      if (learn_alpha) alpha_sum = std::move(mg.alpha->values);
      continue;
    }
    for (std::size_t i = 0; i < theta_sum.size(); ++i) theta_sum[i].values() += mg.theta.values[i].values();
    if (learn_alpha) {
      for (std::size_t i = 0; i < alpha_sum.size(); ++i) alpha_sum[i].values() += mg.alpha->values[i].values();
    }
  }

  const double n = static_cast<double>(tasks.size());
  std::vector<Tensor> grads;
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < theta_sum.size(); ++i) {
    grads.emplace_back(theta_sum[i].shape(), theta_sum[i].values() / n);
    labels.push_back(params[i].name);
  }
  for (std::size_t i = 0; i < alpha_sum.size(); ++i) {
    grads.emplace_back(alpha_sum[i].shape(), alpha_sum[i].values() / n);
    labels.push_back("alpha/" + alpha[i].name);
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!grads[i].all_finite()) {
      throw NonFiniteError("meta_step: non-finite meta-gradient for '" + labels[i] + "' at optimizer step " +
                           std::to_string(state.step + 1) + " (mean query loss " + std::to_string(loss_sum / n) +
                           ")");
    }
  }

  MetaStepResult result{params, alpha, state, loss_sum / n};
  std::vector<Tensor*> targets;
  for (std::size_t i = 0; i < result.params.size(); ++i) targets.push_back(&result.params.value(i));
  if (learn_alpha) {
    for (std::size_t i = 0; i < result.alpha.size(); ++i) targets.push_back(&result.alpha.value(i));
  }
  outer_update(targets, grads, config, result.state);
  return result;
}

EvalResult meta_test_adapt(const ParamSet& params, const AlphaSet& alpha, const Task& task, const MetaConfig& config,
                           const MlpSpec& spec) {
  NoiseConfig off;
  ParamSet adapted = inner_adapt(params, alpha, spec, task.support, config.n_inner, off, nullptr);

  Tensor out = predict(adapted, spec, task.query.x);
  EvalResult result;
  Graph graph;
  Var pred(graph, graph.constant(out));
  Var target(graph, graph.constant(task.query.y));
  result.loss = head_loss(pred, target, spec.head).value().item();
  if (spec.head == Head::Classification) {
    auto logits = out.matrix();
    Index correct = 0;
    for (Index r = 0; r < logits.rows(); ++r) {
      Index best = 0;
      logits.row(r).maxCoeff(&best);
      if (static_cast<double>(best) == task.query.y[r]) ++correct;
    }
    result.accuracy = static_cast<double>(correct) / static_cast<double>(logits.rows());
  }
  return result;
}

}  // namespace mgrad
