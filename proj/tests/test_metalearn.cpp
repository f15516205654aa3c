#include <doctest.h>

#include <cmath>

#include "mgrad/metalearn.hpp"
#include "test_support.hpp"

using namespace mgrad;
using mgrad::testing::random_tensor;
using mgrad::testing::rel_error;

namespace {

using Mat = Eigen::MatrixXd;

// Independent plain-Eigen oracle for a tanh regression MLP with MSE loss.
struct Oracle {
  std::vector<Mat> w;
  std::vector<Eigen::RowVectorXd> b;

  explicit Oracle(const ParamSet& p) {
    for (std::size_t i = 0; i < p.size(); i += 2) {
      const Tensor& wt = p.value(i);
      Mat m(wt.shape()[0], wt.shape()[1]);
      for (Index r = 0; r < m.rows(); ++r)
        for (Index c = 0; c < m.cols(); ++c) m(r, c) = wt[r * m.cols() + c];
      w.push_back(m);
      b.push_back(Eigen::Map<const Eigen::RowVectorXd>(p.value(i + 1).data(), p.value(i + 1).size()));
    }
  }

  static Mat to_mat(const Tensor& t) {
    Mat m(t.rows(), t.cols());
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c) m(r, c) = t[r * m.cols() + c];
    return m;
  }

  Mat output(const Mat& x) const {
    Mat a = x;
    for (std::size_t l = 0; l < w.size(); ++l) {
      Mat z = (a * w[l]).rowwise() + b[l];
      a = l + 1 < w.size() ? Mat(z.array().tanh()) : z;
    }
    return a;
  }

  double loss(const Batch& batch) const {
    Mat d = output(to_mat(batch.x)) - to_mat(batch.y);
    return d.array().square().mean();
  }

  // Gradient in the same (w0, b0, w1, b1, ...) order.
  void gradient(const Batch& batch, std::vector<Mat>& gw, std::vector<Eigen::RowVectorXd>& gb) const {
    Mat x = to_mat(batch.x);
    std::vector<Mat> acts{x};
    for (std::size_t l = 0; l < w.size(); ++l) {
      Mat z = (acts.back() * w[l]).rowwise() + b[l];
      acts.push_back(l + 1 < w.size() ? Mat(z.array().tanh()) : z);
    }
    Mat delta = 2.0 * (acts.back() - to_mat(batch.y)) / double(acts.back().size());
    gw.assign(w.size(), Mat());
    gb.assign(w.size(), Eigen::RowVectorXd());
    for (std::size_t l = w.size(); l-- > 0;) {
      gw[l] = acts[l].transpose() * delta;
      gb[l] = delta.colwise().sum();
      if (l > 0) delta = ((delta * w[l].transpose()).array() * (1.0 - acts[l].array().square())).matrix();
    }
  }

  void sgd_step(const Batch& batch, double alpha) {
    std::vector<Mat> gw;
    std::vector<Eigen::RowVectorXd> gb;
    gradient(batch, gw, gb);
    for (std::size_t l = 0; l < w.size(); ++l) {
      w[l] -= alpha * gw[l];
      b[l] -= alpha * gb[l];
    }
  }

  std::vector<Tensor> tensors() const {
    std::vector<Tensor> out;
    for (std::size_t l = 0; l < w.size(); ++l) {
      Tensor t(Shape{w[l].rows(), w[l].cols()});
      for (Index r = 0; r < w[l].rows(); ++r)
        for (Index c = 0; c < w[l].cols(); ++c) t[r * w[l].cols() + c] = w[l](r, c);
      out.push_back(t);
      Tensor tb(Shape{b[l].size()});
      for (Index k = 0; k < b[l].size(); ++k) tb[k] = b[l][k];
      out.push_back(tb);
    }
    return out;
  }
};

std::vector<Tensor> values_of(const ParamSet& p) {
  std::vector<Tensor> out;
  for (const auto& e : p) out.push_back(e.value);
  return out;
}

double max_abs(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, max_abs_diff(a[i], b[i]));
  return m;
}

ParamSet scalar_theta(double v) {
  ParamSet p;
  p.add("theta", "OUT", Tensor(Shape{1}, {v}));
  return p;
}

// L^s(θ) = θ², L^q(θ) = (θ − 1)².
Var support_sq(Graph& g, std::span<const NodeId> ids) {
  Var t(g, ids[0]);
  return reduce_sum(hadamard(t, t));
}

Var query_sq(Graph& g, std::span<const NodeId> ids) {
  Var d = Var(g, ids[0]) - Var(g, g.constant(Tensor(Shape{1}, {1.0})));
  return reduce_sum(hadamard(d, d));
}

MetaConfig sgd_config(Algorithm algorithm, double alpha0, int n_inner) {
  MetaConfig c;
  c.algorithm = algorithm;
  c.alpha0 = alpha0;
  c.n_inner = n_inner;
  c.meta_batch = 1;
  c.optimizer = OptimizerKind::Sgd;
  c.eta = 0.01;
  return c;
}

Task sinusoid_task(RngStream& rng, Index k = 5) {
  TaskFamily f;
  return sample_task(f, k, k, rng);
}

// Bilevel objective J(θ, α) = L^q(θ_n) via the oracle.
double bilevel(const ParamSet& theta, const AlphaSet* alpha_set, double alpha, const Task& task, int n_inner) {
  if (!alpha_set) {
    Oracle o(theta);
    for (int s = 0; s < n_inner; ++s) o.sgd_step(task.support, alpha);
    return o.loss(task.query);
  }
  // Elementwise rates.
  Oracle o(theta);
  Oracle rates(*alpha_set);
  for (int s = 0; s < n_inner; ++s) {
    std::vector<Mat> gw;
    std::vector<Eigen::RowVectorXd> gb;
    o.gradient(task.support, gw, gb);
    for (std::size_t l = 0; l < o.w.size(); ++l) {
      o.w[l] -= Mat(rates.w[l].array() * gw[l].array());
      o.b[l] -= Eigen::RowVectorXd(rates.b[l].array() * gb[l].array());
    }
  }
  return o.loss(task.query);
}

}  // namespace

TEST_CASE("one inner step on θ² from θ=1 gives 0.8") {
  ParamSet theta = scalar_theta(1.0);
  Graph g;
  auto ids = bind(g, theta);
  NodeId rate = g.constant(Tensor(Shape{1}, {0.1}));
  auto out = inner_adapt(g, theta, ids, std::span<const NodeId>(&rate, 1), support_sq, 1, NoiseConfig{}, nullptr, true);
  CHECK(std::abs(g.value(out[0])[0] - 0.8) <= 1e-15);
}

TEST_CASE("closed-form bilevel gradients for maml2 and maml1") {
  ParamSet theta = scalar_theta(1.0);
  AlphaSet alpha = make_alpha(theta, 0.1);
  RngStream rng(1, "noise");
  MetaGradient m2 = meta_gradient(theta, alpha, support_sq, query_sq, sgd_config(Algorithm::Maml2, 0.1, 1), rng);
  MetaGradient m1 = meta_gradient(theta, alpha, support_sq, query_sq, sgd_config(Algorithm::Maml1, 0.1, 1), rng);
  // 2(θ'−1)(1−2α) and 2(θ'−1) with θ' = 0.8.
  CHECK(std::abs(m2.theta.values[0][0] - (-0.32)) <= 1e-12);
  CHECK(std::abs(m1.theta.values[0][0] - (-0.4)) <= 1e-12);
  CHECK(std::abs(m2.theta.values[0][0] - m1.theta.values[0][0]) > 1e-6);
  CHECK(std::abs(m2.query_loss - 0.04) <= 1e-15);

  auto j = [](const ParamSet& p) {
    double t = p.value(0)[0];
    double adapted = t - 0.1 * 2.0 * t;
    return (adapted - 1.0) * (adapted - 1.0);
  };
  GradMap fd = finite_diff_grad(j, theta, 1e-5);
  CHECK(std::abs(fd.values[0][0] - m2.theta.values[0][0]) <= 1e-9);
}

TEST_CASE("α = 0 collapses both orders to the plain query gradient") {
  RngStream rng(2);
  MlpSpec spec{{1, 8, 1}, Activation::Tanh, Head::Regression};
  ParamSet theta = init_mlp(spec, rng);
  Task task = sinusoid_task(rng);
  AlphaSet zero = make_alpha(theta, 0.0);

  Oracle o(theta);
  std::vector<Mat> gw;
  std::vector<Eigen::RowVectorXd> gb;
  o.gradient(task.query, gw, gb);
  Oracle expected = o;
  expected.w = gw;
  expected.b = gb;

  for (Algorithm a : {Algorithm::Maml1, Algorithm::Maml2}) {
    TaskStreams streams{RngStream(3, "noise"), RngStream(3, "dropout")};
    MetaGradient mg = meta_gradient(theta, zero, task, sgd_config(a, 0.01, 3), spec, streams);
    CHECK(max_abs(mg.theta.values, expected.tensors()) <= 1e-10);
  }

  ParamSet scalar = scalar_theta(1.0);
  RngStream n(4);
  MetaGradient m1 = meta_gradient(scalar, make_alpha(scalar, 0.0), support_sq, query_sq,
                                  sgd_config(Algorithm::Maml1, 0.1, 1), n);
  MetaGradient m2 = meta_gradient(scalar, make_alpha(scalar, 0.0), support_sq, query_sq,
                                  sgd_config(Algorithm::Maml2, 0.1, 1), n);
  CHECK(m1.theta.values[0][0] == 0.0);
  CHECK(m2.theta.values[0][0] == 0.0);
}

TEST_CASE("two inner steps on [1,8,1] match the plain gradient-descent oracle") {
  RngStream rng(5);
  MlpSpec spec{{1, 8, 1}, Activation::Tanh, Head::Regression};
  ParamSet theta = init_mlp(spec, rng);
  theta.value(1) = random_tensor(Shape{8}, rng);
  Task task = sinusoid_task(rng);
  const double alpha = 0.05;

  ParamSet adapted = inner_adapt(theta, make_alpha(theta, alpha), spec, task.support, 2, NoiseConfig{}, nullptr);
  Oracle o(theta);
  o.sgd_step(task.support, alpha);
  o.sgd_step(task.support, alpha);
  CHECK(max_abs(values_of(adapted), o.tensors()) <= 1e-12);

  // The oracle's own gradient agrees with central differences.
  Oracle base(theta);
  std::vector<Mat> gw;
  std::vector<Eigen::RowVectorXd> gb;
  base.gradient(task.support, gw, gb);
  Oracle grad = base;
  grad.w = gw;
  grad.b = gb;
  auto loss = [&](const ParamSet& p) { return Oracle(p).loss(task.support); };
  CHECK(rel_error(grad.tensors(), finite_diff_grad(loss, theta, 1e-5).values) <= 1e-7);

  // Noise off is identical to the path that never touches DropGrad.
  NoiseConfig binary0;
  binary0.mode = NoiseMode::Binary;
  RngStream noise(6, "noise");
  ParamSet with_p0 = inner_adapt(theta, make_alpha(theta, alpha), spec, task.support, 2, binary0, &noise);
  CHECK(bit_equal(with_p0, adapted));
}

TEST_CASE("maml2 matches finite differences of the bilevel objective") {
  MlpSpec spec{{1, 8, 1}, Activation::Tanh, Head::Regression};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RngStream rng(seed, "maml2-fd");
    ParamSet theta = init_mlp(spec, rng);
    theta.value(1) = random_tensor(Shape{8}, rng);
    Task task = sinusoid_task(rng);
    for (int n_inner = 1; n_inner <= 3; ++n_inner) {
      CAPTURE(seed);
      CAPTURE(n_inner);
      MetaConfig c = sgd_config(Algorithm::Maml2, 0.05, n_inner);
      TaskStreams streams{RngStream(seed, "noise"), RngStream(seed, "dropout")};
      MetaGradient mg = meta_gradient(theta, make_alpha(theta, c.alpha0), task, c, spec, streams);
      auto j = [&](const ParamSet& p) { return bilevel(p, nullptr, c.alpha0, task, n_inner); };
      CHECK(rel_error(mg.theta, finite_diff_grad(j, theta, 1e-5)) <= 1e-4);
      CHECK(std::abs(mg.query_loss - j(theta)) <= 1e-12);
    }
  }
}

TEST_CASE("MetaSGD learning-rate gradient matches finite differences") {
  MlpSpec spec{{1, 6, 1}, Activation::Tanh, Head::Regression};
  RngStream rng(7);
  ParamSet theta = init_mlp(spec, rng);
  theta.value(1) = random_tensor(Shape{6}, rng);
  Task task = sinusoid_task(rng);
  AlphaSet alpha = make_alpha(theta, 0.05);
  for (std::size_t i = 0; i < alpha.size(); ++i) alpha.value(i) = random_tensor(alpha.value(i).shape(), rng, 0.01, 0.1);

  MetaConfig c = sgd_config(Algorithm::MetaSgd, 0.05, 2);
  TaskStreams streams{RngStream(8, "noise"), RngStream(8, "dropout")};
  MetaGradient mg = meta_gradient(theta, alpha, task, c, spec, streams);
  REQUIRE(mg.alpha.has_value());
  CHECK(mg.alpha->names == alpha.names());

  auto ja = [&](const ParamSet& a) { return bilevel(theta, &a, 0.0, task, 2); };
  CHECK(rel_error(*mg.alpha, finite_diff_grad(ja, alpha, 1e-6)) <= 1e-4);
  auto jt = [&](const ParamSet& p) { return bilevel(p, &alpha, 0.0, task, 2); };
  CHECK(rel_error(mg.theta, finite_diff_grad(jt, theta, 1e-5)) <= 1e-4);
}

TEST_CASE("meta_step: batch of one is plain SGD; duplicate tasks average to the same step") {
  RngStream rng(9);
  MlpSpec spec{{1, 8, 1}, Activation::Tanh, Head::Regression};
  ParamSet theta = init_mlp(spec, rng);
  AlphaSet alpha = make_alpha(theta, 0.01);
  Task task = sinusoid_task(rng);
  MetaConfig c = sgd_config(Algorithm::Maml2, 0.01, 2);
  RngStream noise(10, "noise"), dropout(10, "dropout");

  MetaStepResult one = meta_step(theta, alpha, std::span<const Task>(&task, 1), c, spec, noise, dropout, {});
  TaskStreams streams{noise.substream("task-0"), dropout.substream("task-0")};
  MetaGradient mg = meta_gradient(theta, alpha, task, c, spec, streams);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    Tensor expected(theta.value(i).shape(), theta.value(i).values() - c.eta * mg.theta.values[i].values());
    CHECK(bit_equal(one.params.value(i), expected));
  }
  CHECK(one.mean_query_loss == mg.query_loss);
  CHECK(bit_equal(one.alpha, alpha));

  c.meta_batch = 2;
  std::vector<Task> twice{task, task};
  MetaStepResult two = meta_step(theta, alpha, twice, c, spec, noise, dropout, {});
  CHECK(max_abs(values_of(two.params), values_of(one.params)) <= 1e-15);

  c.meta_batch = 3;
  CHECK_THROWS_AS(meta_step(theta, alpha, twice, c, spec, noise, dropout, {}), ConfigError);
}

TEST_CASE("Adam with zero gradients leaves parameters unchanged") {
  MlpSpec spec{{1, 4, 1}, Activation::Tanh, Head::Regression};
  ParamSet zero;
  RngStream rng(11);
  for (const auto& e : init_mlp(spec, rng)) zero.add(e.name, e.layer, Tensor::zeros(e.value.shape()));
  Task task = sinusoid_task(rng);
  task.support.y = Tensor::zeros(task.support.y.shape());
  task.query.y = Tensor::zeros(task.query.y.shape());
  MetaConfig c = sgd_config(Algorithm::Maml2, 0.01, 2);
  c.optimizer = OptimizerKind::Adam;
  RngStream noise(12, "noise"), dropout(12, "dropout");
  OptimizerState state;
  ParamSet p = zero;
  for (int s = 0; s < 3; ++s) {
    MetaStepResult r = meta_step(p, make_alpha(p, 0.01), std::span<const Task>(&task, 1), c, spec, noise, dropout, state);
    p = r.params;
    state = r.state;
  }
  CHECK(bit_equal(p, zero));
  CHECK(state.step == 3);
}

TEST_CASE("Adam matches a hand-written bias-corrected update") {
  MetaConfig c;
  c.eta = 0.1;
  Tensor x(Shape{2}, {1.0, -2.0});
  Tensor* targets[] = {&x};
  OptimizerState state;
  double m[2] = {0, 0}, v[2] = {0, 0}, ref[2] = {1.0, -2.0};
  const double grads[3][2] = {{0.5, -1.0}, {0.25, 3.0}, {-0.1, 0.0}};
  for (int t = 1; t <= 3; ++t) {
    Tensor g(Shape{2}, {grads[t - 1][0], grads[t - 1][1]});
    outer_update(targets, std::span<const Tensor>(&g, 1), c, state);
    for (int k = 0; k < 2; ++k) {
      m[k] = 0.9 * m[k] + 0.1 * grads[t - 1][k];
      v[k] = 0.999 * v[k] + 0.001 * grads[t - 1][k] * grads[t - 1][k];
      double mh = m[k] / (1.0 - std::pow(0.9, t));
      double vh = v[k] / (1.0 - std::pow(0.999, t));
      ref[k] -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
    }
    CHECK(x[0] == doctest::Approx(ref[0]).epsilon(1e-14));
    CHECK(x[1] == doctest::Approx(ref[1]).epsilon(1e-14));
  }
}

TEST_CASE("MetaSGD with frozen rates reproduces the maml2 trajectory bit-exactly") {
  RngStream rng(13);
  MlpSpec spec{{1, 8, 1}, Activation::Tanh, Head::Regression};
  ParamSet init = init_mlp(spec, rng);
  TaskPool pool = make_pool(TaskFamily{}, 8, 14);
  MetaConfig base = sgd_config(Algorithm::Maml2, 0.01, 2);
  base.optimizer = OptimizerKind::Adam;
  base.meta_batch = 2;
  base.noise.mode = NoiseMode::Gaussian;
  base.noise.p = 0.2;
  MetaConfig frozen = base;
  frozen.algorithm = Algorithm::MetaSgd;
  frozen.freeze_alpha = true;

  auto run = [&](const MetaConfig& c) {
    ParamSet p = init;
    AlphaSet a = make_alpha(p, c.alpha0);
    OptimizerState state;
    RngStream sampler(15, "tasks");
    for (int step = 0; step < 10; ++step) {
      std::vector<Task> tasks;
      for (int j = 0; j < c.meta_batch; ++j) tasks.push_back(sample_from_pool(pool, 5, 5, sampler));
      RngStream noise = RngStream(16).substream("noise").substream("step-" + std::to_string(step));
      MetaStepResult r = meta_step(p, a, tasks, c, spec, noise, noise, state);
      CHECK(bit_equal(r.alpha, a));
      p = r.params;
      a = r.alpha;
      state = r.state;
    }
    return p;
  };
  ParamSet a = run(base), b = run(frozen);
  CHECK(bit_equal(a, b));
  CHECK_FALSE(bit_equal(a, init));
}

TEST_CASE("single-step DropGrad updates are unbiased") {
  RngStream rng(17);
  MlpSpec spec{{1, 4, 1}, Activation::Tanh, Head::Regression};
  ParamSet theta = init_mlp(spec, rng);
  theta.value(1) = random_tensor(Shape{4}, rng);
  Task task = sinusoid_task(rng);
  AlphaSet alpha = make_alpha(theta, 0.1);
  ParamSet clean = inner_adapt(theta, alpha, spec, task.support, 1, NoiseConfig{}, nullptr);

  for (NoiseMode mode : {NoiseMode::Binary, NoiseMode::Gaussian}) {
    NoiseConfig c;
    c.mode = mode;
    c.p = 0.3;
    RngStream noise(18, noise_mode_name(mode));
    const int n = 10000;
    std::vector<Eigen::ArrayXd> sum, sum_sq;
    for (const auto& e : theta) {
      sum.push_back(Eigen::ArrayXd::Zero(e.value.size()));
      sum_sq.push_back(Eigen::ArrayXd::Zero(e.value.size()));
    }
    for (int t = 0; t < n; ++t) {
      ParamSet out = inner_adapt(theta, alpha, spec, task.support, 1, c, &noise);
      for (std::size_t i = 0; i < out.size(); ++i) {
        sum[i] += out.value(i).values();
        sum_sq[i] += out.value(i).values().square();
      }
    }
    for (std::size_t i = 0; i < theta.size(); ++i) {
      Eigen::ArrayXd mean = sum[i] / n;
      Eigen::ArrayXd var = ((sum_sq[i] / n - mean.square()) * (double(n) / (n - 1))).max(0.0);
      Eigen::ArrayXd se = (var / n).sqrt();
      CHECK(((mean - clean.value(i).values()).abs() <= 5.0 * se + 1e-12).all());
    }
  }
}

TEST_CASE("noise off and binary p=0 give bit-identical meta-steps") {
  RngStream rng(19);
  MlpSpec spec{{1, 8, 1}, Activation::Tanh, Head::Regression};
  ParamSet theta = init_mlp(spec, rng);
  std::vector<Task> tasks{sinusoid_task(rng), sinusoid_task(rng)};
  MetaConfig off = sgd_config(Algorithm::Maml2, 0.01, 3);
  off.meta_batch = 2;
  MetaConfig p0 = off;
  p0.noise.mode = NoiseMode::Binary;
  p0.noise.p = 0.0;
  RngStream noise(20, "noise"), dropout(20, "dropout");
  MetaStepResult a = meta_step(theta, make_alpha(theta, 0.01), tasks, off, spec, noise, dropout, {});
  MetaStepResult b = meta_step(theta, make_alpha(theta, 0.01), tasks, p0, spec, noise, dropout, {});
  CHECK(bit_equal(a.params, b.params));
  CHECK(a.mean_query_loss == b.mean_query_loss);
}

TEST_CASE("non-finite support loss aborts with the step index") {
  MlpSpec spec{{1, 4, 1}, Activation::Tanh, Head::Regression};
  RngStream rng(21);
  ParamSet theta = init_mlp(spec, rng);
  theta.value(2) = Tensor::constant(theta.value(2).shape(), 1e200);
  Task task = sinusoid_task(rng);
  try {
    inner_adapt(theta, make_alpha(theta, 0.01), spec, task.support, 3, NoiseConfig{}, nullptr);
    FAIL("expected NonFiniteError");
  } catch (const NonFiniteError& err) {
    CHECK(std::string(err.what()).find("step 0") != std::string::npos);
  }
  MetaConfig c = sgd_config(Algorithm::Maml2, 0.01, 1);
  RngStream noise(22), dropout(22);
  CHECK_THROWS_AS(meta_step(theta, make_alpha(theta, 0.01), std::span<const Task>(&task, 1), c, spec, noise, dropout, {}),
                  NonFiniteError);
}

TEST_CASE("meta_test_adapt") {
  MlpSpec spec{{1, 40, 1}, Activation::Tanh, Head::Regression};
  RngStream rng(23);
  ParamSet theta = init_mlp(spec, rng);
  Task task = sinusoid_task(rng);
  MetaConfig c = sgd_config(Algorithm::Maml2, 0.01, 5);
  c.noise.mode = NoiseMode::Gaussian;
  c.noise.p = 0.5;
  c.activation_dropout = 0.5;

  EvalResult none = meta_test_adapt(theta, make_alpha(theta, 0.0), task, c, spec);
  Oracle o(theta);
  CHECK(std::abs(none.loss - o.loss(task.query)) <= 1e-12);
  CHECK_FALSE(none.accuracy.has_value());

  EvalResult r1 = meta_test_adapt(theta, make_alpha(theta, 0.01), task, c, spec);
  EvalResult r2 = meta_test_adapt(theta, make_alpha(theta, 0.01), task, c, spec);
  CHECK(r1.loss == r2.loss);

  // Noise and dropout are ignored at meta-test time.
  Oracle adapted(theta);
  for (int s = 0; s < 5; ++s) adapted.sgd_step(task.support, 0.01);
  CHECK(std::abs(r1.loss - adapted.loss(task.query)) <= 1e-12);

  // Query equal to support: enough steps drive the query loss below the
  // unadapted support loss.
  Task same = task;
  same.query = same.support;
  c.n_inner = 200;
  EvalResult fitted = meta_test_adapt(theta, make_alpha(theta, 0.05), same, c, spec);
  CHECK(fitted.loss <= Oracle(theta).loss(same.support));

  // Query targets do not influence adaptation.
  Task scrambled = task;
  scrambled.query.y = Tensor::constant(task.query.y.shape(), 123.0);
  c.n_inner = 5;
  ParamSet a1 = inner_adapt(theta, make_alpha(theta, 0.01), spec, task.support, 5, NoiseConfig{}, nullptr);
  Oracle from_a1(a1);
  CHECK(std::abs(meta_test_adapt(theta, make_alpha(theta, 0.01), scrambled, c, spec).loss -
                 from_a1.loss(scrambled.query)) <= 1e-12);
}
