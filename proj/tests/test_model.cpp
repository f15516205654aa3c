#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "mgrad/model.hpp"
#include "test_support.hpp"

using namespace mgrad;
using mgrad::testing::random_tensor;

TEST_CASE("init_mlp layout for [1,40,40,1]") {
  MlpSpec spec{{1, 40, 40, 1}, Activation::Tanh, Head::Regression};
  RngStream rng(1, "init");
  ParamSet p = init_mlp(spec, rng);
  REQUIRE(p.size() == 6);
  CHECK(p.names() == std::vector<std::string>{"L0.w", "L0.b", "L1.w", "L1.b", "OUT.w", "OUT.b"});
  CHECK(p.at("L0.w").shape() == Shape{1, 40});
  CHECK(p.at("L1.w").shape() == Shape{40, 40});
  CHECK(p.at("OUT.w").shape() == Shape{40, 1});
  CHECK(p.at("OUT.b").shape() == Shape{1});
  CHECK(p.parameter_count() == 40 + 40 + 1600 + 40 + 40 + 1);
  CHECK(p.layers() == std::vector<std::string>{"L0", "L1", "OUT"});

  for (const auto& e : p) {
    if (e.name.ends_with(".b")) {
      CHECK(bit_equal(e.value, Tensor::zeros(e.value.shape())));
    } else {
      double s = std::sqrt(6.0 / double(e.value.shape()[0] + e.value.shape()[1]));
      CHECK(e.value.values().abs().maxCoeff() <= s);
    }
  }
  RngStream again(1, "init");
  CHECK(bit_equal(p, init_mlp(spec, again)));
}

TEST_CASE("invalid specs are rejected") {
  RngStream rng(1);
  CHECK_THROWS(init_mlp(MlpSpec{{3}, Activation::Tanh, Head::Regression}, rng));
  CHECK_THROWS(init_mlp(MlpSpec{{3, 0, 1}, Activation::Tanh, Head::Regression}, rng));
}

TEST_CASE("forward: zero network, dimension checks, dropout rate 0") {
  MlpSpec spec{{3, 4, 2}, Activation::Relu, Head::Classification};
  RngStream rng(2);
  ParamSet p = init_mlp(spec, rng);
  ParamSet zero;
  for (const auto& e : p) zero.add(e.name, e.layer, Tensor::zeros(e.value.shape()));
  Tensor x = random_tensor(Shape{5, 3}, rng);
  Tensor out = predict(zero, spec, x);
  CHECK(out.shape() == Shape{5, 2});
  CHECK(bit_equal(out, Tensor::zeros(Shape{5, 2})));

  Graph g;
  CHECK_THROWS_AS(forward(p, spec, random_tensor(Shape{5, 2}, rng), g), ShapeError);
  Graph g1;
  CHECK_THROWS_AS(forward(p, spec, Tensor::zeros(Shape{3}), g1), ShapeError);

  RngStream drop(3, "dropout");
  Graph a, b;
  NodeId plain = forward(p, spec, x, a);
  NodeId masked = forward(p, spec, x, b, ActivationDropout{0.0, &drop});
  CHECK(bit_equal(a.value(plain), b.value(masked)));
}

TEST_CASE("forward on a hand-set [1,2,1] tanh network") {
  MlpSpec spec{{1, 2, 1}, Activation::Tanh, Head::Regression};
  ParamSet p;
  p.add("L0.w", "L0", Tensor(Shape{1, 2}, {0.5, -1.0}));
  p.add("L0.b", "L0", Tensor(Shape{2}, {0.1, 0.2}));
  p.add("OUT.w", "OUT", Tensor(Shape{2, 1}, {2.0, 3.0}));
  p.add("OUT.b", "OUT", Tensor(Shape{1}, {-0.5}));
  double expected = 2.0 * std::tanh(0.6) + 3.0 * std::tanh(-0.8) - 0.5;
  Tensor out = predict(p, spec, Tensor(Shape{1, 1}, {1.0}));
  CHECK(out[0] == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("activation dropout masks are inverted and deterministic") {
  MlpSpec spec{{2, 50, 1}, Activation::Tanh, Head::Regression};
  RngStream rng(4);
  ParamSet p = init_mlp(spec, rng);
  Tensor x = random_tensor(Shape{3, 2}, rng);
  auto run = [&] {
    RngStream drop(5, "dropout");
    Graph g;
    return g.value(forward(p, spec, x, g, ActivationDropout{0.5, &drop}));
  };
  Tensor first = run();
  CHECK(bit_equal(first, run()));
  CHECK_FALSE(bit_equal(first, predict(p, spec, x)));
}

TEST_CASE("layer labels partition the parameters") {
  MlpSpec spec{{2, 3, 3, 3, 1}, Activation::Tanh, Head::Regression};
  RngStream rng(6);
  ParamSet p = init_mlp(spec, rng);
  CHECK(layer_labels(spec) == std::vector<std::string>{"L0", "L1", "L2", "OUT"});
  for (const auto& selector : std::vector<std::set<std::string>>{{}, {"OUT"}, {"L0", "L2"}, {"L0", "L1", "L2", "OUT"}}) {
    std::set<std::string> selected, unselected;
    for (const auto& e : p) (selector.count(e.layer) ? selected : unselected).insert(e.name);
    std::set<std::string> all(selected);
    all.insert(unselected.begin(), unselected.end());
    CHECK(all.size() == p.size());
    for (const auto& name : selected) CHECK(unselected.count(name) == 0);
  }
}

TEST_CASE("checkpoint round trip is bit-exact") {
  MlpSpec spec{{1, 8, 8, 1}, Activation::Tanh, Head::Regression};
  RngStream rng(7);
  ParamSet p = init_mlp(spec, rng);
  p.value(1)[0] = 0.1;
  p.value(1)[1] = -0.0;
  p.value(1)[2] = 1e-300;
  p.value(1)[3] = 5e-324;
  p.value(1)[4] = 1.7976931348623157e308;
  ParamSet back = parse_checkpoint(format_checkpoint(p));
  CHECK(bit_equal(p, back));
  CHECK(back.at("L0.b")[0] == 0.1);

  auto path = std::filesystem::temp_directory_path() / "mgrad_test_roundtrip.ckpt";
  save_checkpoint(p, path);
  CHECK(bit_equal(p, load_checkpoint(path)));
  std::filesystem::remove(path);

  ParamSet bad = p;
  bad.value(0)[0] = std::nan("");
  CHECK_THROWS_AS(format_checkpoint(bad), CheckpointError);
}

TEST_CASE("malformed checkpoints are rejected") {
  CHECK_THROWS_AS(parse_checkpoint("MGRAD2\n"), CheckpointError);
  CHECK_THROWS_AS(parse_checkpoint(""), CheckpointError);
  try {
    parse_checkpoint("MGRAD1\nL0.w L0 1 2\n0.5 oops\n");
    FAIL("expected CheckpointError");
  } catch (const CheckpointError& err) {
    CHECK(std::string(err.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_checkpoint("MGRAD1\nL0.w L0 1 2\n0.5\n"), CheckpointError);
  CHECK_THROWS_AS(parse_checkpoint("MGRAD1\nL0.w L0 1 2\n"), CheckpointError);
  CHECK_THROWS_AS(parse_checkpoint("MGRAD1\nL0.w\n0.5\n"), CheckpointError);
}
