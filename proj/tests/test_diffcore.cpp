#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "anticipate/adam.hpp"
#include "anticipate/gradcheck.hpp"
#include "anticipate/graph.hpp"
#include "anticipate/model.hpp"

using namespace anticipate;

namespace {

// grad_check driver for a single-op graph over named parameter tensors.
double check_op(ModelParams& p,
                const std::function<Graph::Ref(Graph&, Binding&)>& build) {
  return grad_check(p, [&](const ModelParams& params, GradMap* grads) {
    Graph g;
    Binding bind(g, params);
    Graph::Ref loss = build(g, bind);
    double v = g.value(loss).data[0];
    if (grads) {
      g.backward(loss);
      bind.collect_grads(*grads);
    }
    return v;
  });
}

}  // namespace

TEST_CASE("softmax of log-integers recovers the normalized integers") {
  auto p = softmax({std::log(1.0), std::log(2.0), std::log(3.0)});
  CHECK(p[0] == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(2.0 / 6.0).epsilon(1e-12));
  CHECK(p[2] == doctest::Approx(3.0 / 6.0).epsilon(1e-12));
  double s = p[0] + p[1] + p[2];
  CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("softmax is shift invariant") {
  auto a = softmax({1.0, 2.0, 3.0});
  auto b = softmax({1001.0, 1002.0, 1003.0});
  for (int i = 0; i < 3; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("cross entropy of p=0.25 is ln 4") {
  CHECK(cross_entropy({0.5, 0.25, 0.25}, 1) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  // probability floor keeps the loss finite
  CHECK(std::isfinite(cross_entropy({1.0, 0.0}, 1)));
  CHECK_THROWS_AS(cross_entropy({0.5, 0.5}, 2), InputError);
}

TEST_CASE("mse hand value") {
  // ((0.1-0.2)^2 + (0.4-0.2)^2) / 2 = 0.025
  CHECK(mse({0.1, 0.4}, {0.2, 0.2}) == doctest::Approx(0.025).epsilon(1e-12));
}

TEST_CASE("gru cell with zero weights halves the previous state") {
  // z = sigmoid(0) = 0.5, candidate = tanh(0) = 0, so h' = 0.5 * h.
  Graph g;
  ModelConfig cfg;
  Graph::GruRefs w;
  auto zmat = [&](std::size_t r, std::size_t c) { return g.constant(Tensor::zeros({r, c})); };
  auto zvec = [&](std::size_t n) { return g.constant(Tensor::zeros({n})); };
  w.Wz = zmat(3, 2); w.Uz = zmat(3, 3); w.bz = zvec(3);
  w.Wr = zmat(3, 2); w.Ur = zmat(3, 3); w.br = zvec(3);
  w.Wh = zmat(3, 2); w.Uh = zmat(3, 3); w.bh = zvec(3);
  Graph::Ref x = g.constant(Tensor::vec({1.0, -2.0}));
  Graph::Ref h = g.constant(Tensor::vec({0.4, -0.6, 1.0}));
  Graph::Ref hn = g.gru_cell(x, h, w);
  CHECK(g.value(hn).data[0] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(g.value(hn).data[1] == doctest::Approx(-0.3).epsilon(1e-12));
  CHECK(g.value(hn).data[2] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("dilated conv over all-ones input counts in-range taps") {
  Graph g;
  Graph::Ref x = g.constant(Tensor({1, 5}, {1, 1, 1, 1, 1}));
  Graph::Ref w = g.constant(Tensor({3, 1, 1}, {1, 1, 1}));
  Graph::Ref b = g.constant(Tensor::zeros({1}));
  SUBCASE("dilation 1") {
    Graph::Ref y = g.dilated_conv1d(x, w, b, 1);
    std::vector<double> want = {2, 3, 3, 3, 2};
    for (int t = 0; t < 5; ++t)
      CHECK(g.value(y).data[static_cast<std::size_t>(t)] == doctest::Approx(want[t]));
  }
  SUBCASE("dilation 2") {
    Graph::Ref y = g.dilated_conv1d(x, w, b, 2);
    std::vector<double> want = {2, 2, 3, 2, 2};
    for (int t = 0; t < 5; ++t)
      CHECK(g.value(y).data[static_cast<std::size_t>(t)] == doctest::Approx(want[t]));
  }
}

TEST_CASE("conv1x1 is a per-frame affine map") {
  Graph g;
  Graph::Ref x = g.constant(Tensor({2, 2}, {1, 2, 3, 4}));
  Graph::Ref w = g.constant(Tensor({1, 2}, {1, 10}));
  Graph::Ref b = g.constant(Tensor::vec({0.5}));
  Graph::Ref y = g.conv1x1(x, w, b);
  CHECK(g.value(y).data[0] == doctest::Approx(31.5));
  CHECK(g.value(y).data[1] == doctest::Approx(42.5));
}

TEST_CASE("l2 normalization values and zero-vector floor") {
  Graph g;
  Graph::Ref v = g.constant(Tensor::vec({3.0, 4.0}));
  Graph::Ref n = g.normalize_l2(v);
  CHECK(g.value(n).data[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(g.value(n).data[1] == doctest::Approx(0.8).epsilon(1e-12));
  Graph::Ref z = g.normalize_l2(g.constant(Tensor::vec({0.0, 0.0})));
  CHECK(g.value(z).data[0] == 0.0);
  CHECK(g.value(z).data[1] == 0.0);
}

TEST_CASE("elementwise and reduction gradients match finite differences") {
  ModelParams p;
  p.add("a", Tensor::vec({0.3, -0.7, 1.2, 0.05}));
  p.add("b", Tensor::vec({-0.4, 0.9, 0.2, -1.1}));
  double err = check_op(p, [](Graph& g, Binding& bind) {
    Graph::Ref a = bind("a"), b = bind("b");
    Graph::Ref t = g.add(g.mul(g.sigmoid(a), g.tanh_op(b)), g.relu(g.sub(a, b)));
    return g.mean(g.mul(t, g.scale(t, 0.5)));
  });
  CHECK(err < 1e-6);
}

TEST_CASE("linear algebra gradients match finite differences") {
  ModelParams p;
  p.add("W", Tensor({3, 2}, {0.1, -0.2, 0.4, 0.7, -0.5, 0.3}));
  p.add("x", Tensor::vec({0.6, -0.9}));
  p.add("A", Tensor({3, 3}, {0.2, 0.1, -0.3, 0.5, -0.1, 0.4, 0.0, 0.7, -0.6}));
  double err = check_op(p, [](Graph& g, Binding& bind) {
    Graph::Ref y = g.matvec(bind("W"), bind("x"));          // 3
    Graph::Ref z = g.vecmat(y, bind("A"));                  // 3
    Graph::Ref m = g.matmul(bind("A"), bind("W"));          // 3x2
    return g.add(g.dot(y, z), g.sum(m));
  });
  CHECK(err < 1e-6);
}

TEST_CASE("softmax, nll and mse gradients match finite differences") {
  ModelParams p;
  p.add("logits", Tensor::vec({0.2, -1.3, 0.8, 0.1}));
  p.add("pred", Tensor::vec({0.4, -0.2, 0.9}));
  double err = check_op(p, [](Graph& g, Binding& bind) {
    Graph::Ref sm = g.softmax_op(bind("logits"));
    Graph::Ref nll = g.nll_softmax(bind("logits"), 2);
    Graph::Ref tgt = g.constant(Tensor::vec({0.1, 0.0, 0.5}));
    Graph::Ref m = g.mse_loss(bind("pred"), tgt);
    return g.add(g.add(nll, m), g.sum(sm));
  });
  CHECK(err < 1e-6);
}

TEST_CASE("column concat, slicing and normalization gradients") {
  ModelParams p;
  p.add("u", Tensor::vec({0.5, -0.3, 0.8}));
  p.add("v", Tensor::vec({-0.2, 0.9, 0.4}));
  double err = check_op(p, [](Graph& g, Binding& bind) {
    Graph::Ref m = g.concat_cols({bind("u"), bind("v"), bind("u")});
    Graph::Ref n = g.normalize_cols(m);
    Graph::Ref c1 = g.col(n, 1);
    Graph::Ref cat = g.concat({c1, g.normalize_l2(bind("v"))});
    Graph::Ref probs = g.col(g.softmax_cols(m), 0);
    Graph::Ref w = g.constant(Tensor::vec({0.3, -1.1, 0.7}));
    // weight cat instead of squaring it: |normalized|^2 is constant, which
    // would leave v with an exactly-zero gradient at the fd noise floor
    Graph::Ref w2 = g.constant(Tensor::vec({0.4, -0.6, 1.2, -0.8, 0.5, 0.9}));
    return g.add(g.dot(probs, w), g.dot(cat, w2));
  });
  CHECK(err < 1e-6);
}

TEST_CASE("gru cell gradients match finite differences") {
  ModelParams p;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-0.6, 0.6);
  auto fill = [&](std::vector<std::size_t> s) {
    Tensor t = Tensor::zeros(std::move(s));
    for (auto& v : t.data) v = u(rng);
    return t;
  };
  for (const char* n : {"Wz", "Wr", "Wh"}) p.add(std::string("g.") + n, fill({3, 2}));
  for (const char* n : {"Uz", "Ur", "Uh"}) p.add(std::string("g.") + n, fill({3, 3}));
  for (const char* n : {"bz", "br", "bh"}) p.add(std::string("g.") + n, fill({3}));
  p.add("x", fill({2}));
  p.add("h", fill({3}));
  double err = check_op(p, [](Graph& g, Binding& bind) {
    Graph::Ref h1 = g.gru_cell(bind("x"), bind("h"), bind.gru("g"));
    Graph::Ref h2 = g.gru_cell(bind("x"), h1, bind.gru("g"));  // reused weights
    return g.dot(h2, h2);
  });
  CHECK(err < 1e-6);
}

TEST_CASE("dilated conv gradients match finite differences") {
  ModelParams p;
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  auto fill = [&](std::vector<std::size_t> s) {
    Tensor t = Tensor::zeros(std::move(s));
    for (auto& v : t.data) v = u(rng);
    return t;
  };
  p.add("x", fill({2, 7}));
  p.add("w", fill({3, 2, 2}));
  p.add("b", fill({2}));
  p.add("w2", fill({2, 2}));
  p.add("b2", fill({2}));
  double err = check_op(p, [](Graph& g, Binding& bind) {
    Graph::Ref y = g.relu(g.dilated_conv1d(bind("x"), bind("w"), bind("b"), 2));
    Graph::Ref z = g.add(bind("x"), g.conv1x1(y, bind("w2"), bind("b2")));
    return g.mean(g.mul(z, z));
  });
  CHECK(err < 1e-6);
}

TEST_CASE("a corrupted gradient is flagged by the checker") {
  ModelParams p;
  p.add("w", Tensor::vec({0.7, -0.4}));
  double err = grad_check(p, [](const ModelParams& params, GradMap* grads) {
    const Tensor& w = params.at("w");
    double loss = 0.5 * (w.data[0] * w.data[0] + w.data[1] * w.data[1]);
    if (grads) (*grads)["w"] = {2.0 * w.data[0], 2.0 * w.data[1]};  // off by 2x
    return loss;
  });
  CHECK(err == doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("adam drives a quadratic toward zero and skips gradient-free params") {
  ModelParams p;
  p.add("w", Tensor::vec({1.0, -2.0}));
  p.add("frozen", Tensor::vec({3.0}));
  AdamState st;
  st.lr = 0.05;
  for (int i = 0; i < 200; ++i) {
    GradMap g;
    g["w"] = {2.0 * p.at("w").data[0], 2.0 * p.at("w").data[1]};
    ++st.step;
    adam_step(p, g, st);
  }
  CHECK(std::abs(p.at("w").data[0]) < 0.1);
  CHECK(std::abs(p.at("w").data[1]) < 0.1);
  CHECK(p.at("frozen").data[0] == 3.0);
}

TEST_CASE("backward requires a scalar loss") {
  Graph g;
  Graph::Ref v = g.param(Tensor::vec({1.0, 2.0}));
  CHECK_THROWS_AS(g.backward(v), DimensionError);
}
