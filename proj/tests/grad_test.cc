// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cstring>
#include <random>

#include "aptsep/grad/adam.h"
#include "aptsep/grad/gradcheck.h"
#include "aptsep/grad/graph.h"
#include "doctest.h"
#include "support/primitive_gradchecks.h"

using aptsep::Errc;
using aptsep::Error;
using namespace aptsep::grad;

namespace {

Errc CodeOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an aptsep::Error");
  return Errc::kIo;
}

}  // namespace

TEST_CASE("evaluate: identity of a 3-vector") {
  Graph<float> g;
  NodeId x = g.Leaf("x");
  Tensor<float> v({3}, {1, 2, 3});
  Bindings<float> b;
  b.Bind(x, v);
  CHECK(g.Evaluate(b) == v);
}

TEST_CASE("evaluate: mean(abs(a - b))") {
  Graph<float> g;
  NodeId a = g.Leaf("a"), bb = g.Leaf("b");
  g.L1Loss(a, bb);
  Tensor<float> av({2}, {1, 0}), bv({2}, {0, 0});
  Bindings<float> b;
  b.Bind(a, av);
  b.Bind(bb, bv);
  CHECK(g.Evaluate(b)[0] == 0.5f);
}

TEST_CASE("evaluate: 2x2 matmul against hand expansion") {
  Graph<float> g;
  NodeId a = g.Leaf("a"), bb = g.Leaf("b");
  g.MatMul(a, bb);
  const float a00 = 1.5f, a01 = -2.f, a10 = 0.25f, a11 = 3.f;
  const float b00 = 4.f, b01 = -1.f, b10 = 0.5f, b11 = 2.f;
  Tensor<float> av({2, 2}, {a00, a01, a10, a11});
  Tensor<float> bv({2, 2}, {b00, b01, b10, b11});
  Bindings<float> b;
  b.Bind(a, av);
  b.Bind(bb, bv);
  const Tensor<float>& c = g.Evaluate(b);
  CHECK(c[0] == a00 * b00 + a01 * b10);
  CHECK(c[1] == a00 * b01 + a01 * b11);
  CHECK(c[2] == a10 * b00 + a11 * b10);
  CHECK(c[3] == a10 * b01 + a11 * b11);
}

TEST_CASE("backpropagate: sum and mean-abs rules") {
  {
    Graph<float> g;
    NodeId x = g.Leaf("x", true);
    g.Sum(x);
    Tensor<float> v({4}, {3, -1, 2, 7});
    Bindings<float> b;
    b.Bind(x, v);
    g.Evaluate(b);
    auto grads = g.Backpropagate(Tensor<float>({1}, {1}));
    CHECK(grads.at(x) == Tensor<float>({4}, {1, 1, 1, 1}));
  }
  {
    Graph<float> g;
    NodeId x = g.Leaf("x", true), z = g.Leaf("zero");
    g.L1Loss(x, z);
    Tensor<float> v({2}, {2, -3}), zero({2});
    Bindings<float> b;
    b.Bind(x, v);
    b.Bind(z, zero);
    g.Evaluate(b);
    auto grads = g.Backpropagate(Tensor<float>({1}, {1}));
    CHECK(grads.at(x) == Tensor<float>({2}, {0.5f, -0.5f}));
    CHECK(grads.count(z) == 0);
  }
}

TEST_CASE("L1 subgradient at zero is zero") {
  Graph<double> g;
  NodeId x = g.Leaf("x", true), y = g.Leaf("y");
  g.L1Loss(x, y);
  Tensor<double> v({3}, {1, 2, 3}), w({3}, {1, 0, 3});
  Bindings<double> b;
  b.Bind(x, v);
  b.Bind(y, w);
  g.Evaluate(b);
  auto grads = g.Backpropagate(Tensor<double>({1}, {1}));
  CHECK(grads.at(x)[0] == 0.0);
  CHECK(grads.at(x)[1] == doctest::Approx(1.0 / 3));
  CHECK(grads.at(x)[2] == 0.0);
}

TEST_CASE("errors: shape mismatch names the node, unbound leaf, early backward") {
  Graph<float> g;
  NodeId a = g.Leaf("a"), bb = g.Leaf("b");
  NodeId sum = g.Add(a, bb);
  Tensor<float> av({2}), bv({3});
  Bindings<float> b;
  b.Bind(a, av);
  b.Bind(bb, bv);
  try {
    g.Evaluate(b);
    FAIL("expected shape error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kShapeMismatch);
    CHECK(std::string(e.what()).find(g.Describe(sum)) != std::string::npos);
  }
  Bindings<float> partial;
  partial.Bind(a, av);
  CHECK(CodeOf([&] { g.Evaluate(partial); }) == Errc::kUnboundLeaf);

  Graph<float> fresh;
  NodeId x = fresh.Leaf("x", true);
  fresh.Sum(x);
  CHECK(CodeOf([&] { fresh.Backpropagate(Tensor<float>({1})); }) ==
        Errc::kBackwardBeforeForward);
}

TEST_CASE("finite_difference_check: closed-form cases") {
  Graph<double> g;
  NodeId x = g.Leaf("x");
  g.Sum(g.Mul(x, x));
  Bindings<double> b;
  Tensor<double> at({2}, {1, 2});
  b.Bind(x, at);
  auto f = GraphFunction(g, b, x);
  CHECK(f(at).grad == std::vector<double>{2, 4});
  CHECK(FiniteDifferenceCheck(f, at, 1e-3) < 1e-6);

  DifferentiableFn<double> constant = [](const Tensor<double>& v) {
    return ValueAndGrad<double>{5.0, std::vector<double>(v.size(), 0.0)};
  };
  CHECK(FiniteDifferenceCheck(constant, at, 1e-3) == 0.0);

  DifferentiableFn<double> blows_up = [](const Tensor<double>& v) {
    return ValueAndGrad<double>{v[0] > 1.0 ? INFINITY : 0.0, {0.0, 0.0}};
  };
  CHECK(CodeOf([&] { FiniteDifferenceCheck(blows_up, at, 1e-3); }) ==
        Errc::kNonFinite);
}

TEST_CASE("every primitive passes central differences (100 seeded trials)") {
  for (const auto& r : aptsep::testing::RunPrimitiveGradchecks(100, 2026)) {
    CAPTURE(r.op);
    CHECK(r.trials == 100);
    CHECK(r.worst < 1e-4);
  }
}

TEST_CASE("frozen leaves are never written and get no gradient") {
  std::mt19937 gen(5);
  std::normal_distribution<float> d;
  Tensor<float> w({4, 3, 3, 3}), x({3, 6, 5}), p({8});
  for (auto* t : {&w, &x, &p}) {
    for (float& v : t->data()) v = d(gen);
  }
  const Tensor<float> w0 = w, x0 = x;
  Graph<float> g;
  NodeId wl = g.Leaf("w"), xl = g.Leaf("x"), pl = g.Leaf("p", true);
  g.Sum(g.Film(g.Relu(g.Conv2d(xl, wl, 2, 1)), pl));
  Bindings<float> b;
  b.Bind(wl, w);
  b.Bind(xl, x);
  b.Bind(pl, p);
  for (int i = 0; i < 5; ++i) {
    g.Evaluate(b);
    auto grads = g.Backpropagate(Tensor<float>({1}, {1}));
    CHECK(grads.size() == 1);
    CHECK(grads.count(pl) == 1);
  }
  CHECK(std::memcmp(w.data().data(), w0.data().data(), w.size() * 4) == 0);
  CHECK(std::memcmp(x.data().data(), x0.data().data(), x.size() * 4) == 0);
  CHECK_FALSE(w.has_grad());
  CHECK(CodeOf([&] { w.AccumulateGrad(w0.data()); }) == Errc::kInvalidArgument);
}

TEST_CASE("identical graph and bindings give bitwise-identical results") {
  auto run = [] {
    std::mt19937 gen(99);
    std::normal_distribution<float> d;
    Tensor<float> w({8, 2, 3, 3}), x({2, 20, 17}), p({16});
    for (auto* t : {&w, &x, &p}) {
      for (float& v : t->data()) v = d(gen);
    }
    Graph<float> g;
    NodeId wl = g.Leaf("w", true), xl = g.Leaf("x"), pl = g.Leaf("p", true);
    NodeId y = g.Sigmoid(g.Film(g.Conv2d(xl, wl, 1, 1), pl));
    g.Sum(g.Mul(y, y));
    Bindings<float> b;
    b.Bind(wl, w);
    b.Bind(xl, x);
    b.Bind(pl, p);
    const float out = g.Evaluate(b)[0];
    auto grads = g.Backpropagate(Tensor<float>({1}, {1}));
    return std::make_tuple(out, grads.at(wl), grads.at(pl));
  };
  auto [o1, gw1, gp1] = run();
  auto [o2, gw2, gp2] = run();
  CHECK(std::memcmp(&o1, &o2, sizeof(float)) == 0);
  CHECK(std::memcmp(gw1.data().data(), gw2.data().data(), gw1.size() * 4) == 0);
  CHECK(std::memcmp(gp1.data().data(), gp2.data().data(), gp1.size() * 4) == 0);
}

TEST_CASE("Adam only moves coordinates that received gradient") {
  Tensor<float> p({4}, {1, 2, 3, 4});
  p.set_requires_grad(true);
  Adam adam({0.1, 0.9, 0.999, 1e-8});
  adam.Register(&p);
  CHECK(adam.state_size() == 4);
  std::vector<float> g{1.0f, 0.0f, -2.0f, 0.0f};
  p.AccumulateGrad(g);
  adam.Step();
  CHECK(p[0] == doctest::Approx(0.9).epsilon(1e-5));
  CHECK(p[1] == 2.0f);
  CHECK(p[2] == doctest::Approx(3.1).epsilon(1e-5));
  CHECK(p[3] == 4.0f);
  CHECK(p.grad()[0] == 0.0f);
  Tensor<float> frozen({2});
  CHECK(CodeOf([&] { adam.Register(&frozen); }) == Errc::kInvalidArgument);
}
