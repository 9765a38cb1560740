/*
 * Copyright 2026 The ma3srn Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "diffcore/errors.hpp"
#include "diffcore/gradcheck.hpp"
#include "diffcore/graph.hpp"
#include "diffcore/ops.hpp"
#include "diffcore/parameters.hpp"
#include "support/testing.hpp"

using namespace ma3srn;
using ma3srn::testing::check_primitive;
using ma3srn::testing::random_tensor;

namespace {

constexpr int kTrials = 100;

// Runs a primitive's gradient check on kTrials random instances.
void sweep(const char* name, const std::function<std::vector<Tensor>(std::mt19937_64&)>& make,
           const ma3srn::testing::PrimitiveBody& body) {
  std::mt19937_64 rng(std::hash<std::string>{}(name) ^ 0x9e37u);
  double worst = 0.0;
  for (int trial = 0; trial < kTrials; ++trial) {
    const auto report = check_primitive(make(rng), body, rng());
    worst = std::max(worst, report.worst_relative_error);
    INFO(name << " trial " << trial);
    REQUIRE(report.passed());
  }
  CHECK(worst <= 1e-5);
}

Shape rand_shape(std::mt19937_64& rng, std::size_t rank, std::size_t lo = 1, std::size_t hi = 4) {
  Shape s(rank);
  for (auto& e : s) e = std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  return s;
}

}  // namespace

TEST_CASE("tensor rejects inconsistent shapes") {
  CHECK_THROWS_AS(Tensor({2, 0}), ShapeError);
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
  Tensor t({2, 3});
  CHECK(t.size() == 6);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
}

TEST_CASE("primitive forward values") {
  Graph g;
  SUBCASE("softmax of equal logits is uniform") {
    Var s = ops::softmax(g.constant(Tensor({2}, {0.0, 0.0})), 0);
    CHECK(s.value()[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(s.value()[1] == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("sigmoid at zero") { CHECK(ops::sigmoid(g.constant(Tensor::scalar(0.0))).value()[0] == 0.5); }
  SUBCASE("identity matmul") {
    Var i2 = g.constant(Tensor({2, 2}, {1, 0, 0, 1}));
    Var x = g.constant(Tensor({2, 2}, {3, 4, 5, 6}));
    CHECK(ops::matmul(i2, x).value() == x.value());
  }
  SUBCASE("smooth l1 branches") {
    Var y = ops::smooth_l1(g.constant(Tensor({3}, {0.5, -2.0, 1.0})));
    CHECK(y.value()[0] == doctest::Approx(0.125));
    CHECK(y.value()[1] == doctest::Approx(1.5));
    CHECK(y.value()[2] == doctest::Approx(0.5));
  }
  SUBCASE("binary cross entropy clamps saturated probabilities") {
    Var p = g.constant(Tensor({2}, {0.0, 1.0}));
    Var l = ops::binary_cross_entropy(p, Tensor({2}, {1.0, 0.0}));
    CHECK(std::isfinite(l.value()[0]));
    CHECK(l.value()[0] == doctest::Approx(-std::log(1e-7)));
  }
  SUBCASE("conv1d with a centre tap only is a per-frame linear map") {
    // k = 3, C_in = 1, C_out = 1: taps (0, 2, 0) double every frame.
    Var x = g.constant(Tensor({4, 1}, {1, 2, 3, 4}));
    Var w = g.constant(Tensor({3, 1}, {0, 2, 0}));
    Var b = g.constant(Tensor({1}, {0.5}));
    Var y = ops::conv1d(x, w, b);
    CHECK(y.value() == Tensor({4, 1}, {2.5, 4.5, 6.5, 8.5}));
  }
  SUBCASE("conv1d pads with zeros at the borders") {
    Var x = g.constant(Tensor({3, 1}, {1, 2, 3}));
    Var w = g.constant(Tensor({3, 1}, {1, 1, 1}));
    Var b = g.constant(Tensor({1}, {0.0}));
    CHECK(ops::conv1d(x, w, b).value() == Tensor({3, 1}, {3, 6, 5}));
  }
}

TEST_CASE("shape errors name the op and the extents") {
  Graph g;
  Var a = g.constant(Tensor({2, 3}));
  Var b = g.constant(Tensor({4, 2}));
  try {
    ops::matmul(a, b);
    FAIL("expected a shape error");
  } catch (const ShapeError& e) {
    const std::string what = e.what();
    CHECK(what.find("matmul") != std::string::npos);
    CHECK(what.find("[2,3]") != std::string::npos);
  }
  CHECK_THROWS_AS(ops::add(a, b), ShapeError);
  CHECK_THROWS_AS(ops::softmax(a, 2), ShapeError);
}

TEST_CASE("binary cross entropy rejects invalid inputs") {
  Graph g;
  Var p = g.constant(Tensor({1}, {std::nan("")}));
  CHECK_THROWS_AS(ops::binary_cross_entropy(p, Tensor({1}, {0.5})), DomainError);
  Var q = g.constant(Tensor({1}, {0.5}));
  CHECK_THROWS_AS(ops::binary_cross_entropy(q, Tensor({1}, {1.5})), DomainError);
}

TEST_CASE("backward on analytic examples") {
  ParameterStore store;
  auto& x = store.add("x", Tensor::scalar(3.0));
  {
    Graph g;
    Var v = g.parameter(x);
    g.backward(ops::mul(v, v));
    CHECK(x.grad[0] == doctest::Approx(6.0).epsilon(1e-15));
  }
  store.zero_grad();
  x.value[0] = 0.0;
  {
    Graph g;
    g.backward(ops::sigmoid(g.parameter(x)));
    CHECK(x.grad[0] == doctest::Approx(0.25).epsilon(1e-15));
  }
}

TEST_CASE("backward requires a scalar loss and leaves unreachable parameters at zero") {
  ParameterStore store;
  auto& used = store.add("used", Tensor({2}, {1.0, 2.0}));
  auto& unused = store.add("unused", Tensor({2}, {5.0, 6.0}));
  Graph g;
  Var u = g.parameter(used);
  g.parameter(unused);
  CHECK_THROWS_AS(g.backward(u), ShapeError);
  g.backward(ops::sum_all(u));
  CHECK(used.grad == Tensor({2}, {1.0, 1.0}));
  CHECK(unused.grad == Tensor({2}, {0.0, 0.0}));
}

TEST_CASE("graph nodes may only consume earlier nodes") {
  Graph g;
  Var a = g.constant(Tensor::scalar(1.0));
  CHECK_THROWS_AS(g.record("bogus", Tensor::scalar(0.0), {a.id() + 1}, nullptr), std::logic_error);
}

TEST_CASE("softmax rows are distributions") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const Shape s = rand_shape(rng, 3, 1, 6);
    const std::size_t axis = trial % 3;
    Graph g;
    Tensor x = random_tensor(s, rng, -30.0, 30.0);
    const Tensor y = ops::softmax(g.constant(x), axis).value();
    // Sum along the axis by index arithmetic.
    std::size_t inner = 1;
    for (std::size_t i = axis + 1; i < 3; ++i) inner *= s[i];
    const std::size_t outer = x.size() / (inner * s[axis]);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t in = 0; in < inner; ++in) {
        double sum = 0.0;
        for (std::size_t k = 0; k < s[axis]; ++k) {
          const double v = y[(o * s[axis] + k) * inner + in];
          REQUIRE(v >= 0.0);
          sum += v;
        }
        REQUIRE(std::abs(sum - 1.0) <= 1e-6);
      }
  }
}

TEST_CASE("backward is linear in the loss") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    ParameterStore store;
    auto& w = store.add("w", random_tensor({3, 4}, rng));
    const Tensor x = random_tensor({2, 3}, rng);
    auto f1 = [&](Graph& g) { return ops::sum_all(ops::tanh(ops::matmul(g.constant(x), g.parameter(w)))); };
    auto f2 = [&](Graph& g) { return ops::mean_all(ops::mul(g.parameter(w), g.parameter(w))); };
    store.zero_grad();
    {
      Graph g;
      g.backward(f1(g));
    }
    {
      Graph g;
      g.backward(f2(g));
    }
    const Tensor separate = w.grad;
    store.zero_grad();
    {
      Graph g;
      g.backward(ops::add(f1(g), f2(g)));
    }
    REQUIRE(ma3srn::testing::max_abs_diff(separate, w.grad) <= 1e-12);
  }
}

TEST_CASE("evaluating the same graph twice is bitwise identical") {
  std::mt19937_64 rng(3);
  const Tensor x = random_tensor({5, 6}, rng);
  const Tensor w = random_tensor({6, 6}, rng);
  auto run = [&] {
    Graph g;
    Var h = ops::softmax(ops::matmul(g.constant(x), g.constant(w)), 1);
    return ops::layer_norm(h, g.constant(Tensor::filled({6}, 1.0)), g.constant(Tensor({6}))).value();
  };
  CHECK(run() == run());
}

TEST_CASE("gradients of every primitive match central differences") {
  using V = std::vector<Var>;
  auto one = [](Shape s) {
    return [s](std::mt19937_64& rng) { return std::vector<Tensor>{random_tensor(s, rng)}; };
  };
  auto pair_same = [](std::mt19937_64& rng) {
    const Shape s = rand_shape(rng, 2);
    return std::vector<Tensor>{random_tensor(s, rng), random_tensor(s, rng)};
  };
  auto pair_broadcast = [](std::mt19937_64& rng) {
    const Shape s = rand_shape(rng, 3);
    const Shape small{1, s[2]};
    return std::vector<Tensor>{random_tensor(s, rng), random_tensor(small, rng)};
  };

  sweep("add", pair_same, [](Graph&, V& x) { return ops::add(x[0], x[1]); });
  sweep("add broadcast", pair_broadcast, [](Graph&, V& x) { return ops::add(x[0], x[1]); });
  sweep("sub broadcast", pair_broadcast, [](Graph&, V& x) { return ops::sub(x[0], x[1]); });
  sweep("mul", pair_same, [](Graph&, V& x) { return ops::mul(x[0], x[1]); });
  sweep("mul broadcast", pair_broadcast, [](Graph&, V& x) { return ops::mul(x[1], x[0]); });
  sweep(
      "div",
      [](std::mt19937_64& rng) {
        const Shape s = rand_shape(rng, 2);
        return std::vector<Tensor>{random_tensor(s, rng), random_tensor(s, rng, 0.5, 2.0)};
      },
      [](Graph&, V& x) { return ops::div(x[0], x[1]); });
  sweep("scale", one({3, 4}), [](Graph&, V& x) { return ops::scale(x[0], -1.7); });
  sweep("shift", one({3, 4}), [](Graph&, V& x) { return ops::shift(x[0], 0.3); });
  sweep(
      "matmul",
      [](std::mt19937_64& rng) {
        const Shape s = rand_shape(rng, 3);
        return std::vector<Tensor>{random_tensor({s[0], s[1]}, rng), random_tensor({s[1], s[2]}, rng)};
      },
      [](Graph&, V& x) { return ops::matmul(x[0], x[1]); });
  sweep(
      "matmul rank3 by matrix",
      [](std::mt19937_64& rng) {
        const Shape s = rand_shape(rng, 4);
        return std::vector<Tensor>{random_tensor({s[0], s[1], s[2]}, rng), random_tensor({s[2], s[3]}, rng)};
      },
      [](Graph&, V& x) { return ops::matmul(x[0], x[1]); });
  sweep(
      "batched matmul",
      [](std::mt19937_64& rng) {
        const Shape s = rand_shape(rng, 4);
        return std::vector<Tensor>{random_tensor({s[0], s[1], s[2]}, rng), random_tensor({s[0], s[2], s[3]}, rng)};
      },
      [](Graph&, V& x) { return ops::matmul(x[0], x[1]); });
  sweep("transpose", one({2, 3, 4}), [](Graph&, V& x) { return ops::transpose(x[0]); });
  sweep("reshape", one({2, 6}), [](Graph&, V& x) { return ops::reshape(x[0], {3, 4}); });
  sweep("expand", one({3, 2}), [](Graph&, V& x) { return ops::expand(x[0], 1, 3); });
  sweep(
      "concat", [](std::mt19937_64& rng) {
        return std::vector<Tensor>{random_tensor({2, 3}, rng), random_tensor({2, 2}, rng)};
      },
      [](Graph&, V& x) { return ops::concat({x[0], x[1]}, 1); });
  sweep(
      "concat rows", [](std::mt19937_64& rng) {
        return std::vector<Tensor>{random_tensor({2, 3}, rng), random_tensor({1, 3}, rng)};
      },
      [](Graph&, V& x) { return ops::concat({x[0], x[1]}, 0); });
  sweep("slice", one({4, 5}), [](Graph&, V& x) { return ops::slice(x[0], 1, 1, 4); });
  sweep("gather", one({3, 4}), [](Graph&, V& x) { return ops::gather(x[0], {0, 5, 5, 11, 2}); });
  sweep("softmax last axis", one({3, 5}), [](Graph&, V& x) { return ops::softmax(x[0], 1); });
  sweep("softmax first axis", one({4, 3}), [](Graph&, V& x) { return ops::softmax(x[0], 0); });
  sweep(
      "masked fill", one({3, 4}), [](Graph&, V& x) {
        return ops::softmax(ops::masked_fill(x[0], Tensor({1, 4}, {1, 0, 1, 1}), -1e30), 1);
      });
  sweep("sigmoid", one({3, 4}), [](Graph&, V& x) { return ops::sigmoid(x[0]); });
  sweep("tanh", one({3, 4}), [](Graph&, V& x) { return ops::tanh(x[0]); });
  sweep("relu", one({3, 4}), [](Graph&, V& x) { return ops::relu(x[0]); });
  sweep("sum", one({3, 4}), [](Graph&, V& x) { return ops::sum(x[0], 0); });
  sweep("mean", one({3, 4}), [](Graph&, V& x) { return ops::mean(x[0], 1); });
  sweep("sum all", one({3, 4}), [](Graph&, V& x) { return ops::sum_all(x[0]); });
  sweep("mean all", one({3, 4}), [](Graph&, V& x) { return ops::mean_all(x[0]); });
  sweep("l2 norm", one({3, 4}), [](Graph&, V& x) { return ops::l2_norm(x[0], 1, 1e-8); });
  sweep(
      "layer norm", [](std::mt19937_64& rng) {
        return std::vector<Tensor>{random_tensor({3, 5}, rng), random_tensor({5}, rng), random_tensor({5}, rng)};
      },
      [](Graph&, V& x) { return ops::layer_norm(x[0], x[1], x[2]); });
  sweep(
      "conv1d", [](std::mt19937_64& rng) {
        return std::vector<Tensor>{random_tensor({5, 3}, rng), random_tensor({9, 2}, rng), random_tensor({2}, rng)};
      },
      [](Graph&, V& x) { return ops::conv1d(x[0], x[1], x[2]); });
  sweep("smooth l1", one({3, 4}), [](Graph&, V& x) { return ops::smooth_l1(x[0]); });
  sweep(
      "binary cross entropy", [](std::mt19937_64& rng) {
        return std::vector<Tensor>{random_tensor({6}, rng)};
      },
      [](Graph&, V& x) {
        // Fixed targets spread over [0.05, 0.95]; only p is differentiated.
        Tensor target({6});
        for (std::size_t i = 0; i < 6; ++i) target[i] = 0.05 + 0.9 * std::fmod(0.618034 * static_cast<double>(i + 1), 1.0);
        return ops::binary_cross_entropy(ops::sigmoid(x[0]), target);
      });
  sweep(
      "linear", [](std::mt19937_64& rng) {
        return std::vector<Tensor>{random_tensor({3, 4}, rng), random_tensor({4, 2}, rng), random_tensor({2}, rng)};
      },
      [](Graph&, V& x) { return ops::linear(x[0], x[1], x[2]); });
}

TEST_CASE("single linear layer with cross entropy passes a tight check") {
  std::mt19937_64 rng(21);
  ParameterStore store;
  auto& w = store.add("w", random_tensor({4, 3}, rng));
  auto& b = store.add("b", Tensor({3}));
  const Tensor x = random_tensor({5, 4}, rng);
  const Tensor y = random_tensor({5, 3}, rng, 0.0, 1.0);
  const auto report = finite_difference_check(
      store,
      [&](Graph& g) {
        return ops::mean_all(
            ops::binary_cross_entropy(ops::sigmoid(ops::linear(g.constant(x), g.parameter(w), g.parameter(b))), y));
      },
      1e-4, 1e-5);
  CHECK(report.checked == 15);
  CHECK(report.passed());
}

TEST_CASE("gradient check of a parameterless loss is empty") {
  ParameterStore store;
  const auto report =
      finite_difference_check(store, [](Graph& g) { return g.constant(Tensor::scalar(1.0)); }, 1e-4, 1e-3);
  CHECK(report.checked == 0);
  CHECK(report.worst.empty());
  CHECK(report.passed());
}

TEST_CASE("gradient check reports a wrong gradient instead of throwing") {
  // A backward rule that doubles the true derivative.
  ParameterStore store;
  auto& x = store.add("x", Tensor({2}, {0.3, -0.7}));
  const auto report = finite_difference_check(
      store,
      [&](Graph& g) {
        Var v = g.parameter(x);
        Var y = g.record("bad_square", Tensor({2}, {v.value()[0] * v.value()[0], v.value()[1] * v.value()[1]}),
                         {v.id()}, [](Graph& gg, const Graph::Node& n) {
                           auto& gx = gg.grad(n.inputs[0]);
                           const auto& xv = gg.value(n.inputs[0]);
                           for (std::size_t i = 0; i < 2; ++i) gx[i] += n.grad[i] * 4.0 * xv[i];
                         });
        return ops::sum_all(y);
      },
      1e-4, 1e-3);
  CHECK(report.checked == 2);
  CHECK(report.failed == 2);
  CHECK(report.worst.front().relative_error == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(x.value == Tensor({2}, {0.3, -0.7}));
}

TEST_CASE("parameter store invariants") {
  std::mt19937_64 rng(1);
  ParameterStore store;
  store.add("a.W", glorot_matrix(3, 2, rng));
  CHECK_THROWS_AS(store.add("a.W", Tensor({1})), ValidationError);
  for (const auto& p : store) CHECK(p->grad.shape() == p->value.shape());
  const auto w = glorot_matrix(30, 20, rng);
  const double bound = std::sqrt(6.0 / 50.0);
  for (double v : w.values()) CHECK(std::abs(v) <= bound);
}
