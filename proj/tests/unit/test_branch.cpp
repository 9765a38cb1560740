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
#include <numeric>
#include <random>

#include "diffcore/ops.hpp"
#include "model/branch.hpp"
#include "model/encoders.hpp"
#include "support/testing.hpp"

using namespace ma3srn;
using ma3srn::testing::random_tensor;

namespace {

EncodedQuery make_query(Graph& g, const Tensor& words, std::vector<std::uint8_t> mask, const Tensor& sentence) {
  EncodedQuery q;
  q.words = g.constant(words);
  q.sentence = g.constant(sentence);
  q.mask = std::move(mask);
  return q;
}

void set(ParameterStore& p, const std::string& name, Tensor value) {
  auto& param = p.get(name);
  REQUIRE(param.value.shape() == value.shape());
  param.value = std::move(value);
}

}  // namespace

TEST_CASE("textual gate") {
  std::mt19937_64 rng(11);
  ParameterStore params;
  ReasoningBranch branch(params, Stream::appearance, 4, {}, rng);
  const Tensor objects = random_tensor({6, 4}, rng);

  SUBCASE("a single word is the whole textual context") {
    // With W3 = I and b2 = 0 the gate is sigmoid(q_1) for every object.
    Tensor eye({4, 4});
    for (std::size_t i = 0; i < 4; ++i) eye.at(i, i) = 1.0;
    set(params, "branch.appearance.W3", eye);
    Graph g;
    const Tensor word = random_tensor({1, 4}, rng);
    const Tensor out = branch.interact(g, g.constant(objects), make_query(g, word, {1}, Tensor({1, 4}))).value();
    for (std::size_t r = 0; r < 6; ++r)
      for (std::size_t j = 0; j < 4; ++j)
        CHECK(out.at(r, j) == doctest::Approx(objects.at(r, j) / (1.0 + std::exp(-word[j]))).epsilon(1e-14));
  }
  SUBCASE("zero gate weights halve every feature") {
    set(params, "branch.appearance.W3", Tensor({4, 4}));
    Graph g;
    const Tensor out =
        branch.interact(g, g.constant(objects), make_query(g, random_tensor({3, 4}, rng), {1, 1, 0}, Tensor({1, 4})))
            .value();
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == 0.5 * objects[i]);
  }
  SUBCASE("gate attenuates every nonzero coordinate") {
    for (int trial = 0; trial < 100; ++trial) {
      Graph g;
      const Tensor f = random_tensor({6, 4}, rng);
      const Tensor out =
          branch.interact(g, g.constant(f), make_query(g, random_tensor({3, 4}, rng), {1, 1, 1}, Tensor({1, 4})))
              .value();
      for (std::size_t i = 0; i < f.size(); ++i) REQUIRE(std::abs(out[i]) < std::abs(f[i]));
    }
  }
  SUBCASE("disabled gate is the identity") {
    ParameterStore other;
    ReasoningBranch plain(other, Stream::motion, 4, {false, 1}, rng);
    Graph g;
    const Tensor out =
        plain.interact(g, g.constant(objects), make_query(g, random_tensor({2, 4}, rng), {1, 1}, Tensor({1, 4})))
            .value();
    CHECK(out == objects);
  }
}

TEST_CASE("textual gate on one object and two words") {
  std::mt19937_64 rng(1);
  ParameterStore params;
  ReasoningBranch branch(params, Stream::motion, 2, {}, rng);
  set(params, "branch.motion.W1", Tensor({2, 2}, {0.5, -0.2, 0.1, 0.3}));
  set(params, "branch.motion.W2", Tensor({2, 2}, {-0.4, 0.2, 0.6, 0.1}));
  set(params, "branch.motion.b1", Tensor({2}, {0.05, -0.1}));
  set(params, "branch.motion.w", Tensor({2, 1}, {0.7, -0.3}));
  set(params, "branch.motion.W3", Tensor({2, 2}, {0.2, 0.4, -0.5, 0.3}));
  set(params, "branch.motion.b2", Tensor({2}, {0.1, 0.0}));
  const Tensor f({1, 2}, {1.0, -2.0});
  const Tensor q({2, 2}, {0.3, 0.8, -0.6, 0.2});
  Graph g;
  const Tensor out = branch.interact(g, g.constant(f), make_query(g, q, {1, 1}, Tensor({1, 2}))).value();
  // Row-vector convention: f W1 + q_n W2 + b1, then scores through w.
  // fW1 = (0.3, -0.8); q1W2 = (0.36, 0.14); q2W2 = (0.36, -0.1)
  const double m1 = 0.7 * std::tanh(0.3 + 0.36 + 0.05) - 0.3 * std::tanh(-0.8 + 0.14 - 0.1);
  const double m2 = 0.7 * std::tanh(0.3 + 0.36 + 0.05) - 0.3 * std::tanh(-0.8 - 0.1 - 0.1);
  const double a1 = 1.0 / (1.0 + std::exp(m2 - m1)), a2 = 1.0 - a1;
  const double c0 = a1 * 0.3 + a2 * -0.6, c1 = a1 * 0.8 + a2 * 0.2;
  const double g0 = 1.0 / (1.0 + std::exp(-(c0 * 0.2 + c1 * -0.5 + 0.1)));
  const double g1 = 1.0 / (1.0 + std::exp(-(c0 * 0.4 + c1 * 0.3)));
  CHECK(out[0] == doctest::Approx(g0 * 1.0).epsilon(1e-14));
  CHECK(out[1] == doctest::Approx(g1 * -2.0).epsilon(1e-14));
}

TEST_CASE("padded words are excluded from the word attention") {
  std::mt19937_64 rng(21);
  ParameterStore params;
  ReasoningBranch branch(params, Stream::threed, 4, {}, rng);
  const Tensor f = random_tensor({5, 4}, rng);
  const Tensor words = random_tensor({2, 4}, rng);
  Tensor padded({4, 4});
  std::copy(words.values().begin(), words.values().end(), padded.values().begin());
  for (std::size_t i = 8; i < 16; ++i) padded[i] = 9.0;
  Graph g;
  const Tensor a = branch.interact(g, g.constant(f), make_query(g, words, {1, 1}, Tensor({1, 4}))).value();
  const Tensor b = branch.interact(g, g.constant(f), make_query(g, padded, {1, 1, 0, 0}, Tensor({1, 4}))).value();
  CHECK(ma3srn::testing::max_abs_diff(a, b) <= 1e-12);
}

TEST_CASE("graph reasoning") {
  std::mt19937_64 rng(31);
  ParameterStore params;
  ReasoningBranch branch(params, Stream::appearance, 2, {}, rng);

  SUBCASE("zero W7 passes features through") {
    set(params, "branch.appearance.W7", Tensor({2, 2}));
    Graph g;
    const Tensor f = random_tensor({6, 2}, rng);
    CHECK(branch.reason(g, g.constant(f)).features.value() == f);
  }
  SUBCASE("a single node attends to itself") {
    Graph g;
    const auto r = branch.reason(g, g.constant(random_tensor({1, 2}, rng)));
    REQUIRE(r.adjacency.size() == 1);
    CHECK(r.adjacency[0] == Tensor({1, 1}, {1.0}));
  }
  SUBCASE("three nodes by hand") {
    set(params, "branch.appearance.W4", Tensor({2, 2}, {1.0, 0.0, 0.0, 1.0}));
    set(params, "branch.appearance.W5", Tensor({2, 2}, {0.5, 0.0, 0.0, -1.0}));
    set(params, "branch.appearance.W6", Tensor({2, 2}, {1.0, 1.0, 0.0, 1.0}));
    set(params, "branch.appearance.W7", Tensor({2, 2}, {0.5, 0.0, 0.0, 2.0}));
    const Tensor f({3, 2}, {1.0, 0.0, 0.0, 1.0, 1.0, 1.0});
    // L = F, R = F diag(0.5, -1): rows (0.5,0), (0,-1), (0.5,-1).
    // logits row i: L_i . R_j
    const double logits[3][3] = {{0.5, 0.0, 0.5}, {0.0, -1.0, -1.0}, {0.5, -1.0, -0.5}};
    double a[3][3];
    for (int i = 0; i < 3; ++i) {
      double z = 0.0;
      for (int j = 0; j < 3; ++j) z += std::exp(logits[i][j]);
      for (int j = 0; j < 3; ++j) a[i][j] = std::exp(logits[i][j]) / z;
    }
    Graph g;
    const auto r = branch.reason(g, g.constant(f));
    for (int i = 0; i < 3; ++i) {
      // AF, then W6 = [[1,1],[0,1]] gives (x, x + y), then W7 = diag(0.5, 2).
      double x = 0.0, y = 0.0;
      for (int j = 0; j < 3; ++j) {
        x += a[i][j] * f.at(j, 0);
        y += a[i][j] * f.at(j, 1);
        CHECK(r.adjacency[0].at(i, j) == doctest::Approx(a[i][j]).epsilon(1e-14));
      }
      CHECK(r.features.value().at(i, 0) == doctest::Approx(0.5 * x + f.at(i, 0)).epsilon(1e-14));
      CHECK(r.features.value().at(i, 1) == doctest::Approx(2.0 * (x + y) + f.at(i, 1)).epsilon(1e-14));
    }
  }
  SUBCASE("adjacency rows are distributions") {
    ParameterStore wide;
    ReasoningBranch b8(wide, Stream::motion, 8, {}, rng);
    for (int trial = 0; trial < 100; ++trial) {
      Graph g;
      const auto r = b8.reason(g, g.constant(random_tensor({12, 8}, rng)));
      const Tensor& a = r.adjacency[0];
      for (std::size_t i = 0; i < 12; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < 12; ++j) {
          REQUIRE(a.at(i, j) >= 0.0);
          sum += a.at(i, j);
        }
        REQUIRE(std::abs(sum - 1.0) <= 1e-6);
      }
    }
  }
  SUBCASE("zero layers disable reasoning") {
    ParameterStore none;
    ReasoningBranch b0(none, Stream::motion, 2, {true, 0}, rng);
    Graph g;
    const Tensor f = random_tensor({4, 2}, rng);
    const auto r = b0.reason(g, g.constant(f));
    CHECK(r.adjacency.empty());
    CHECK(r.features.value() == f);
    CHECK(none.find("branch.motion.W4") == nullptr);
  }
}

TEST_CASE("object fusion") {
  std::mt19937_64 rng(41);
  ParameterStore params;
  ReasoningBranch branch(params, Stream::threed, 2, {}, rng);

  SUBCASE("one object per frame is passed through") {
    Graph g;
    const Tensor f = random_tensor({3, 2}, rng);
    const auto out = branch.fuse(g, g.constant(f), g.constant(random_tensor({1, 2}, rng)), 3, 1);
    CHECK(ma3srn::testing::max_abs_diff(out.frames.value(), f) <= 1e-15);
  }
  SUBCASE("identical objects fuse to themselves") {
    Graph g;
    const Tensor f({2, 2}, {0.3, -0.7, 0.3, -0.7});
    const auto out = branch.fuse(g, g.constant(f), g.constant(random_tensor({1, 2}, rng)), 1, 2);
    CHECK(out.frames.value().at(0, 0) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(out.frames.value().at(0, 1) == doctest::Approx(-0.7).epsilon(1e-15));
  }
  SUBCASE("two objects by hand") {
    set(params, "branch.threed.Wq", Tensor({2, 2}, {1.0, 0.0, 0.0, 1.0}));
    const Tensor f({2, 2}, {3.0, 4.0, 1.0, 0.0});
    const Tensor q({1, 2}, {0.0, 2.0});
    Graph g;
    const auto out = branch.fuse(g, g.constant(f), g.constant(q), 1, 2);
    // cos((3,4),(0,2)) = 0.8, cos((1,0),(0,2)) = 0
    CHECK(out.object_scores[0] == doctest::Approx(0.8).epsilon(1e-14));
    CHECK(out.object_scores[1] == doctest::Approx(0.0).epsilon(1e-14));
    const double w0 = 1.0 / (1.0 + std::exp(-0.8));
    CHECK(out.object_weights[0] == doctest::Approx(w0).epsilon(1e-14));
    CHECK(out.frames.value()[0] == doctest::Approx(3.0 * w0 + (1.0 - w0)).epsilon(1e-14));
    CHECK(out.frames.value()[1] == doctest::Approx(4.0 * w0).epsilon(1e-14));
  }
  SUBCASE("zero vectors use the floored norm") {
    Graph g;
    const auto out = branch.fuse(g, g.constant(Tensor({2, 2})), g.constant(Tensor({1, 2})), 1, 2);
    CHECK(out.object_scores[0] == 0.0);
    CHECK(out.object_weights[0] == 0.5);
  }
  SUBCASE("weights, cosines and convex hull") {
    ParameterStore wide;
    ReasoningBranch b8(wide, Stream::appearance, 8, {}, rng);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t T = 3, K = 4;
      Graph g;
      const Tensor f = random_tensor({T * K, 8}, rng);
      const auto out = b8.fuse(g, g.constant(f), g.constant(random_tensor({1, 8}, rng)), T, K);
      for (std::size_t t = 0; t < T; ++t) {
        double sum = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
          REQUIRE(out.object_weights.at(t, k) >= 0.0);
          REQUIRE(std::abs(out.object_scores.at(t, k)) <= 1.0 + 1e-12);
          sum += out.object_weights.at(t, k);
        }
        REQUIRE(std::abs(sum - 1.0) <= 1e-6);
        for (std::size_t j = 0; j < 8; ++j) {
          double lo = 1e300, hi = -1e300;
          for (std::size_t k = 0; k < K; ++k) {
            lo = std::min(lo, f.at(t * K + k, j));
            hi = std::max(hi, f.at(t * K + k, j));
          }
          REQUIRE(out.frames.value().at(t, j) >= lo - 1e-6);
          REQUIRE(out.frames.value().at(t, j) <= hi + 1e-6);
        }
      }
    }
  }
}

TEST_CASE("frame features are invariant to object order") {
  std::mt19937_64 rng(51);
  const std::size_t T = 3, K = 4, din = 5, D = 8;
  ParameterStore params;
  StreamEncoder enc(params, Stream::motion, {T, K, din, D}, rng);
  ReasoningBranch branch(params, Stream::motion, D, {}, rng);
  std::uniform_real_distribution<double> u(0.0, 0.45);
  for (int trial = 0; trial < 100; ++trial) {
    StreamObjectFeatures f;
    f.stream = Stream::motion;
    f.local = random_tensor({T, K, din}, rng);
    f.global = random_tensor({T, din}, rng);
    f.boxes = Tensor({T, K, 4});
    for (std::size_t i = 0; i < T * K; ++i) {
      f.boxes[4 * i] = u(rng);
      f.boxes[4 * i + 1] = u(rng);
      f.boxes[4 * i + 2] = 0.5 + u(rng);
      f.boxes[4 * i + 3] = 0.5 + u(rng);
    }
    auto permuted = f;
    for (std::size_t t = 0; t < T; ++t) {
      std::vector<std::size_t> perm(K);
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      std::shuffle(perm.begin(), perm.end(), rng);
      for (std::size_t k = 0; k < K; ++k) {
        const std::size_t src = t * K + perm[k], dst = t * K + k;
        for (std::size_t i = 0; i < din; ++i) permuted.local[dst * din + i] = f.local[src * din + i];
        for (std::size_t i = 0; i < 4; ++i) permuted.boxes[dst * 4 + i] = f.boxes[src * 4 + i];
      }
    }
    Graph g;
    const auto q = make_query(g, random_tensor({3, D}, rng), {1, 1, 1}, random_tensor({1, D}, rng));
    const Tensor a = branch.forward(g, enc.encode(g, f), q, T, K).frames.value();
    const Tensor b = branch.forward(g, enc.encode(g, permuted), q, T, K).frames.value();
    REQUIRE(ma3srn::testing::max_abs_diff(a, b) <= 1e-5);
  }
}

TEST_CASE("branches of different streams share no parameters") {
  std::mt19937_64 rng(61);
  ParameterStore params;
  ReasoningBranch a(params, Stream::appearance, 4, {}, rng);
  const std::size_t after_one = params.size();
  ReasoningBranch m(params, Stream::motion, 4, {}, rng);
  CHECK(params.size() == 2 * after_one);
  CHECK(params.get("branch.appearance.W1").value != params.get("branch.motion.W1").value);
}
