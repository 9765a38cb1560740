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

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "diffcore/graph.hpp"

// Differentiable primitives. Every op evaluates eagerly and records its
// backward rule on the operands' graph.
//
// Broadcasting (add/sub/mul/div/masked_fill): the smaller operand is aligned
// to the right of the larger one; each of its extents must equal the
// corresponding extent or be 1, and missing leading axes count as 1.
//
// Reductions keep the reduced axis with extent 1.
namespace ma3srn::ops {

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);

Var scale(Var a, double factor);
Var shift(Var a, double offset);

// [..., m, k] x [k, n] -> [..., m, n], or batched [B, m, k] x [B, k, n] -> [B, m, n].
Var matmul(Var a, Var b);
// Swaps the last two axes.
Var transpose(Var a);
Var reshape(Var a, Shape shape);
// Inserts a new axis at `axis` repeating the input `count` times.
Var expand(Var a, std::size_t axis, std::size_t count);
Var concat(std::span<const Var> parts, std::size_t axis);
Var concat(std::initializer_list<Var> parts, std::size_t axis);
// Half-open range [begin, end) along `axis`.
Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end);
// Flat-index gather into a rank-1 result.
Var gather(Var a, std::vector<std::size_t> flat_indices);

Var softmax(Var a, std::size_t axis);
// Entries where `keep` is 0 are replaced by `fill` and receive no gradient.
Var masked_fill(Var a, const Tensor& keep, double fill);

Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);

Var sum(Var a, std::size_t axis);
Var mean(Var a, std::size_t axis);
Var sum_all(Var a);
Var mean_all(Var a);
// max(||a||_2, floor) along `axis`.
Var l2_norm(Var a, std::size_t axis, double floor);

// Normalises over the last axis, then applies per-channel gain and bias.
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);

// Length-preserving temporal convolution with zero padding.
// x [T, C_in], weight [k * C_in, C_out] (tap-major rows), bias [C_out]; k odd.
Var conv1d(Var x, Var weight, Var bias);

// 0.5 x^2 for |x| < 1, |x| - 0.5 otherwise.
Var smooth_l1(Var a);

inline constexpr double kProbabilityClamp = 1e-7;

// Elementwise -(y log p + (1 - y) log(1 - p)) with p clamped to
// [1e-7, 1 - 1e-7]; zero gradient where the clamp is active.
Var binary_cross_entropy(Var p, const Tensor& target);

// x W + b.
Var linear(Var x, Var weight, Var bias);

}  // namespace ma3srn::ops
