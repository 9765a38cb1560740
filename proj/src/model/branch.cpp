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

#include "model/branch.hpp"

#include <string>

#include "diffcore/errors.hpp"
#include "diffcore/ops.hpp"

namespace ma3srn {

ReasoningBranch::ReasoningBranch(ParameterStore& params, Stream stream, std::size_t dim, const BranchOptions& options,
                                 std::mt19937_64& rng)
    : stream_(stream), options_(options) {
  const std::string prefix = "branch." + std::string(stream_name(stream)) + ".";
  w1_ = &params.add(prefix + "W1", glorot_matrix(dim, dim, rng));
  w2_ = &params.add(prefix + "W2", glorot_matrix(dim, dim, rng));
  b1_ = &params.add(prefix + "b1", Tensor({dim}));
  w_ = &params.add(prefix + "w", glorot_matrix(dim, 1, rng));
  w3_ = &params.add(prefix + "W3", glorot_matrix(dim, dim, rng));
  b2_ = &params.add(prefix + "b2", Tensor({dim}));
  for (std::size_t l = 0; l < options.graph_layers; ++l) {
    const std::string lp = l == 0 ? prefix : prefix + "graph" + std::to_string(l) + ".";
    GraphLayer layer;
    layer.w4 = &params.add(lp + "W4", glorot_matrix(dim, dim, rng));
    layer.w5 = &params.add(lp + "W5", glorot_matrix(dim, dim, rng));
    layer.w6 = &params.add(lp + "W6", glorot_matrix(dim, dim, rng));
    layer.w7 = &params.add(lp + "W7", glorot_matrix(dim, dim, rng));
    layers_.push_back(layer);
  }
  wq_ = &params.add(prefix + "Wq", glorot_matrix(dim, dim, rng));
}

Var ReasoningBranch::interact(Graph& g, Var objects, const EncodedQuery& query) const {
  if (!options_.gate) return objects;
  const std::size_t rows = objects.shape()[0];
  const std::size_t words = query.words.shape()[0];
  if (query.mask.size() != words) throw ShapeError("interact: query mask does not match word count");

  Var projected = ops::matmul(objects, g.parameter(*w1_));                               // [TK, D]
  Var word_part = ops::linear(query.words, g.parameter(*w2_), g.parameter(*b1_));       // [N, D]
  Var hidden = ops::tanh(ops::add(ops::expand(projected, 1, words), word_part));        // [TK, N, D]
  Var scores = ops::reshape(ops::matmul(hidden, g.parameter(*w_)), {rows, words});      // [TK, N]

  Tensor keep({1, words});
  for (std::size_t n = 0; n < words; ++n) keep[n] = query.mask[n] ? 1.0 : 0.0;
  Var attention = ops::softmax(ops::masked_fill(scores, keep, -1e30), 1);
  Var textual = ops::matmul(attention, query.words);  // [TK, D]

  Var gate = ops::sigmoid(ops::linear(textual, g.parameter(*w3_), g.parameter(*b2_)));
  return ops::mul(gate, objects);
}

GraphReasoning ReasoningBranch::reason(Graph& g, Var objects) const {
  GraphReasoning out{objects, {}};
  for (const auto& layer : layers_) {
    Var f = out.features;
    Var left = ops::matmul(f, g.parameter(*layer.w4));
    Var right = ops::matmul(f, g.parameter(*layer.w5));
    Var adjacency = ops::softmax(ops::matmul(left, ops::transpose(right)), 1);
    Var message = ops::matmul(ops::matmul(ops::matmul(adjacency, f), g.parameter(*layer.w6)), g.parameter(*layer.w7));
    out.features = ops::add(message, f);
    out.adjacency.push_back(adjacency.value());
  }
  return out;
}

BranchOutput ReasoningBranch::fuse(Graph& g, Var objects, Var sentence, std::size_t frames,
                                   std::size_t objects_per_frame) const {
  const std::size_t dim = objects.shape().back();
  if (objects.shape() != Shape{frames * objects_per_frame, dim})
    throw ShapeError("fuse: objects " + shape_string(objects.shape()) + " do not split into " + std::to_string(frames) +
                     " frames of " + std::to_string(objects_per_frame));
  Var guide = ops::matmul(sentence, g.parameter(*wq_));  // [1, D]
  Var dots = ops::matmul(objects, ops::transpose(guide));  // [TK, 1]
  Var cosine = ops::div(ops::div(dots, ops::l2_norm(objects, 1, kCosineFloor)), ops::l2_norm(guide, 1, kCosineFloor));
  Var scores = ops::reshape(cosine, {frames, objects_per_frame});
  Var weights = ops::softmax(scores, 1);
  Var pooled = ops::matmul(ops::reshape(weights, {frames, 1, objects_per_frame}),
                           ops::reshape(objects, {frames, objects_per_frame, dim}));
  return {stream_, ops::reshape(pooled, {frames, dim}), scores.value(), weights.value()};
}

BranchOutput ReasoningBranch::forward(Graph& g, const EncodedObjects& objects, const EncodedQuery& query,
                                      std::size_t frames, std::size_t objects_per_frame) const {
  Var enhanced = interact(g, objects.features, query);
  auto reasoned = reason(g, enhanced);
  return fuse(g, reasoned.features, query.sentence, frames, objects_per_frame);
}

}  // namespace ma3srn
