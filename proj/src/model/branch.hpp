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
#include <random>
#include <vector>

#include "diffcore/graph.hpp"
#include "diffcore/parameters.hpp"
#include "model/encoders.hpp"

namespace ma3srn {

inline constexpr double kCosineFloor = 1e-8;

struct BranchOptions {
  bool gate = true;
  std::size_t graph_layers = 1;  // 0 disables graph reasoning
};

struct GraphReasoning {
  Var features;                    // [T*K, D]
  std::vector<Tensor> adjacency;   // one [T*K, T*K] matrix per layer
};

struct BranchOutput {
  Stream stream = Stream::appearance;
  Var frames;              // H, [T, D]
  Tensor object_scores;    // cosine c_{t,k}, [T, K]
  Tensor object_weights;   // softmax over k of c_{t,k}, [T, K]
};

/// Cross-modal reasoning over one stream's objects: textual gate, a fully
/// connected spatio-temporal graph with residual GCN, and query-guided fusion
/// of each frame's K objects.
class ReasoningBranch {
 public:
  ReasoningBranch(ParameterStore& params, Stream stream, std::size_t dim, const BranchOptions& options,
                  std::mt19937_64& rng);

  // M = w^T tanh(W1 f + W2 q_n + b1); f' = sum_n softmax_n(M) q_n;
  // returns sigmoid(W3 f' + b2) * f.
  Var interact(Graph& g, Var objects, const EncodedQuery& query) const;

  // A = softmax_rows((F W4)(F W5)^T); F~ = (A F W6) W7 + F, once per layer.
  GraphReasoning reason(Graph& g, Var objects) const;

  // c = cos(f~, q_global Wq); h_t = sum_k softmax_k(c_{t,k}) f~_{t,k}.
  BranchOutput fuse(Graph& g, Var objects, Var sentence, std::size_t frames, std::size_t objects_per_frame) const;

  BranchOutput forward(Graph& g, const EncodedObjects& objects, const EncodedQuery& query, std::size_t frames,
                       std::size_t objects_per_frame) const;

  Stream stream() const { return stream_; }

 private:
  struct GraphLayer {
    Parameter* w4;
    Parameter* w5;
    Parameter* w6;
    Parameter* w7;
  };

  Stream stream_;
  BranchOptions options_;
  Parameter* w1_;
  Parameter* w2_;
  Parameter* b1_;
  Parameter* w_;
  Parameter* w3_;
  Parameter* b2_;
  std::vector<GraphLayer> layers_;
  Parameter* wq_;
};

}  // namespace ma3srn
