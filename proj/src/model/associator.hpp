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

#include <array>
#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <string>

#include "diffcore/graph.hpp"
#include "diffcore/parameters.hpp"
#include "model/encoders.hpp"

namespace ma3srn {

struct TriTrmOutput {
  Var frames;        // [T, D]
  Tensor attention;  // [heads, T, S]; empty on pass-through
};

/// Triple-modal transformer block: the target stream attends over the row
/// concatenation of its guidance streams. Pre-norm residual attention and a
/// rectified FFN of width 2D.
class TriTransformer {
 public:
  TriTransformer(ParameterStore& params, const std::string& prefix, std::size_t dim, std::size_t heads,
                 std::mt19937_64& rng);

  // No sources: the target passes through unchanged.
  TriTrmOutput apply(Graph& g, Var target, std::span<const Var> sources) const;

 private:
  std::size_t heads_;
  Parameter* q_gain_;
  Parameter* q_bias_;
  Parameter* kv_gain_;
  Parameter* kv_bias_;
  Parameter* wq_;
  Parameter* wk_;
  Parameter* wv_;
  Parameter* wo_;
  Parameter* ffn_gain_;
  Parameter* ffn_bias_;
  Parameter* ffn_w1_;
  Parameter* ffn_b1_;
  Parameter* ffn_w2_;
  Parameter* ffn_b2_;
};

struct AssociatorOptions {
  bool enabled = true;
  // guide[target][source]: source stream feeds the target's TriTRM.
  std::array<std::array<bool, 3>, 3> guide{{{false, true, true}, {true, false, true}, {true, true, false}}};
};

using StreamFrames = std::array<std::optional<Var>, 3>;  // indexed by stream_index

struct FusedFrames {
  Var frames;                                   // H~, [T, D]
  std::array<std::optional<Tensor>, 3> weights;  // per-stream frame weights [T, 1]
  std::array<std::optional<Var>, 3> enhanced;    // per-stream TriTRM output
  std::array<Tensor, 3> attention;
};

/// Query-guided weighted sum over streams: sum_s softmax_T(H_s q^T) * H_s.
FusedFrames fuse_streams(const StreamFrames& enhanced, Var sentence);

class Associator {
 public:
  Associator(ParameterStore& params, std::size_t dim, std::size_t heads, const AssociatorOptions& options,
             std::mt19937_64& rng);

  FusedFrames associate(Graph& g, const StreamFrames& frames, Var sentence) const;

  const TriTransformer& block(Stream target) const { return blocks_[stream_index(target)]; }
  const AssociatorOptions& options() const { return options_; }

 private:
  AssociatorOptions options_;
  std::vector<TriTransformer> blocks_;
};

}  // namespace ma3srn
