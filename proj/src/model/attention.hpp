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

#include "diffcore/graph.hpp"

namespace ma3srn {

struct AttentionResult {
  Var output;       // [Nq, D]
  Tensor weights;   // [heads, Nq, Nk]
};

/// Scaled dot-product attention over already-projected queries [Nq, D],
/// keys [Nk, D] and values [Nk, D], split into `heads` column blocks of width
/// D / heads. `key_keep` (shape [1, Nk], 1 = attend) masks padded keys.
AttentionResult multi_head_attention(Var queries, Var keys, Var values, std::size_t heads,
                                     const Tensor* key_keep = nullptr);

}  // namespace ma3srn
