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

#include "model/attention.hpp"

#include <cmath>
#include <vector>

#include "diffcore/errors.hpp"
#include "diffcore/ops.hpp"

namespace ma3srn {

AttentionResult multi_head_attention(Var queries, Var keys, Var values, std::size_t heads, const Tensor* key_keep) {
  const std::size_t dim = queries.shape().back();
  if (heads == 0 || dim % heads != 0)
    throw ShapeError("attention: width " + std::to_string(dim) + " not divisible by " + std::to_string(heads) + " heads");
  if (keys.shape() != values.shape() || keys.shape().back() != dim)
    throw ShapeError("attention: keys " + shape_string(keys.shape()) + " / values " + shape_string(values.shape()) +
                     " do not match query width " + std::to_string(dim));
  const std::size_t width = dim / heads;
  const std::size_t nq = queries.shape()[0], nk = keys.shape()[0];
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(width));

  AttentionResult result;
  result.weights = Tensor({heads, nq, nk});
  std::vector<Var> outputs;
  outputs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Var qh = ops::slice(queries, 1, h * width, (h + 1) * width);
    Var kh = ops::slice(keys, 1, h * width, (h + 1) * width);
    Var vh = ops::slice(values, 1, h * width, (h + 1) * width);
    Var logits = ops::scale(ops::matmul(qh, ops::transpose(kh)), inv_sqrt);
    if (key_keep) logits = ops::masked_fill(logits, *key_keep, -1e30);
    Var att = ops::softmax(logits, 1);
    std::copy(att.value().values().begin(), att.value().values().end(),
              result.weights.values().begin() + static_cast<std::ptrdiff_t>(h * nq * nk));
    outputs.push_back(ops::matmul(att, vh));
  }
  result.output = heads == 1 ? outputs.front() : ops::concat(outputs, 1);
  return result;
}

}  // namespace ma3srn
