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

#include "model/associator.hpp"

#include <vector>

#include "diffcore/errors.hpp"
#include "diffcore/ops.hpp"
#include "model/attention.hpp"

namespace ma3srn {

TriTransformer::TriTransformer(ParameterStore& params, const std::string& prefix, std::size_t dim, std::size_t heads,
                               std::mt19937_64& rng)
    : heads_(heads) {
  if (heads == 0 || dim % heads != 0) throw ValidationError("tritrm: dim must be divisible by heads");
  q_gain_ = &params.add(prefix + "norm_q.gain", Tensor::filled({dim}, 1.0));
  q_bias_ = &params.add(prefix + "norm_q.bias", Tensor({dim}));
  kv_gain_ = &params.add(prefix + "norm_kv.gain", Tensor::filled({dim}, 1.0));
  kv_bias_ = &params.add(prefix + "norm_kv.bias", Tensor({dim}));
  wq_ = &params.add(prefix + "Wq", glorot_matrix(dim, dim, rng));
  wk_ = &params.add(prefix + "Wk", glorot_matrix(dim, dim, rng));
  wv_ = &params.add(prefix + "Wv", glorot_matrix(dim, dim, rng));
  wo_ = &params.add(prefix + "Wo", glorot_matrix(dim, dim, rng));
  ffn_gain_ = &params.add(prefix + "norm_ffn.gain", Tensor::filled({dim}, 1.0));
  ffn_bias_ = &params.add(prefix + "norm_ffn.bias", Tensor({dim}));
  ffn_w1_ = &params.add(prefix + "ffn.W1", glorot_matrix(dim, 2 * dim, rng));
  ffn_b1_ = &params.add(prefix + "ffn.b1", Tensor({2 * dim}));
  ffn_w2_ = &params.add(prefix + "ffn.W2", glorot_matrix(2 * dim, dim, rng));
  ffn_b2_ = &params.add(prefix + "ffn.b2", Tensor({dim}));
}

TriTrmOutput TriTransformer::apply(Graph& g, Var target, std::span<const Var> sources) const {
  if (sources.empty()) return {target, Tensor()};
  for (const auto& s : sources)
    if (s.shape() != target.shape())
      throw ShapeError("tritrm: source " + shape_string(s.shape()) + " does not match target " +
                       shape_string(target.shape()));
  Var context = sources.size() == 1 ? sources.front() : ops::concat(sources, 0);  // [S, D]

  Var q_in = ops::layer_norm(target, g.parameter(*q_gain_), g.parameter(*q_bias_));
  Var kv_in = ops::layer_norm(context, g.parameter(*kv_gain_), g.parameter(*kv_bias_));
  auto att = multi_head_attention(ops::matmul(q_in, g.parameter(*wq_)), ops::matmul(kv_in, g.parameter(*wk_)),
                                  ops::matmul(kv_in, g.parameter(*wv_)), heads_);
  Var attended = ops::add(target, ops::matmul(att.output, g.parameter(*wo_)));

  Var hidden = ops::relu(ops::linear(ops::layer_norm(attended, g.parameter(*ffn_gain_), g.parameter(*ffn_bias_)),
                                     g.parameter(*ffn_w1_), g.parameter(*ffn_b1_)));
  Var out = ops::add(attended, ops::linear(hidden, g.parameter(*ffn_w2_), g.parameter(*ffn_b2_)));
  return {out, std::move(att.weights)};
}

FusedFrames fuse_streams(const StreamFrames& enhanced, Var sentence) {
  FusedFrames out;
  std::optional<Var> total;
  for (Stream s : {Stream::threed, Stream::appearance, Stream::motion}) {
    const auto& h = enhanced[stream_index(s)];
    if (!h) continue;
    Var scores = ops::matmul(*h, ops::transpose(sentence));  // [T, 1]
    Var weights = ops::softmax(scores, 0);
    Var term = ops::mul(*h, weights);
    total = total ? ops::add(*total, term) : term;
    out.weights[stream_index(s)] = weights.value();
    out.enhanced[stream_index(s)] = *h;
  }
  if (!total) throw ValidationError("fuse_streams: no stream enabled");
  out.frames = *total;
  return out;
}

Associator::Associator(ParameterStore& params, std::size_t dim, std::size_t heads, const AssociatorOptions& options,
                       std::mt19937_64& rng)
    : options_(options) {
  for (Stream s : kStreams) blocks_.emplace_back(params, "assoc." + std::string(stream_name(s)) + ".", dim, heads, rng);
}

FusedFrames Associator::associate(Graph& g, const StreamFrames& frames, Var sentence) const {
  // Guidance order per target: 3D <- (appearance, motion), appearance <- (3D, motion), motion <- (3D, appearance).
  static constexpr std::array<std::array<Stream, 2>, 3> order{{{Stream::threed, Stream::motion},
                                                               {Stream::threed, Stream::appearance},
                                                               {Stream::appearance, Stream::motion}}};
  StreamFrames enhanced;
  std::array<Tensor, 3> attention;
  for (Stream target : kStreams) {
    const std::size_t ti = stream_index(target);
    if (!frames[ti]) continue;
    if (!options_.enabled) {
      enhanced[ti] = frames[ti];
      continue;
    }
    std::vector<Var> sources;
    for (Stream src : order[ti]) {
      const std::size_t si = stream_index(src);
      if (frames[si] && options_.guide[ti][si]) sources.push_back(*frames[si]);
    }
    auto out = blocks_[ti].apply(g, *frames[ti], sources);
    enhanced[ti] = out.frames;
    attention[ti] = std::move(out.attention);
  }
  auto fused = fuse_streams(enhanced, sentence);
  fused.attention = std::move(attention);
  return fused;
}

}  // namespace ma3srn
