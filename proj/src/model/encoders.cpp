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

#include "model/encoders.hpp"

#include <cmath>
#include <string>

#include "diffcore/errors.hpp"
#include "diffcore/ops.hpp"
#include "model/attention.hpp"

namespace ma3srn {

std::string_view stream_name(Stream stream) {
  switch (stream) {
    case Stream::appearance:
      return "appearance";
    case Stream::motion:
      return "motion";
    case Stream::threed:
      return "threed";
  }
  return "unknown";
}

std::vector<std::size_t> QueryFeatures::real_positions() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) out.push_back(i);
  return out;
}

void validate_stream(const StreamObjectFeatures& f, std::size_t frames, std::size_t objects, std::size_t input_dim) {
  const std::string name(stream_name(f.stream));
  if (f.local.shape() != Shape{frames, objects, input_dim})
    throw ValidationError(name + ": local features " + shape_string(f.local.shape()) + ", expected " +
                          shape_string({frames, objects, input_dim}));
  if (f.boxes.shape() != Shape{frames, objects, 4})
    throw ValidationError(name + ": boxes " + shape_string(f.boxes.shape()) + ", expected " +
                          shape_string({frames, objects, 4}));
  if (f.global.shape() != Shape{frames, input_dim})
    throw ValidationError(name + ": global features " + shape_string(f.global.shape()) + ", expected " +
                          shape_string({frames, input_dim}));
  for (std::size_t i = 0; i < frames * objects; ++i) {
    const double x1 = f.boxes[4 * i], y1 = f.boxes[4 * i + 1], x2 = f.boxes[4 * i + 2], y2 = f.boxes[4 * i + 3];
    const bool inside = x1 >= 0 && y1 >= 0 && x2 <= 1 && y2 <= 1;
    if (!(x1 < x2 && y1 < y2 && inside))
      throw ValidationError(name + ": invalid box for object " + std::to_string(i));
  }
  if (!f.local.all_finite() || !f.global.all_finite()) throw ValidationError(name + ": non-finite features");
}

void validate_query(const QueryFeatures& q, std::size_t max_words, std::size_t word_dim) {
  if (q.embeddings.rank() != 2 || q.embeddings.dim(1) != word_dim)
    throw ValidationError("query: embeddings " + shape_string(q.embeddings.shape()) + ", expected [N," +
                          std::to_string(word_dim) + "]");
  const std::size_t n = q.embeddings.dim(0);
  if (n > max_words)
    throw ValidationError("query: " + std::to_string(n) + " words exceed maximum " + std::to_string(max_words));
  if (q.mask.size() != n) throw ValidationError("query: mask length does not match word count");
  if (q.real_positions().empty()) throw ValidationError("query: every word is masked");
  if (!q.embeddings.all_finite()) throw ValidationError("query: non-finite embeddings");
}

Tensor temporal_position(std::size_t t, std::size_t frames, std::size_t dim) {
  if (t >= frames) throw ValidationError("temporal position: frame " + std::to_string(t) + " outside [0, " +
                                         std::to_string(frames) + ")");
  if (dim == 0 || dim % 2 != 0) throw ValidationError("temporal position: dimension must be even and positive");
  Tensor e({dim});
  for (std::size_t i = 0; i < dim / 2; ++i) {
    const double rate = std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(dim));
    const double angle = static_cast<double>(t) / rate;
    e[2 * i] = std::sin(angle);
    e[2 * i + 1] = std::cos(angle);
  }
  return e;
}

Tensor temporal_position_table(std::size_t frames, std::size_t dim) {
  Tensor table({frames, dim});
  for (std::size_t t = 0; t < frames; ++t) {
    const Tensor row = temporal_position(t, frames, dim);
    std::copy(row.values().begin(), row.values().end(), table.values().begin() + static_cast<std::ptrdiff_t>(t * dim));
  }
  return table;
}

StreamEncoder::StreamEncoder(ParameterStore& params, Stream stream, const EncoderDims& dims, std::mt19937_64& rng)
    : stream_(stream), dims_(dims) {
  const std::string prefix = "encoder." + std::string(stream_name(stream)) + ".";
  const std::size_t d = dims.dim, dp = dims.position_dim(), din = dims.input_dim;
  box_w_ = &params.add(prefix + "box.W", glorot_matrix(4, dp, rng));
  box_b_ = &params.add(prefix + "box.b", Tensor({dp}));
  local_w_ = &params.add(prefix + "local.W", glorot_matrix(din + 2 * dp, d, rng));
  local_b_ = &params.add(prefix + "local.b", Tensor({d}));
  global_w_ = &params.add(prefix + "global.W", glorot_matrix(din + dp, d, rng));
  global_b_ = &params.add(prefix + "global.b", Tensor({d}));
  fuse_w_ = &params.add(prefix + "fuse.W", glorot_matrix(2 * d, d, rng));
  fuse_b_ = &params.add(prefix + "fuse.b", Tensor({d}));
}

Var StreamEncoder::spatial_position(Graph& g, const Tensor& boxes) const {
  if (boxes.rank() == 0 || boxes.shape().back() != 4)
    throw ShapeError("spatial_position: boxes " + shape_string(boxes.shape()) + " must end in 4");
  return ops::linear(g.constant(boxes), g.parameter(*box_w_), g.parameter(*box_b_));
}

EncodedObjects StreamEncoder::encode(Graph& g, const StreamObjectFeatures& f) const {
  const std::size_t t_count = dims_.frames, k_count = dims_.objects, rows = t_count * k_count;
  const std::size_t dp = dims_.position_dim();
  validate_stream(f, t_count, k_count, dims_.input_dim);

  const Tensor table = temporal_position_table(t_count, dp);
  Tensor per_object({rows, dp});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < dp; ++j) per_object.at(r, j) = table.at(r / k_count, j);

  Var local = g.constant(f.local.reshaped({rows, dims_.input_dim}));
  Var box_code = spatial_position(g, f.boxes.reshaped({rows, 4}));
  Var v = ops::linear(ops::concat({local, box_code, g.constant(std::move(per_object))}, 1), g.parameter(*local_w_),
                      g.parameter(*local_b_));

  Var global = ops::linear(ops::concat({g.constant(f.global), g.constant(table)}, 1), g.parameter(*global_w_),
                           g.parameter(*global_b_));
  Var global_rows = ops::reshape(ops::expand(global, 1, k_count), {rows, dims_.dim});

  Var fused = ops::linear(ops::concat({v, global_rows}, 1), g.parameter(*fuse_w_), g.parameter(*fuse_b_));
  return {stream_, fused};
}

QueryEncoder::QueryEncoder(ParameterStore& params, const QueryEncoderDims& dims, std::mt19937_64& rng) : dims_(dims) {
  const std::size_t d = dims.dim, h = dims.hidden;
  proj_w_ = &params.add("query.proj.W", glorot_matrix(dims.word_dim, d, rng));
  proj_b_ = &params.add("query.proj.b", Tensor({d}));
  wq_ = &params.add("query.attn.Wq", glorot_matrix(d, d, rng));
  wk_ = &params.add("query.attn.Wk", glorot_matrix(d, d, rng));
  wv_ = &params.add("query.attn.Wv", glorot_matrix(d, d, rng));
  wo_ = &params.add("query.attn.Wo", glorot_matrix(d, d, rng));
  norm_gain_ = &params.add("query.attn.norm.gain", Tensor::filled({d}, 1.0));
  norm_bias_ = &params.add("query.attn.norm.bias", Tensor({d}));
  forward_ = make_gru(params, "query.gru.fwd.", rng);
  backward_ = make_gru(params, "query.gru.bwd.", rng);
  out_w_ = &params.add("query.out.W", glorot_matrix(2 * h, d, rng));
  out_b_ = &params.add("query.out.b", Tensor({d}));
  global_w_ = &params.add("query.global.W", glorot_matrix(2 * h, d, rng));
  global_b_ = &params.add("query.global.b", Tensor({d}));
}

QueryEncoder::GruWeights QueryEncoder::make_gru(ParameterStore& params, const std::string& prefix,
                                                std::mt19937_64& rng) const {
  const std::size_t d = dims_.dim, h = dims_.hidden;
  GruWeights w;
  w.input = &params.add(prefix + "W", glorot_uniform({d, 3 * h}, d, h, rng));
  w.recurrent = &params.add(prefix + "U", glorot_uniform({h, 2 * h}, h, h, rng));
  w.candidate = &params.add(prefix + "Uc", glorot_matrix(h, h, rng));
  w.bias = &params.add(prefix + "b", Tensor({3 * h}));
  return w;
}

std::vector<Var> QueryEncoder::run_gru(Graph& g, const GruWeights& w, Var inputs, bool reverse) const {
  const std::size_t steps = inputs.shape()[0], h = dims_.hidden;
  Var projected = ops::linear(inputs, g.parameter(*w.input), g.parameter(*w.bias));  // [steps, 3H]
  Var u = g.parameter(*w.recurrent);
  Var uc = g.parameter(*w.candidate);
  Var state = g.constant(Tensor({1, h}));
  std::vector<Var> states(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t i = reverse ? steps - 1 - s : s;
    Var x = ops::slice(projected, 0, i, i + 1);
    Var gates = ops::sigmoid(ops::add(ops::slice(x, 1, 0, 2 * h), ops::matmul(state, u)));
    Var update = ops::slice(gates, 1, 0, h);
    Var reset = ops::slice(gates, 1, h, 2 * h);
    Var candidate = ops::tanh(ops::add(ops::slice(x, 1, 2 * h, 3 * h), ops::matmul(ops::mul(reset, state), uc)));
    // (1 - z) * h + z * candidate
    state = ops::add(state, ops::mul(update, ops::sub(candidate, state)));
    states[i] = state;
  }
  return states;
}

EncodedQuery QueryEncoder::encode(Graph& g, const QueryFeatures& query) const {
  validate_query(query, query.embeddings.dim(0), dims_.word_dim);
  const std::size_t n = query.embeddings.dim(0);
  const auto real = query.real_positions();
  const std::size_t nr = real.size();

  Tensor keep_row({1, n}), keep_col({n, 1}), select({n, nr});
  for (std::size_t i = 0; i < n; ++i) keep_row[i] = keep_col[i] = query.mask[i] ? 1.0 : 0.0;
  for (std::size_t j = 0; j < nr; ++j) select.at(real[j], j) = 1.0;

  Var x = ops::linear(g.constant(query.embeddings), g.parameter(*proj_w_), g.parameter(*proj_b_));
  x = ops::mul(x, g.constant(keep_col));

  auto att = multi_head_attention(ops::matmul(x, g.parameter(*wq_)), ops::matmul(x, g.parameter(*wk_)),
                                  ops::matmul(x, g.parameter(*wv_)), dims_.heads, &keep_row);
  Var y = ops::layer_norm(ops::add(x, ops::matmul(att.output, g.parameter(*wo_))), g.parameter(*norm_gain_),
                          g.parameter(*norm_bias_));

  Var tokens = ops::matmul(ops::transpose(g.constant(select)), y);  // [Nr, D]
  const auto fwd = run_gru(g, forward_, tokens, false);
  const auto bwd = run_gru(g, backward_, tokens, true);
  Var states = ops::concat({nr == 1 ? fwd[0] : ops::concat(fwd, 0), nr == 1 ? bwd[0] : ops::concat(bwd, 0)}, 1);

  Var words = ops::linear(states, g.parameter(*out_w_), g.parameter(*out_b_));
  words = ops::matmul(g.constant(select), words);  // scatter back, padded rows zero

  // Final states: forward after the last real word, backward after the first.
  Var last = ops::concat({fwd.back(), bwd.front()}, 1);
  Var sentence = ops::linear(last, g.parameter(*global_w_), g.parameter(*global_b_));
  return {words, sentence, query.mask, std::move(att.weights)};
}

}  // namespace ma3srn
