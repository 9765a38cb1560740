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
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "diffcore/graph.hpp"
#include "diffcore/parameters.hpp"

namespace ma3srn {

enum class Stream : std::uint8_t { appearance = 0, motion = 1, threed = 2 };

inline constexpr std::array<Stream, 3> kStreams{Stream::appearance, Stream::motion, Stream::threed};

std::string_view stream_name(Stream stream);
inline std::size_t stream_index(Stream stream) { return static_cast<std::size_t>(stream); }

/// One stream's detector-aligned inputs for a video of T frames with K
/// object slots per frame.
struct StreamObjectFeatures {
  Stream stream = Stream::appearance;
  Tensor local;   // [T, K, D_in]
  Tensor boxes;   // [T, K, 4] normalised (x1, y1, x2, y2)
  Tensor global;  // [T, D_in]

  friend bool operator==(const StreamObjectFeatures&, const StreamObjectFeatures&) = default;
};

struct QueryFeatures {
  Tensor embeddings;               // [N, D_w]
  std::vector<std::uint8_t> mask;  // N entries, 1 = real word

  std::vector<std::size_t> real_positions() const;

  friend bool operator==(const QueryFeatures&, const QueryFeatures&) = default;
};

struct EncodedObjects {
  Stream stream = Stream::appearance;
  Var features;  // [T*K, D], row t*K + k is object (t, k)
};

struct EncodedQuery {
  Var words;     // [N, D], padded rows are zero
  Var sentence;  // [1, D]
  std::vector<std::uint8_t> mask;
  Tensor self_attention;  // [heads, N, N]
};

void validate_stream(const StreamObjectFeatures& features, std::size_t frames, std::size_t objects,
                     std::size_t input_dim);
void validate_query(const QueryFeatures& query, std::size_t max_words, std::size_t word_dim);

/// Sinusoidal code of frame index t: even slots sin(t / 10000^(2i/d)), odd
/// slots the matching cosine.
Tensor temporal_position(std::size_t t, std::size_t frames, std::size_t dim);
Tensor temporal_position_table(std::size_t frames, std::size_t dim);  // [T, dim]

struct EncoderDims {
  std::size_t frames = 0;
  std::size_t objects = 0;
  std::size_t input_dim = 0;
  std::size_t dim = 0;  // D; position codes use D / 4 each

  std::size_t position_dim() const { return dim / 4; }
};

/// Position-aware object encoder for one stream:
///   v = FC([o; FC(box); e_t]),  G = FC([global; e_t]),  F = FC([v; G expanded over K]).
class StreamEncoder {
 public:
  StreamEncoder(ParameterStore& params, Stream stream, const EncoderDims& dims, std::mt19937_64& rng);

  // Affine code of boxes [..., 4] -> [..., D/4].
  Var spatial_position(Graph& g, const Tensor& boxes) const;
  EncodedObjects encode(Graph& g, const StreamObjectFeatures& features) const;

  Stream stream() const { return stream_; }

 private:
  Stream stream_;
  EncoderDims dims_;
  Parameter* box_w_;
  Parameter* box_b_;
  Parameter* local_w_;
  Parameter* local_b_;
  Parameter* global_w_;
  Parameter* global_b_;
  Parameter* fuse_w_;
  Parameter* fuse_b_;
};

struct QueryEncoderDims {
  std::size_t word_dim = 0;
  std::size_t dim = 0;
  std::size_t heads = 1;
  std::size_t hidden = 0;  // per direction
};

/// Word projection, masked multi-head self-attention with residual and layer
/// norm, then a bidirectional GRU over the real tokens.
class QueryEncoder {
 public:
  QueryEncoder(ParameterStore& params, const QueryEncoderDims& dims, std::mt19937_64& rng);

  EncodedQuery encode(Graph& g, const QueryFeatures& query) const;

 private:
  struct GruWeights {
    Parameter* input;      // [D, 3H]  update | reset | candidate
    Parameter* recurrent;  // [H, 2H]  update | reset
    Parameter* candidate;  // [H, H]
    Parameter* bias;       // [3H]
  };

  GruWeights make_gru(ParameterStore& params, const std::string& prefix, std::mt19937_64& rng) const;
  // Returns one hidden state row per input row, in input order.
  std::vector<Var> run_gru(Graph& g, const GruWeights& w, Var inputs, bool reverse) const;

  QueryEncoderDims dims_;
  Parameter* proj_w_;
  Parameter* proj_b_;
  Parameter* wq_;
  Parameter* wk_;
  Parameter* wv_;
  Parameter* wo_;
  Parameter* norm_gain_;
  Parameter* norm_bias_;
  GruWeights forward_;
  GruWeights backward_;
  Parameter* out_w_;
  Parameter* out_b_;
  Parameter* global_w_;
  Parameter* global_b_;
};

}  // namespace ma3srn
