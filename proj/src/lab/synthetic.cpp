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


#include "lab/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "diffcore/errors.hpp"

namespace ma3srn {
namespace {

// Kept out of line: g++ 11 at -O3 -march=native vectorises the box loop and
// drops the float round trip.
[[gnu::noinline]] double f32(double x) {
  volatile float f = static_cast<float>(x);
  return static_cast<double>(f);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(salt), static_cast<std::uint32_t>(salt >> 32)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

// Rows of an orthogonal matrix from QR of a seeded Gaussian; when more rows
// than dimensions are requested, normalised Gaussian rows instead.
Tensor orthonormal_rows(std::size_t rows, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor out({rows, dim});
  if (rows <= dim) {
    RowMatrix gauss(dim, dim);
    for (Eigen::Index i = 0; i < gauss.size(); ++i) gauss.data()[i] = normal(rng);
    Eigen::HouseholderQR<RowMatrix> qr(gauss);
    RowMatrix q = qr.householderQ();
    out.matrix() = q.topRows(static_cast<Eigen::Index>(rows));
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = normal(rng);
    for (std::size_t r = 0; r < rows; ++r) out.matrix().row(static_cast<Eigen::Index>(r)).normalize();
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f32(out[i]);
  return out;
}

struct Interval {
  std::size_t start;
  std::size_t end;
};

std::size_t uniform_index(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// An interval inside [0, gs) or [ge, T), chosen with probability proportional
// to the free length of each side.
Interval place_outside(std::mt19937_64& rng, std::size_t gs, std::size_t ge, std::size_t frames) {
  const std::size_t left = gs, right = frames - ge;
  const bool use_left = uniform_index(rng, 0, left + right - 1) < left;
  const std::size_t lo_frame = use_left ? 0 : ge;
  const std::size_t room = use_left ? left : right;
  const std::size_t lo = std::min(std::max<std::size_t>(frames / 8, 1), room);
  const std::size_t hi = std::min(std::max<std::size_t>(frames / 2, 1), room);
  const std::size_t length = uniform_index(rng, lo, hi);
  const std::size_t start = lo_frame + uniform_index(rng, 0, room - length);
  return {start, start + length};
}

void plant(Tensor& local, std::size_t objects, std::size_t dim, std::size_t slot, Interval span, const Tensor& dict,
           std::size_t row_a, std::size_t row_b, double weight_a, double weight_b) {
  for (std::size_t t = span.start; t < span.end; ++t) {
    double* dst = local.values().data() + (t * objects + slot) * dim;
    for (std::size_t i = 0; i < dim; ++i) dst[i] += weight_a * dict.at(row_a, i) + weight_b * dict.at(row_b, i);
  }
}

}  // namespace

SignatureDictionary::SignatureDictionary(const ExperimentConfig& c)
    : objects_(c.data.object_vocab), patterns_(c.data.pattern_vocab) {
  features_ = orthonormal_rows(objects_ + patterns_, c.model.input_dim, derive_seed(c.data.dictionary_seed, 0));
  words_ = orthonormal_rows(objects_ + patterns_ + c.data.filler_vocab, c.model.word_dim,
                            derive_seed(c.data.dictionary_seed, 1));
}

SyntheticSample generate_sample(std::uint64_t seed, const ExperimentConfig& config, std::uint32_t id) {
  return generate_sample(seed, config, SignatureDictionary(config), id);
}

SyntheticSample generate_sample(std::uint64_t seed, const ExperimentConfig& config, const SignatureDictionary& dict,
                                std::uint32_t id) {
  config.validate();
  const auto& m = config.model;
  const auto& d = config.data;
  if (m.objects < 2) throw ValidationError("generate: at least 2 object slots are needed to place distractors");
  if (m.frames < 2) throw ValidationError("generate: at least 2 frames are needed to place distractors");
  const std::size_t T = m.frames, K = m.objects, Din = m.input_dim;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  SyntheticSample s;
  s.id = id;

  const std::size_t min_len = std::max<std::size_t>(T / 8, 1);
  const std::size_t max_len = std::max<std::size_t>(T / 2, 1);
  const std::size_t length = uniform_index(rng, min_len, max_len);
  const std::size_t gs = uniform_index(rng, 0, T - length);
  const Interval truth{gs, gs + length};
  s.ground_truth = {static_cast<double>(truth.start), static_cast<double>(truth.end)};

  auto& meta = s.metadata;
  meta.object = static_cast<std::uint32_t>(uniform_index(rng, 0, d.object_vocab - 1));
  meta.pattern = static_cast<std::uint32_t>(uniform_index(rng, 0, d.pattern_vocab - 1));
  meta.target_slot = static_cast<std::uint32_t>(uniform_index(rng, 0, K - 1));

  auto other = [&](std::size_t vocab, std::size_t avoid) {
    const std::size_t draw = uniform_index(rng, 0, vocab - 2);
    return static_cast<std::uint32_t>(draw >= avoid ? draw + 1 : draw);
  };
  for (DistractorKind kind : {DistractorKind::appearance, DistractorKind::motion}) {
    Distractor dis;
    dis.kind = kind;
    dis.object = kind == DistractorKind::appearance ? meta.object : other(d.object_vocab, meta.object);
    dis.pattern = kind == DistractorKind::motion ? meta.pattern : other(d.pattern_vocab, meta.pattern);
    const Interval span = place_outside(rng, truth.start, truth.end, T);
    dis.start = static_cast<std::uint32_t>(span.start);
    dis.end = static_cast<std::uint32_t>(span.end);
    dis.slot = static_cast<std::uint32_t>(uniform_index(rng, 0, K - 1));
    for (const auto& prev : meta.distractors) {
      const bool overlap = prev.start < dis.end && dis.start < prev.end;
      if (overlap && prev.slot == dis.slot)
        dis.slot = static_cast<std::uint32_t>((dis.slot + 1 + uniform_index(rng, 0, K - 2)) % K);
    }
    meta.distractors.push_back(dis);
  }

  Tensor boxes({T, K, 4});
  std::uniform_real_distribution<double> corner(0.0, 0.7);
  for (std::size_t i = 0; i < T * K; ++i) {
    const double x1 = corner(rng), y1 = corner(rng);
    const double x2 = x1 + std::uniform_real_distribution<double>(0.1, 1.0 - x1)(rng);
    const double y2 = y1 + std::uniform_real_distribution<double>(0.1, 1.0 - y1)(rng);
    boxes[4 * i] = f32(x1);
    boxes[4 * i + 1] = f32(y1);
    boxes[4 * i + 2] = f32(std::min(x2, 1.0));
    boxes[4 * i + 3] = f32(std::min(y2, 1.0));
  }

  const Tensor& sig = dict.features();
  for (Stream stream : kStreams) {
    auto& f = s.streams[stream_index(stream)];
    f.stream = stream;
    f.boxes = boxes;
    f.local = Tensor({T, K, Din});
    for (std::size_t i = 0; i < f.local.size(); ++i) f.local[i] = d.noise * normal(rng);

    auto add = [&](std::size_t slot, Interval span, std::size_t object, std::size_t pattern) {
      const std::size_t ro = dict.object_row(object), rp = dict.pattern_row(pattern);
      switch (stream) {
        case Stream::appearance:
          plant(f.local, K, Din, slot, span, sig, ro, rp, d.signal, 0.0);
          break;
        case Stream::motion:
          plant(f.local, K, Din, slot, span, sig, ro, rp, 0.0, d.signal);
          break;
        case Stream::threed:
          plant(f.local, K, Din, slot, span, sig, ro, rp, 0.5 * d.signal, 0.5 * d.signal);
          break;
      }
    };
    add(meta.target_slot, truth, meta.object, meta.pattern);
    for (const auto& dis : meta.distractors) add(dis.slot, {dis.start, dis.end}, dis.object, dis.pattern);

    f.global = Tensor({T, Din});
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t i = 0; i < Din; ++i) {
        double mean = 0.0;
        for (std::size_t k = 0; k < K; ++k) mean += f.local[(t * K + k) * Din + i];
        f.global[t * Din + i] = mean / static_cast<double>(K) + d.noise * normal(rng);
      }
    for (std::size_t i = 0; i < f.local.size(); ++i) f.local[i] = f32(f.local[i]);
    for (std::size_t i = 0; i < f.global.size(); ++i) f.global[i] = f32(f.global[i]);
  }

  // Query: object word and pattern word at distinct positions among fillers.
  const std::size_t N = m.max_words, Dw = m.word_dim;
  const std::size_t real = uniform_index(rng, d.min_words, N);
  const std::size_t obj_pos = uniform_index(rng, 0, real - 1);
  std::size_t pat_pos = uniform_index(rng, 0, real - 2);
  if (pat_pos >= obj_pos) ++pat_pos;
  s.query.embeddings = Tensor({N, Dw});
  s.query.mask.assign(N, 0);
  const Tensor& words = dict.words();
  for (std::size_t n = 0; n < real; ++n) {
    std::size_t row;
    if (n == obj_pos)
      row = dict.object_row(meta.object);
    else if (n == pat_pos)
      row = dict.pattern_row(meta.pattern);
    else
      row = dict.filler_row(uniform_index(rng, 0, d.filler_vocab - 1));
    for (std::size_t i = 0; i < Dw; ++i)
      s.query.embeddings[n * Dw + i] = f32(words.at(row, i) + d.word_noise * normal(rng));
    s.query.mask[n] = 1;
  }
  return s;
}

std::vector<SyntheticSample> generate_samples(const ExperimentConfig& config, std::uint64_t seed, std::size_t count) {
  const SignatureDictionary dict(config);
  std::vector<SyntheticSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(generate_sample(derive_seed(seed, i), config, dict, static_cast<std::uint32_t>(i)));
  return out;
}

void validate_sample(const SyntheticSample& s, const ExperimentConfig& config) {
  const auto& m = config.model;
  for (Stream stream : kStreams) {
    const auto& f = s.streams[stream_index(stream)];
    if (f.stream != stream) throw ValidationError("sample " + std::to_string(s.id) + ": stream tags out of order");
    validate_stream(f, m.frames, m.objects, m.input_dim);
    if (f.boxes != s.streams[0].boxes)
      throw ValidationError("sample " + std::to_string(s.id) + ": boxes differ across streams");
  }
  validate_query(s.query, m.max_words, m.word_dim);
  const auto& gt = s.ground_truth;
  if (!(gt.valid() && gt.start >= 0.0 && gt.end <= static_cast<double>(m.frames)))
    throw ValidationError("sample " + std::to_string(s.id) + ": ground truth outside [0, T]");
}

}  // namespace ma3srn
