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


#include "lab/dataset_io.hpp"

#include "diffcore/errors.hpp"
#include "lab/container.hpp"

namespace ma3srn {

std::vector<std::uint8_t> encode_dataset(const Dataset& dataset) {
  const auto& m = dataset.config.model;
  ByteWriter w;
  w.string(dataset.config.dump());
  w.u32(static_cast<std::uint32_t>(dataset.samples.size()));
  for (const auto& s : dataset.samples) {
    validate_sample(s, dataset.config);
    w.u32(s.id);
    w.f32(static_cast<float>(s.ground_truth.start));
    w.f32(static_cast<float>(s.ground_truth.end));
    w.u32(s.metadata.object);
    w.u32(s.metadata.pattern);
    w.u32(s.metadata.target_slot);
    w.u32(static_cast<std::uint32_t>(s.metadata.distractors.size()));
    for (const auto& d : s.metadata.distractors) {
      w.u32(static_cast<std::uint32_t>(d.kind));
      w.u32(d.object);
      w.u32(d.pattern);
      w.u32(d.slot);
      w.u32(d.start);
      w.u32(d.end);
    }
    w.f32_from(s.streams[0].boxes.values());
    for (const auto& f : s.streams) {
      w.f32_from(f.local.values());
      w.f32_from(f.global.values());
    }
    w.f32_from(s.query.embeddings.values());
    for (std::size_t n = 0; n < m.max_words; ++n) w.f32(s.query.mask[n] ? 1.0f : 0.0f);
  }
  return seal({kDatasetMagic, 4}, kDatasetVersion, w.bytes());
}

Dataset decode_dataset(std::span<const std::uint8_t> file) {
  using Kind = FormatError::Kind;
  const auto payload = unseal(file, {kDatasetMagic, 4}, kDatasetVersion);
  ByteReader r(payload);
  Dataset out;
  try {
    out.config = ExperimentConfig::parse(r.string());
  } catch (const ValidationError& e) {
    throw FormatError(Kind::malformed, std::string("dataset config echo: ") + e.what());
  }
  const auto& m = out.config.model;
  const std::size_t T = m.frames, K = m.objects, Din = m.input_dim;
  const std::uint32_t count = r.u32();
  std::vector<SyntheticSample> samples;
  for (std::uint32_t i = 0; i < count; ++i) {
    SyntheticSample s;
    s.id = r.u32();
    s.ground_truth.start = r.f32();
    s.ground_truth.end = r.f32();
    s.metadata.object = r.u32();
    s.metadata.pattern = r.u32();
    s.metadata.target_slot = r.u32();
    const std::uint32_t nd = r.u32();
    if (nd > r.remaining() / 24) throw FormatError(Kind::malformed, "distractor count exceeds payload");
    for (std::uint32_t j = 0; j < nd; ++j) {
      Distractor d;
      const std::uint32_t kind = r.u32();
      if (kind > 1) throw FormatError(Kind::malformed, "unknown distractor kind");
      d.kind = static_cast<DistractorKind>(kind);
      d.object = r.u32();
      d.pattern = r.u32();
      d.slot = r.u32();
      d.start = r.u32();
      d.end = r.u32();
      s.metadata.distractors.push_back(d);
    }
    Tensor boxes({T, K, 4});
    r.f32_into(boxes.values());
    for (Stream stream : kStreams) {
      auto& f = s.streams[stream_index(stream)];
      f.stream = stream;
      f.boxes = boxes;
      f.local = Tensor({T, K, Din});
      f.global = Tensor({T, Din});
      r.f32_into(f.local.values());
      r.f32_into(f.global.values());
    }
    s.query.embeddings = Tensor({m.max_words, m.word_dim});
    r.f32_into(s.query.embeddings.values());
    s.query.mask.resize(m.max_words);
    for (auto& bit : s.query.mask) {
      const float v = r.f32();
      if (v != 0.0f && v != 1.0f) throw FormatError(Kind::malformed, "query mask entries must be 0 or 1");
      bit = v == 1.0f;
    }
    try {
      validate_sample(s, out.config);
    } catch (const ValidationError& e) {
      throw FormatError(Kind::malformed, e.what());
    }
    samples.push_back(std::move(s));
  }
  if (!r.done()) throw FormatError(Kind::malformed, "trailing bytes after the last sample");
  out.samples = std::move(samples);
  return out;
}

void write_dataset(const Dataset& dataset, const std::string& path) { write_file(path, encode_dataset(dataset)); }

Dataset read_dataset(const std::string& path) { return decode_dataset(read_file(path)); }

}  // namespace ma3srn
