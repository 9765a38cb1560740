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


#include "lab/checkpoint.hpp"

#include "diffcore/errors.hpp"
#include "lab/container.hpp"
#include "lab/model.hpp"

namespace ma3srn {
namespace {

void put_tensor(ByteWriter& w, const Tensor& t) { w.f64_from(t.values()); }

Tensor get_tensor(ByteReader& r, const Shape& shape) {
  Tensor t(shape);
  r.f64_into(t.values());
  return t;
}

void load(const Checkpoint& c, GroundingModel& model, bool best) {
  auto& params = model.parameters();
  if (params.size() != c.parameters.size())
    throw ValidationError("checkpoint holds " + std::to_string(c.parameters.size()) + " parameters, model has " +
                          std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& s = c.parameters[i];
    auto& p = params[i];
    if (p.name != s.name) throw ValidationError("checkpoint parameter '" + s.name + "' where '" + p.name + "' expected");
    if (p.value.shape() != s.value.shape())
      throw ValidationError("checkpoint parameter '" + s.name + "' has shape " + shape_string(s.value.shape()));
    p.value = best ? s.best : s.value;
  }
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c) {
  ByteWriter w;
  w.string(c.config.dump());
  w.u64(c.step);
  w.u32(c.epoch);
  w.f64(c.best_metric);
  w.u32(c.best_epoch);
  w.u32(c.epochs_since_improvement);
  w.u32(c.finished ? 1 : 0);
  w.string(c.rng_state);
  w.u32(static_cast<std::uint32_t>(c.parameters.size()));
  for (const auto& p : c.parameters) {
    w.string(p.name);
    w.u32(static_cast<std::uint32_t>(p.value.rank()));
    for (auto extent : p.value.shape()) w.u32(static_cast<std::uint32_t>(extent));
    put_tensor(w, p.value);
    put_tensor(w, p.m);
    put_tensor(w, p.v);
    put_tensor(w, p.best);
  }
  w.u32(static_cast<std::uint32_t>(c.log.size()));
  for (const auto& e : c.log) {
    w.u32(e.epoch);
    w.f64(e.learning_rate);
    w.f64(e.train_loss);
    w.f64(e.eval_r1_05);
    w.f64(e.eval_r1_07);
  }
  return seal({kCheckpointMagic, 4}, kCheckpointVersion, w.bytes());
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> file) {
  using Kind = FormatError::Kind;
  const auto payload = unseal(file, {kCheckpointMagic, 4}, kCheckpointVersion);
  ByteReader r(payload);
  Checkpoint c;
  try {
    c.config = ExperimentConfig::parse(r.string());
  } catch (const ValidationError& e) {
    throw FormatError(Kind::malformed, std::string("checkpoint config echo: ") + e.what());
  }
  c.step = r.u64();
  c.epoch = r.u32();
  c.best_metric = r.f64();
  c.best_epoch = r.u32();
  c.epochs_since_improvement = r.u32();
  const std::uint32_t finished = r.u32();
  if (finished > 1) throw FormatError(Kind::malformed, "bad finished flag");
  c.finished = finished == 1;
  c.rng_state = r.string();
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    ParameterState p;
    p.name = r.string();
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw FormatError(Kind::malformed, "parameter rank " + std::to_string(rank));
    Shape shape(rank);
    for (auto& extent : shape) {
      extent = r.u32();
      if (extent == 0) throw FormatError(Kind::malformed, "zero extent in parameter " + p.name);
    }
    if (shape_size(shape) > r.remaining() / 8) throw FormatError(Kind::malformed, "parameter exceeds payload");
    p.value = get_tensor(r, shape);
    p.m = get_tensor(r, shape);
    p.v = get_tensor(r, shape);
    p.best = get_tensor(r, shape);
    c.parameters.push_back(std::move(p));
  }
  const std::uint32_t epochs = r.u32();
  for (std::uint32_t i = 0; i < epochs; ++i) {
    EpochRecord e;
    e.epoch = r.u32();
    e.learning_rate = r.f64();
    e.train_loss = r.f64();
    e.eval_r1_05 = r.f64();
    e.eval_r1_07 = r.f64();
    c.log.push_back(e);
  }
  if (!r.done()) throw FormatError(Kind::malformed, "trailing bytes in checkpoint");
  return c;
}

void write_checkpoint(const Checkpoint& c, const std::string& path) { write_file(path, encode_checkpoint(c)); }

Checkpoint read_checkpoint(const std::string& path) { return decode_checkpoint(read_file(path)); }

void load_best(const Checkpoint& c, GroundingModel& model) { load(c, model, true); }

void load_current(const Checkpoint& c, GroundingModel& model) { load(c, model, false); }

}  // namespace ma3srn
