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

#include "lab/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <zlib.h>

#include "diffcore/errors.hpp"

namespace ma3srn {
namespace {

using nlohmann::json;

constexpr std::array<std::pair<std::size_t, std::size_t>, 6> kGuidePairs{{
    {2, 0},  // threed_from_appearance
    {2, 1},  // threed_from_motion
    {0, 2},  // appearance_from_threed
    {0, 1},  // appearance_from_motion
    {1, 2},  // motion_from_threed
    {1, 0},  // motion_from_appearance
}};

std::string guide_name(std::size_t target, std::size_t source) {
  return std::string(stream_name(kStreams[target])) + "_from_" + std::string(stream_name(kStreams[source]));
}

// Reads keys of one JSON object into fields, rejecting anything unknown.
class Section {
 public:
  Section(const json& doc, std::string name) : name_(std::move(name)) {
    if (!doc.contains(name_)) return;
    node_ = &doc.at(name_);
    if (!node_->is_object()) throw ValidationError("config: '" + name_ + "' must be an object");
  }

  template <class T>
  Section& field(const char* key, T& out) {
    known_.insert(key);
    if (!node_ || !node_->contains(key)) return *this;
    try {
      out = node_->at(key).get<T>();
    } catch (const json::exception& e) {
      throw ValidationError("config: " + name_ + "." + key + ": " + e.what());
    }
    return *this;
  }

  void finish() const {
    if (!node_) return;
    for (const auto& [key, _] : node_->items())
      if (!known_.contains(key)) throw ValidationError("config: unknown key '" + name_ + "." + key + "'");
  }

 private:
  std::string name_;
  const json* node_ = nullptr;
  std::set<std::string> known_;
};

}  // namespace

bool AblationConfig::stream_enabled(Stream s) const {
  switch (s) {
    case Stream::appearance:
      return appearance;
    case Stream::motion:
      return motion;
    case Stream::threed:
      return threed;
  }
  return false;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& what) { throw ValidationError("config: " + what); };
  const auto& m = model;
  if (m.frames < 1 || m.objects < 1 || m.dim < 1 || m.input_dim < 1 || m.word_dim < 1 || m.gru_hidden < 1 ||
      m.max_words < 1)
    fail("model extents must be >= 1");
  if (m.heads < 1 || m.dim % m.heads != 0) fail("dim must be divisible by heads");
  if (m.dim % 8 != 0) fail("dim must be a multiple of 8 (position codes of even width dim/4)");
  if (grounding.widths.empty()) fail("grounding.widths must be non-empty");
  for (auto w : grounding.widths)
    if (w < 1) fail("grounding.widths must be >= 1");
  if (grounding.stride < 1) fail("grounding.stride must be >= 1");
  if (!(grounding.positive_threshold > 0.0 && grounding.positive_threshold < 1.0))
    fail("grounding.positive_threshold must lie in (0, 1)");
  if (!(grounding.boundary_weight >= 0.0)) fail("grounding.boundary_weight must be >= 0");
  if (!(grounding.nms_threshold > 0.0 && grounding.nms_threshold <= 1.0))
    fail("grounding.nms_threshold must lie in (0, 1]");
  if (grounding.top_n < 1) fail("grounding.top_n must be >= 1");
  if (!(optimizer.learning_rate >= 0.0)) fail("optimizer.learning_rate must be >= 0");
  if (optimizer.batch_size < 1 || optimizer.epochs < 1 || optimizer.patience < 1)
    fail("optimizer counts must be >= 1");
  if (!(optimizer.clip_norm > 0.0)) fail("optimizer.clip_norm must be > 0");
  if (data.train_count < 1 || data.test_count < 1) fail("data counts must be >= 1");
  if (data.object_vocab < 2 || data.pattern_vocab < 2) fail("data vocabularies must hold >= 2 entries");
  if (data.filler_vocab < 1) fail("data.filler_vocab must be >= 1");
  if (data.min_words < 2 || data.min_words > m.max_words) fail("data.min_words must lie in [2, max_words]");
  if (!(data.noise >= 0.0) || !(data.word_noise >= 0.0) || !(data.signal > 0.0))
    fail("data noise levels must be >= 0 and signal > 0");
  if (!ablation.appearance && !ablation.motion && !ablation.threed) fail("at least one stream must be enabled");
  // Anchors must exist for this geometry.
  bool any = false;
  for (auto w : grounding.widths) any = any || w <= m.frames;
  if (!any) fail("no proposal width fits in the configured frames");
}

BranchOptions ExperimentConfig::branch_options() const {
  return {ablation.gate, ablation.graph ? model.graph_layers : 0};
}

AssociatorOptions ExperimentConfig::associator_options() const { return {ablation.associator, ablation.guide}; }

json ExperimentConfig::to_json() const {
  json j;
  j["model"] = {{"frames", model.frames},       {"objects", model.objects},     {"dim", model.dim},
                {"input_dim", model.input_dim}, {"word_dim", model.word_dim},   {"heads", model.heads},
                {"gru_hidden", model.gru_hidden}, {"max_words", model.max_words}, {"graph_layers", model.graph_layers}};
  j["grounding"] = {{"widths", grounding.widths},
                    {"stride", grounding.stride},
                    {"positive_threshold", grounding.positive_threshold},
                    {"boundary_weight", grounding.boundary_weight},
                    {"nms_threshold", grounding.nms_threshold},
                    {"top_n", grounding.top_n}};
  j["optimizer"] = {{"learning_rate", optimizer.learning_rate}, {"batch_size", optimizer.batch_size},
                    {"epochs", optimizer.epochs},               {"clip_norm", optimizer.clip_norm},
                    {"seed", optimizer.seed},                   {"patience", optimizer.patience},
                    {"beta1", optimizer.beta1},                 {"beta2", optimizer.beta2},
                    {"epsilon", optimizer.epsilon},             {"linear_decay", optimizer.linear_decay}};
  j["data"] = {{"train_count", data.train_count},
               {"test_count", data.test_count},
               {"object_vocab", data.object_vocab},
               {"pattern_vocab", data.pattern_vocab},
               {"filler_vocab", data.filler_vocab},
               {"min_words", data.min_words},
               {"signal", data.signal},
               {"noise", data.noise},
               {"word_noise", data.word_noise},
               {"dictionary_seed", data.dictionary_seed},
               {"train_seed", data.train_seed},
               {"test_seed", data.test_seed}};
  json abl = {{"appearance", ablation.appearance}, {"motion", ablation.motion}, {"threed", ablation.threed},
              {"associator", ablation.associator}, {"graph", ablation.graph},   {"gate", ablation.gate}};
  for (auto [t, s] : kGuidePairs) abl[guide_name(t, s)] = ablation.guide[t][s];
  j["ablation"] = abl;
  return j;
}

std::string ExperimentConfig::dump() const { return to_json().dump(); }

std::string ExperimentConfig::hash() const {
  const std::string text = dump();
  const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(text.data()), static_cast<uInt>(text.size()));
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08lx", static_cast<unsigned long>(crc));
  return buf;
}

ExperimentConfig ExperimentConfig::from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("config: document must be a JSON object");
  static const std::set<std::string> sections{"model", "grounding", "optimizer", "data", "ablation"};
  for (const auto& [key, _] : doc.items())
    if (!sections.contains(key)) throw ValidationError("config: unknown key '" + key + "'");

  ExperimentConfig c;
  Section(doc, "model")
      .field("frames", c.model.frames)
      .field("objects", c.model.objects)
      .field("dim", c.model.dim)
      .field("input_dim", c.model.input_dim)
      .field("word_dim", c.model.word_dim)
      .field("heads", c.model.heads)
      .field("gru_hidden", c.model.gru_hidden)
      .field("max_words", c.model.max_words)
      .field("graph_layers", c.model.graph_layers)
      .finish();
  Section(doc, "grounding")
      .field("widths", c.grounding.widths)
      .field("stride", c.grounding.stride)
      .field("positive_threshold", c.grounding.positive_threshold)
      .field("boundary_weight", c.grounding.boundary_weight)
      .field("nms_threshold", c.grounding.nms_threshold)
      .field("top_n", c.grounding.top_n)
      .finish();
  Section(doc, "optimizer")
      .field("learning_rate", c.optimizer.learning_rate)
      .field("batch_size", c.optimizer.batch_size)
      .field("epochs", c.optimizer.epochs)
      .field("clip_norm", c.optimizer.clip_norm)
      .field("seed", c.optimizer.seed)
      .field("patience", c.optimizer.patience)
      .field("beta1", c.optimizer.beta1)
      .field("beta2", c.optimizer.beta2)
      .field("epsilon", c.optimizer.epsilon)
      .field("linear_decay", c.optimizer.linear_decay)
      .finish();
  Section(doc, "data")
      .field("train_count", c.data.train_count)
      .field("test_count", c.data.test_count)
      .field("object_vocab", c.data.object_vocab)
      .field("pattern_vocab", c.data.pattern_vocab)
      .field("filler_vocab", c.data.filler_vocab)
      .field("min_words", c.data.min_words)
      .field("signal", c.data.signal)
      .field("noise", c.data.noise)
      .field("word_noise", c.data.word_noise)
      .field("dictionary_seed", c.data.dictionary_seed)
      .field("train_seed", c.data.train_seed)
      .field("test_seed", c.data.test_seed)
      .finish();
  Section abl(doc, "ablation");
  abl.field("appearance", c.ablation.appearance)
      .field("motion", c.ablation.motion)
      .field("threed", c.ablation.threed)
      .field("associator", c.ablation.associator)
      .field("graph", c.ablation.graph)
      .field("gate", c.ablation.gate);
  std::vector<std::string> guide_keys;
  for (auto [t, s] : kGuidePairs) guide_keys.push_back(guide_name(t, s));
  for (std::size_t i = 0; i < kGuidePairs.size(); ++i) {
    bool value = true;
    abl.field(guide_keys[i].c_str(), value);
    c.ablation.guide[kGuidePairs[i].first][kGuidePairs[i].second] = value;
  }
  abl.finish();
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::parse(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return from_json(doc);
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(FormatError::Kind::io, "config: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

ExperimentConfig ExperimentConfig::gradcheck_preset() {
  ExperimentConfig c;
  c.model.frames = 8;
  c.model.objects = 3;
  c.model.dim = 16;
  c.model.input_dim = 8;
  c.model.word_dim = 8;
  c.model.heads = 2;
  c.model.gru_hidden = 8;
  c.model.max_words = 5;
  c.grounding.widths = {2, 4};
  c.data.object_vocab = 3;
  c.data.pattern_vocab = 3;
  c.data.filler_vocab = 2;
  c.data.min_words = 3;
  // Noisier than the desk task: with this sample every ReLU input stays more
  // than 1e-3 from zero, so central differences never straddle a kink.
  c.data.noise = 1.0;
  return c;
}

std::vector<std::string> ablation_flag_names() {
  std::vector<std::string> names{"appearance", "motion", "threed", "associator", "graph", "gate"};
  for (auto [t, s] : kGuidePairs) names.push_back(guide_name(t, s));
  return names;
}

void disable(ExperimentConfig& c, std::string_view flag) {
  auto& a = c.ablation;
  if (flag == "appearance") {
    a.appearance = false;
  } else if (flag == "motion") {
    a.motion = false;
  } else if (flag == "threed") {
    a.threed = false;
  } else if (flag == "associator") {
    a.associator = false;
  } else if (flag == "graph") {
    a.graph = false;
  } else if (flag == "gate") {
    a.gate = false;
  } else {
    bool found = false;
    for (auto [t, s] : kGuidePairs)
      if (flag == guide_name(t, s)) {
        a.guide[t][s] = false;
        found = true;
      }
    if (!found) throw ValidationError("unknown ablation flag '" + std::string(flag) + "'");
  }
  c.validate();
}

}  // namespace ma3srn
