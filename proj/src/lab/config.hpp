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
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "model/associator.hpp"
#include "model/branch.hpp"

namespace ma3srn {

struct ModelConfig {
  std::size_t frames = 32;      // T
  std::size_t objects = 4;      // K
  std::size_t dim = 64;         // D
  std::size_t input_dim = 32;   // D_in
  std::size_t word_dim = 32;    // D_w
  std::size_t heads = 4;
  std::size_t gru_hidden = 32;
  std::size_t max_words = 8;    // N
  std::size_t graph_layers = 1;
};

struct GroundingConfig {
  std::vector<std::size_t> widths{4, 8, 16, 24, 32};
  std::size_t stride = 1;
  double positive_threshold = 0.55;  // lambda
  double boundary_weight = 0.005;    // alpha
  double nms_threshold = 0.5;
  std::size_t top_n = 5;
};

struct OptimizerConfig {
  double learning_rate = 3e-3;
  std::size_t batch_size = 16;
  std::size_t epochs = 12;
  double clip_norm = 1.0;
  std::uint64_t seed = 7;
  std::size_t patience = 10;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool linear_decay = true;
};

struct DataConfig {
  std::size_t train_count = 2000;
  std::size_t test_count = 500;
  std::size_t object_vocab = 8;
  std::size_t pattern_vocab = 8;
  std::size_t filler_vocab = 8;
  std::size_t min_words = 3;
  double signal = 3.0;
  double noise = 0.2;
  double word_noise = 0.1;
  std::uint64_t dictionary_seed = 1234;
  std::uint64_t train_seed = 1;
  std::uint64_t test_seed = 2;
};

struct AblationConfig {
  bool appearance = true;
  bool motion = true;
  bool threed = true;
  bool associator = true;
  bool graph = true;
  bool gate = true;
  // guide[target][source], indexed by stream_index.
  std::array<std::array<bool, 3>, 3> guide{{{false, true, true}, {true, false, true}, {true, true, false}}};

  bool stream_enabled(Stream s) const;
};

struct ExperimentConfig {
  ModelConfig model;
  GroundingConfig grounding;
  OptimizerConfig optimizer;
  DataConfig data;
  AblationConfig ablation;

  // Throws ValidationError naming the first violated constraint.
  void validate() const;

  BranchOptions branch_options() const;
  AssociatorOptions associator_options() const;

  // Canonical JSON; keys mirror the struct field names.
  nlohmann::json to_json() const;
  std::string dump() const;
  // CRC-32 of the canonical dump, 8 hex digits.
  std::string hash() const;

  // Missing keys keep desk defaults; unknown keys are rejected.
  static ExperimentConfig from_json(const nlohmann::json& doc);
  static ExperimentConfig parse(std::string_view text);
  static ExperimentConfig load(const std::string& path);

  // The tiny configuration used for gradient verification.
  static ExperimentConfig gradcheck_preset();
};

/// Names accepted by `disable`: appearance, motion, threed, associator,
/// graph, gate, and the six <target>_from_<source> guidance toggles.
std::vector<std::string> ablation_flag_names();
void disable(ExperimentConfig& config, std::string_view flag);

}  // namespace ma3srn
