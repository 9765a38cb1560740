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
#include <vector>

#include "diffcore/tensor.hpp"
#include "lab/config.hpp"
#include "model/encoders.hpp"
#include "model/grounder.hpp"

namespace ma3srn {

/// Orthonormal signature rows. Feature rows live in D_in and hold the object
/// signatures followed by the pattern signatures; word rows live in D_w and
/// hold object, pattern, then filler words.
class SignatureDictionary {
 public:
  explicit SignatureDictionary(const ExperimentConfig& config);

  const Tensor& features() const { return features_; }  // [Vo + Vp, D_in]
  const Tensor& words() const { return words_; }        // [Vo + Vp + Vf, D_w]

  std::size_t object_row(std::size_t object) const { return object; }
  std::size_t pattern_row(std::size_t pattern) const { return objects_ + pattern; }
  std::size_t filler_row(std::size_t filler) const { return objects_ + patterns_ + filler; }

 private:
  std::size_t objects_;
  std::size_t patterns_;
  Tensor features_;
  Tensor words_;
};

enum class DistractorKind : std::uint32_t {
  appearance = 0,  // query object, other pattern
  motion = 1,      // other object, query pattern
};

struct Distractor {
  DistractorKind kind = DistractorKind::appearance;
  std::uint32_t object = 0;
  std::uint32_t pattern = 0;
  std::uint32_t slot = 0;
  std::uint32_t start = 0;
  std::uint32_t end = 0;  // exclusive
  friend bool operator==(const Distractor&, const Distractor&) = default;
};

struct SampleMetadata {
  std::uint32_t object = 0;
  std::uint32_t pattern = 0;
  std::uint32_t target_slot = 0;
  std::vector<Distractor> distractors;
  friend bool operator==(const SampleMetadata&, const SampleMetadata&) = default;
};

struct SyntheticSample {
  std::uint32_t id = 0;
  std::array<StreamObjectFeatures, 3> streams;  // indexed by stream_index
  QueryFeatures query;
  Segment ground_truth;
  SampleMetadata metadata;
  friend bool operator==(const SyntheticSample&, const SyntheticSample&) = default;
};

/// Fully determined by (seed, config). Every stored value is representable
/// as a 32-bit float.
SyntheticSample generate_sample(std::uint64_t seed, const ExperimentConfig& config, std::uint32_t id = 0);
SyntheticSample generate_sample(std::uint64_t seed, const ExperimentConfig& config, const SignatureDictionary& dict,
                                std::uint32_t id = 0);

/// Sample i is drawn from a seed derived from (seed, i) and carries id i.
std::vector<SyntheticSample> generate_samples(const ExperimentConfig& config, std::uint64_t seed, std::size_t count);

/// Throws ValidationError when the sample does not fit the config geometry.
void validate_sample(const SyntheticSample& sample, const ExperimentConfig& config);

}  // namespace ma3srn
