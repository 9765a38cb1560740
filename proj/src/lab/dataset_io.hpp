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

#include <cstdint>
#include <string>
#include <vector>

#include "lab/config.hpp"
#include "lab/synthetic.hpp"

namespace ma3srn {

inline constexpr char kDatasetMagic[] = "MA3S";
inline constexpr std::uint32_t kDatasetVersion = 1;

struct Dataset {
  ExperimentConfig config;  // geometry the samples were generated with
  std::vector<SyntheticSample> samples;
};

/// Payload: config JSON (u32 length + bytes), u32 sample count, then per
/// sample:
///   u32 id; f32 gs, ge; u32 object, pattern, target slot;
///   u32 distractor count, each u32 kind, object, pattern, slot, start, end;
///   f32 boxes [T,K,4];
///   per stream (appearance, motion, threed): f32 local [T,K,D_in], f32 global [T,D_in];
///   f32 query embeddings [N,D_w]; f32 mask [N].
std::vector<std::uint8_t> encode_dataset(const Dataset& dataset);
Dataset decode_dataset(std::span<const std::uint8_t> file);

void write_dataset(const Dataset& dataset, const std::string& path);
Dataset read_dataset(const std::string& path);

}  // namespace ma3srn
