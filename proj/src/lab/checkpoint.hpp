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
#include <span>
#include <string>
#include <vector>

#include "diffcore/tensor.hpp"
#include "lab/config.hpp"

namespace ma3srn {

class GroundingModel;

inline constexpr char kCheckpointMagic[] = "MA3C";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct EpochRecord {
  std::uint32_t epoch = 0;  // 1-based
  double learning_rate = 0.0;  // at the epoch's last step
  double train_loss = 0.0;     // mean over samples
  double eval_r1_05 = 0.0;     // R@1,IoU=0.5
  double eval_r1_07 = 0.0;     // R@1,IoU=0.7
  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct ParameterState {
  std::string name;
  Tensor value;  // current
  Tensor m;      // Adam first moment
  Tensor v;      // Adam second moment
  Tensor best;   // value at the best evaluation epoch
  friend bool operator==(const ParameterState&, const ParameterState&) = default;
};

/// Everything needed to resume training or to evaluate. Values are stored
/// as 64-bit floats so a resumed run continues bit-for-bit.
struct Checkpoint {
  ExperimentConfig config;
  std::uint64_t step = 0;
  std::uint32_t epoch = 0;  // completed epochs
  double best_metric = -1.0;
  std::uint32_t best_epoch = 0;
  std::uint32_t epochs_since_improvement = 0;
  bool finished = false;
  std::string rng_state;  // textual mt19937_64 state
  std::vector<ParameterState> parameters;
  std::vector<EpochRecord> log;
  friend bool operator==(const Checkpoint& a, const Checkpoint& b) {
    return a.config.dump() == b.config.dump() && a.step == b.step && a.epoch == b.epoch &&
           a.best_metric == b.best_metric && a.best_epoch == b.best_epoch &&
           a.epochs_since_improvement == b.epochs_since_improvement && a.finished == b.finished &&
           a.rng_state == b.rng_state && a.parameters == b.parameters && a.log == b.log;
  }
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> file);
void write_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint read_checkpoint(const std::string& path);

/// Copies the best (or current) values into a model built from the
/// checkpoint's config. Throws ValidationError when the name sets differ.
void load_best(const Checkpoint& checkpoint, GroundingModel& model);
void load_current(const Checkpoint& checkpoint, GroundingModel& model);

}  // namespace ma3srn
