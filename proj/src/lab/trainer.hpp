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

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "diffcore/errors.hpp"
#include "lab/checkpoint.hpp"
#include "lab/config.hpp"
#include "lab/synthetic.hpp"

namespace ma3srn {

/// Non-finite training loss; carries the 0-based global batch index.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(std::size_t batch, const std::string& what) : NumericalError(what), batch_(batch) {}
  std::size_t batch() const noexcept { return batch_; }

 private:
  std::size_t batch_;
};

struct TrainOptions {
  const Checkpoint* resume = nullptr;  // continue from this state
  std::optional<std::size_t> stop_after;  // epochs to run in this call
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Mini-batch Adam on the grounding loss with global-norm clipping and
/// optional linear decay to zero. After each epoch the model is scored on
/// `eval` (R@1 at IoU 0.5 and 0.7); training stops once that metric has not
/// improved for `patience` epochs. The returned checkpoint keeps both the
/// current and the best-epoch parameters.
Checkpoint train(const ExperimentConfig& config, const std::vector<SyntheticSample>& train_set,
                 const std::vector<SyntheticSample>& eval_set, const TrainOptions& options = {});

}  // namespace ma3srn
