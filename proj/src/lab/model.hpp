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
#include <memory>
#include <optional>
#include <random>
#include <string_view>

#include "diffcore/graph.hpp"
#include "diffcore/parameters.hpp"
#include "lab/config.hpp"
#include "lab/synthetic.hpp"
#include "model/associator.hpp"
#include "model/branch.hpp"
#include "model/encoders.hpp"
#include "model/grounder.hpp"

namespace ma3srn {

struct ForwardResult {
  HeadOutputs head;
  ProposalSet proposals;
  FusedFrames fused;
  EncodedQuery query;
  std::array<std::optional<BranchOutput>, 3> branches;
};

/// Full grounding network built from a config. Disabled streams own no
/// encoder or branch parameters; each module draws its initial weights from
/// a generator keyed by (seed, module name), so variants that share a module
/// also share its initialisation.
class GroundingModel {
 public:
  explicit GroundingModel(const ExperimentConfig& config);
  GroundingModel(const GroundingModel&) = delete;
  GroundingModel& operator=(const GroundingModel&) = delete;

  const ExperimentConfig& config() const { return config_; }
  ParameterStore& parameters() { return params_; }
  const ParameterStore& parameters() const { return params_; }

  ForwardResult forward(Graph& g, const SyntheticSample& sample) const;
  // Confidence BCE plus alpha times the boundary loss, with targets attached
  // to `result->proposals` when given.
  Var loss(Graph& g, const SyntheticSample& sample, ForwardResult* result = nullptr) const;
  ProposalSet infer(const SyntheticSample& sample) const;

  /// Throws ValidationError when samples made under `data` cannot be fed to
  /// this model.
  void check_compatible(const ExperimentConfig& data) const;

 private:
  std::mt19937_64 module_rng(std::string_view name) const;

  ExperimentConfig config_;
  ParameterStore params_;
  std::array<std::unique_ptr<StreamEncoder>, 3> encoders_;
  std::unique_ptr<QueryEncoder> query_;
  std::array<std::unique_ptr<ReasoningBranch>, 3> branches_;
  std::unique_ptr<Associator> associator_;
  std::unique_ptr<GroundingHead> head_;
};

}  // namespace ma3srn
