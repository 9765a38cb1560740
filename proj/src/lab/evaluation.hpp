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
#include <utility>
#include <vector>

#include <json.hpp>

#include "diffcore/gradcheck.hpp"
#include "lab/config.hpp"
#include "lab/synthetic.hpp"
#include "model/grounder.hpp"

namespace ma3srn {

class GroundingModel;

struct MetricGrid {
  std::vector<std::size_t> n{1, 5};
  std::vector<double> m{0.5, 0.7};
};

/// "R@{n},IoU={m}", e.g. "R@1,IoU=0.5".
std::string metric_name(std::size_t n, double m);

struct SamplePrediction {
  std::uint32_t id = 0;
  std::vector<RankedSegment> top;
};

struct EvaluationReport {
  std::string config_hash;
  std::size_t sample_count = 0;
  std::vector<std::pair<std::string, double>> metrics;  // grid order: n outer, m inner
  std::vector<SamplePrediction> per_sample;

  double metric(std::size_t n, double m) const;  // throws if absent
  nlohmann::json to_json() const;
  std::string dump() const;  // pretty JSON, trailing newline
  // One line per sample: id, then start end score for each ranked segment,
  // 6 fractional digits.
  std::string prediction_text() const;
};

/// Scores every sample with the model and applies predict + recall_at_n.
EvaluationReport evaluate(const GroundingModel& model, const std::vector<SyntheticSample>& samples,
                          const MetricGrid& grid = {});

/// Anchors ranked by seeded uniform scores with zero offsets.
EvaluationReport evaluate_random(const ExperimentConfig& config, const std::vector<SyntheticSample>& samples,
                                 std::uint64_t seed, const MetricGrid& grid = {});

/// Anchors ranked by their true IoU with the ground truth, zero offsets.
EvaluationReport evaluate_oracle(const ExperimentConfig& config, const std::vector<SyntheticSample>& samples,
                                 const MetricGrid& grid = {});

/// Finite-difference check of the full training loss on one generated
/// sample (drawn from data.train_seed).
GradcheckReport gradcheck_model(const ExperimentConfig& config, double h, double tol);

}  // namespace ma3srn
