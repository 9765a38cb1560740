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


#include "lab/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <sstream>

#include "diffcore/errors.hpp"
#include "lab/model.hpp"

namespace ma3srn {
namespace {

EvaluationReport summarise(const ExperimentConfig& config, const std::vector<SyntheticSample>& samples,
                           std::vector<SamplePrediction> predictions, const MetricGrid& grid) {
  if (samples.empty()) throw ValidationError("evaluate: no samples");
  EvaluationReport report;
  report.config_hash = config.hash();
  report.sample_count = samples.size();
  std::vector<std::vector<RankedSegment>> ranked;
  std::vector<Segment> truth;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    ranked.push_back(predictions[i].top);
    truth.push_back(samples[i].ground_truth);
  }
  for (auto n : grid.n)
    for (auto m : grid.m) report.metrics.emplace_back(metric_name(n, m), recall_at_n(ranked, truth, n, m));
  report.per_sample = std::move(predictions);
  return report;
}

std::size_t keep_count(const ExperimentConfig& config, const MetricGrid& grid) {
  std::size_t top = config.grounding.top_n;
  for (auto n : grid.n) top = std::max(top, n);
  return top;
}

ProposalSet bare_proposals(const ExperimentConfig& config) {
  ProposalSet p;
  p.frames = config.model.frames;
  p.anchors = generate_proposals(config.model.frames, config.grounding.widths, config.grounding.stride);
  p.start_offsets.assign(p.anchors.size(), 0.0);
  p.end_offsets.assign(p.anchors.size(), 0.0);
  return p;
}

}  // namespace

std::string metric_name(std::size_t n, double m) {
  std::ostringstream os;
  os << "R@" << n << ",IoU=" << m;
  return os.str();
}

double EvaluationReport::metric(std::size_t n, double m) const {
  const auto name = metric_name(n, m);
  for (const auto& [key, value] : metrics)
    if (key == name) return value;
  throw ValidationError("report has no metric " + name);
}

nlohmann::json EvaluationReport::to_json() const {
  nlohmann::json j;
  j["config_hash"] = config_hash;
  j["sample_count"] = sample_count;
  nlohmann::json metric_obj = nlohmann::json::object();
  for (const auto& [key, value] : metrics) metric_obj[key] = value;
  j["metrics"] = metric_obj;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& s : per_sample) {
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& r : s.top)
      segs.push_back({{"start", r.segment.start}, {"end", r.segment.end}, {"score", r.score}});
    rows.push_back({{"id", s.id}, {"top_segments", segs}});
  }
  j["per_sample"] = rows;
  return j;
}

std::string EvaluationReport::dump() const { return to_json().dump(2) + "\n"; }

std::string EvaluationReport::prediction_text() const {
  std::string out;
  char field[96];
  for (const auto& s : per_sample) {
    out += std::to_string(s.id);
    for (const auto& r : s.top) {
      std::snprintf(field, sizeof field, " %.6f %.6f %.6f", r.segment.start, r.segment.end, r.score);
      out += field;
    }
    out += '\n';
  }
  return out;
}

EvaluationReport evaluate(const GroundingModel& model, const std::vector<SyntheticSample>& samples,
                          const MetricGrid& grid) {
  const auto& config = model.config();
  for (const auto& s : samples) validate_sample(s, config);
  const std::size_t top = keep_count(config, grid);
  std::vector<SamplePrediction> predictions;
  for (const auto& s : samples)
    predictions.push_back({s.id, predict(model.infer(s), top, config.grounding.nms_threshold)});
  return summarise(config, samples, std::move(predictions), grid);
}

EvaluationReport evaluate_random(const ExperimentConfig& config, const std::vector<SyntheticSample>& samples,
                                 std::uint64_t seed, const MetricGrid& grid) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const std::size_t top = keep_count(config, grid);
  std::vector<SamplePrediction> predictions;
  for (const auto& s : samples) {
    auto p = bare_proposals(config);
    for (std::size_t r = 0; r < p.anchors.size(); ++r) p.scores.push_back(uniform(rng));
    predictions.push_back({s.id, predict(p, top, config.grounding.nms_threshold)});
  }
  return summarise(config, samples, std::move(predictions), grid);
}

EvaluationReport evaluate_oracle(const ExperimentConfig& config, const std::vector<SyntheticSample>& samples,
                                 const MetricGrid& grid) {
  const std::size_t top = keep_count(config, grid);
  std::vector<SamplePrediction> predictions;
  for (const auto& s : samples) {
    auto p = bare_proposals(config);
    for (const auto& a : p.anchors) p.scores.push_back(temporal_iou(a.segment(), s.ground_truth));
    predictions.push_back({s.id, predict(p, top, config.grounding.nms_threshold)});
  }
  return summarise(config, samples, std::move(predictions), grid);
}

GradcheckReport gradcheck_model(const ExperimentConfig& config, double h, double tol) {
  GroundingModel model(config);
  const auto sample = generate_samples(config, config.data.train_seed, 1).front();
  return finite_difference_check(
      model.parameters(), [&](Graph& g) { return model.loss(g, sample); }, h, tol);
}

}  // namespace ma3srn
