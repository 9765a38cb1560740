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
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "diffcore/graph.hpp"
#include "diffcore/parameters.hpp"

namespace ma3srn {

/// Half-open temporal interval in frame units.
struct Segment {
  double start = 0.0;
  double end = 0.0;

  bool valid() const { return start < end; }
  double length() const { return end - start; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

struct Anchor {
  std::size_t start = 0;        // first frame
  std::size_t width_index = 0;  // index into the configured widths
  std::size_t end = 0;          // start + width

  Segment segment() const { return {static_cast<double>(start), static_cast<double>(end)}; }
  friend bool operator==(const Anchor&, const Anchor&) = default;
};

struct ProposalTargets {
  std::vector<double> iou;               // o^gt per anchor
  std::vector<std::uint8_t> positive;    // o^gt > threshold
  std::vector<double> start_offset;      // gs - tau_s
  std::vector<double> end_offset;        // ge - tau_e
  std::size_t positive_count() const;
};

struct ProposalSet {
  std::size_t frames = 0;
  std::vector<Anchor> anchors;
  std::vector<double> scores;         // o in (0, 1)
  std::vector<double> start_offsets;  // delta_s
  std::vector<double> end_offsets;    // delta_e
  std::optional<ProposalTargets> targets;
};

struct RankedSegment {
  Segment segment;
  double score = 0.0;
};

/// Anchors (t, w) for t in {0, stride, 2*stride, ...} with t + width <= T,
/// ordered by start then width. Throws ValidationError if none fit.
std::vector<Anchor> generate_proposals(std::size_t frames, std::span<const std::size_t> widths, std::size_t stride);

/// |a n b| / |a u b|; throws ValidationError on an empty or reversed segment.
double temporal_iou(Segment a, Segment b);

ProposalTargets attach_targets(std::span<const Anchor> anchors, Segment ground_truth, double threshold);

/// Mean binary cross-entropy between scores [R] and IoU targets.
Var loss_iou(Var scores, std::span<const double> targets);
/// Mean smooth-L1 boundary error over positive anchors; offsets are [R, 2].
/// A graph constant 0 when there are no positives.
Var loss_boundary(Var offsets, const ProposalTargets& targets);
Var total_loss(Var iou, Var boundary, double alpha);

/// Refines each anchor by its offsets, clamps to [0, T], drops empty
/// segments, ranks by score (ties keep anchor order), applies greedy NMS
/// (suppressing IoU > nms_threshold) and returns the first `top_n`.
std::vector<RankedSegment> predict(const ProposalSet& proposals, std::size_t top_n, double nms_threshold);

/// Percentage of samples whose top-n predictions hold a segment with
/// IoU > m against ground truth.
double recall_at_n(std::span<const std::vector<RankedSegment>> predictions, std::span<const Segment> ground_truth,
                   std::size_t n, double m);

struct HeadOutputs {
  Var scores;   // [R], sigmoid confidences
  Var offsets;  // [R, 2]
};

/// Two kernel-3 temporal convolutions with a rectifier between, then
/// per-frame linear heads: |widths| confidence logits and 2|widths| offsets.
class GroundingHead {
 public:
  GroundingHead(ParameterStore& params, std::size_t frames, std::size_t dim, std::vector<std::size_t> widths,
                std::size_t stride, std::mt19937_64& rng);

  HeadOutputs score(Graph& g, Var fused) const;
  ProposalSet proposals(const HeadOutputs& outputs) const;

  const std::vector<Anchor>& anchors() const { return anchors_; }
  std::size_t frames() const { return frames_; }

 private:
  std::size_t frames_;
  std::size_t dim_;
  std::vector<std::size_t> widths_;
  std::vector<Anchor> anchors_;
  std::vector<std::size_t> score_index_;
  std::vector<std::size_t> offset_index_;
  Parameter* conv1_w_;
  Parameter* conv1_b_;
  Parameter* conv2_w_;
  Parameter* conv2_b_;
  Parameter* score_w_;
  Parameter* score_b_;
  Parameter* offset_w_;
  Parameter* offset_b_;
};

}  // namespace ma3srn
