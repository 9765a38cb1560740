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

#include "model/grounder.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "diffcore/errors.hpp"
#include "diffcore/ops.hpp"

namespace ma3srn {

std::size_t ProposalTargets::positive_count() const {
  return static_cast<std::size_t>(std::count(positive.begin(), positive.end(), std::uint8_t{1}));
}

std::vector<Anchor> generate_proposals(std::size_t frames, std::span<const std::size_t> widths, std::size_t stride) {
  if (widths.empty()) throw ValidationError("proposals: no widths");
  if (stride == 0) throw ValidationError("proposals: stride must be >= 1");
  for (auto w : widths)
    if (w == 0) throw ValidationError("proposals: widths must be >= 1");
  std::vector<Anchor> anchors;
  for (std::size_t t = 0; t < frames; t += stride)
    for (std::size_t wi = 0; wi < widths.size(); ++wi)
      if (t + widths[wi] <= frames) anchors.push_back({t, wi, t + widths[wi]});
  if (anchors.empty()) throw ValidationError("proposals: no width fits in " + std::to_string(frames) + " frames");
  return anchors;
}

double temporal_iou(Segment a, Segment b) {
  if (!a.valid() || !b.valid()) throw ValidationError("temporal_iou: segment start must precede its end");
  const double inter = std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
  const double uni = std::max(a.end, b.end) - std::min(a.start, b.start);
  return inter / uni;
}

ProposalTargets attach_targets(std::span<const Anchor> anchors, Segment gt, double threshold) {
  if (!gt.valid()) throw ValidationError("attach_targets: invalid ground truth");
  ProposalTargets out;
  out.iou.reserve(anchors.size());
  for (const auto& a : anchors) {
    const double iou = temporal_iou(a.segment(), gt);
    const bool pos = iou > threshold;
    out.iou.push_back(iou);
    out.positive.push_back(pos ? 1 : 0);
    out.start_offset.push_back(pos ? gt.start - static_cast<double>(a.start) : 0.0);
    out.end_offset.push_back(pos ? gt.end - static_cast<double>(a.end) : 0.0);
  }
  return out;
}

Var loss_iou(Var scores, std::span<const double> targets) {
  if (scores.value().size() != targets.size())
    throw ShapeError("loss_iou: " + std::to_string(scores.value().size()) + " scores vs " +
                     std::to_string(targets.size()) + " targets");
  Tensor t(scores.shape(), std::vector<double>(targets.begin(), targets.end()));
  return ops::mean_all(ops::binary_cross_entropy(scores, t));
}

Var loss_boundary(Var offsets, const ProposalTargets& targets) {
  const std::size_t count = targets.positive_count();
  if (count == 0) return offsets.graph().constant(Tensor::scalar(0.0));
  std::vector<std::size_t> idx;
  std::vector<double> goal;
  for (std::size_t r = 0; r < targets.positive.size(); ++r) {
    if (!targets.positive[r]) continue;
    idx.push_back(2 * r);
    idx.push_back(2 * r + 1);
    goal.push_back(targets.start_offset[r]);
    goal.push_back(targets.end_offset[r]);
  }
  Var picked = ops::gather(offsets, std::move(idx));
  const std::size_t n = goal.size();
  Var err = ops::sub(picked, offsets.graph().constant(Tensor({n}, std::move(goal))));
  return ops::scale(ops::sum_all(ops::smooth_l1(err)), 1.0 / static_cast<double>(count));
}

Var total_loss(Var iou, Var boundary, double alpha) {
  return ops::add(iou, ops::scale(boundary, alpha));
}

std::vector<RankedSegment> predict(const ProposalSet& p, std::size_t top_n, double nms_threshold) {
  const std::size_t r = p.anchors.size();
  if (p.scores.size() != r || p.start_offsets.size() != r || p.end_offsets.size() != r)
    throw ShapeError("predict: scores/offsets do not match anchor count");
  const double limit = static_cast<double>(p.frames);
  std::vector<RankedSegment> candidates;
  candidates.reserve(r);
  for (std::size_t i = 0; i < r; ++i) {
    Segment s{static_cast<double>(p.anchors[i].start) + p.start_offsets[i],
              static_cast<double>(p.anchors[i].end) + p.end_offsets[i]};
    s.start = std::clamp(s.start, 0.0, limit);
    s.end = std::clamp(s.end, 0.0, limit);
    if (!(s.start < s.end)) continue;
    candidates.push_back({s, p.scores[i]});
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const RankedSegment& a, const RankedSegment& b) { return a.score > b.score; });
  std::vector<RankedSegment> kept;
  for (const auto& c : candidates) {
    if (kept.size() >= top_n) break;
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const RankedSegment& k) {
      return temporal_iou(k.segment, c.segment) > nms_threshold;
    });
    if (!suppressed) kept.push_back(c);
  }
  return kept;
}

double recall_at_n(std::span<const std::vector<RankedSegment>> predictions, std::span<const Segment> ground_truth,
                   std::size_t n, double m) {
  if (predictions.empty()) throw ValidationError("recall_at_n: empty sample set");
  if (predictions.size() != ground_truth.size()) throw ValidationError("recall_at_n: prediction/ground-truth mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto& ranked = predictions[i];
    const std::size_t upto = std::min(n, ranked.size());
    for (std::size_t j = 0; j < upto; ++j)
      if (temporal_iou(ranked[j].segment, ground_truth[i]) > m) {
        ++hits;
        break;
      }
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(predictions.size());
}

GroundingHead::GroundingHead(ParameterStore& params, std::size_t frames, std::size_t dim,
                             std::vector<std::size_t> widths, std::size_t stride, std::mt19937_64& rng)
    : frames_(frames), dim_(dim), widths_(std::move(widths)) {
  anchors_ = generate_proposals(frames_, widths_, stride);
  const std::size_t nw = widths_.size();
  for (const auto& a : anchors_) {
    if (a.start >= frames_ || a.width_index >= nw) throw ShapeError("grounding head: anchor outside head outputs");
    score_index_.push_back(a.start * nw + a.width_index);
    offset_index_.push_back(a.start * 2 * nw + 2 * a.width_index);
    offset_index_.push_back(a.start * 2 * nw + 2 * a.width_index + 1);
  }
  conv1_w_ = &params.add("head.conv1.W", glorot_uniform({3 * dim, dim}, 3 * dim, dim, rng));
  conv1_b_ = &params.add("head.conv1.b", Tensor({dim}));
  conv2_w_ = &params.add("head.conv2.W", glorot_uniform({3 * dim, dim}, 3 * dim, dim, rng));
  conv2_b_ = &params.add("head.conv2.b", Tensor({dim}));
  score_w_ = &params.add("head.score.W", glorot_matrix(dim, nw, rng));
  score_b_ = &params.add("head.score.b", Tensor({nw}));
  offset_w_ = &params.add("head.offset.W", glorot_matrix(dim, 2 * nw, rng));
  offset_b_ = &params.add("head.offset.b", Tensor({2 * nw}));
}

HeadOutputs GroundingHead::score(Graph& g, Var fused) const {
  if (fused.shape() != Shape{frames_, dim_})
    throw ShapeError("grounding head: input " + shape_string(fused.shape()) + ", expected " +
                     shape_string({frames_, dim_}));
  Var x = ops::relu(ops::conv1d(fused, g.parameter(*conv1_w_), g.parameter(*conv1_b_)));
  x = ops::conv1d(x, g.parameter(*conv2_w_), g.parameter(*conv2_b_));
  Var logits = ops::linear(x, g.parameter(*score_w_), g.parameter(*score_b_));
  Var offsets = ops::linear(x, g.parameter(*offset_w_), g.parameter(*offset_b_));
  Var scores = ops::sigmoid(ops::gather(logits, score_index_));
  Var picked = ops::reshape(ops::gather(offsets, offset_index_), {anchors_.size(), 2});
  return {scores, picked};
}

ProposalSet GroundingHead::proposals(const HeadOutputs& outputs) const {
  ProposalSet p;
  p.frames = frames_;
  p.anchors = anchors_;
  const auto& s = outputs.scores.value();
  const auto& o = outputs.offsets.value();
  p.scores.assign(s.values().begin(), s.values().end());
  for (std::size_t r = 0; r < anchors_.size(); ++r) {
    p.start_offsets.push_back(o[2 * r]);
    p.end_offsets.push_back(o[2 * r + 1]);
  }
  return p;
}

}  // namespace ma3srn
