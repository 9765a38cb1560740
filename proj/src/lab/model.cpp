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


#include "lab/model.hpp"

#include <string>

#include "diffcore/errors.hpp"
#include "lab/container.hpp"

namespace ma3srn {

std::mt19937_64 GroundingModel::module_rng(std::string_view name) const {
  const std::uint64_t seed = config_.optimizer.seed;
  const std::uint32_t tag = crc32_of({reinterpret_cast<const std::uint8_t*>(name.data()), name.size()});
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), tag};
  return std::mt19937_64(seq);
}

GroundingModel::GroundingModel(const ExperimentConfig& config) : config_(config) {
  config_.validate();
  const auto& m = config_.model;
  const EncoderDims dims{m.frames, m.objects, m.input_dim, m.dim};
  for (Stream s : kStreams) {
    if (!config_.ablation.stream_enabled(s)) continue;
    const std::string name(stream_name(s));
    auto rng = module_rng("encoder." + name);
    encoders_[stream_index(s)] = std::make_unique<StreamEncoder>(params_, s, dims, rng);
  }
  {
    auto rng = module_rng("query");
    query_ = std::make_unique<QueryEncoder>(params_, QueryEncoderDims{m.word_dim, m.dim, m.heads, m.gru_hidden}, rng);
  }
  for (Stream s : kStreams) {
    if (!config_.ablation.stream_enabled(s)) continue;
    auto rng = module_rng("branch." + std::string(stream_name(s)));
    branches_[stream_index(s)] =
        std::make_unique<ReasoningBranch>(params_, s, m.dim, config_.branch_options(), rng);
  }
  if (config_.ablation.associator) {
    auto rng = module_rng("assoc");
    associator_ = std::make_unique<Associator>(params_, m.dim, m.heads, config_.associator_options(), rng);
  }
  auto rng = module_rng("head");
  head_ = std::make_unique<GroundingHead>(params_, m.frames, m.dim, config_.grounding.widths,
                                          config_.grounding.stride, rng);
}

void GroundingModel::check_compatible(const ExperimentConfig& data) const {
  const auto& a = config_.model;
  const auto& b = data.model;
  auto check = [](const char* what, std::size_t model, std::size_t samples) {
    if (model != samples)
      throw ValidationError(std::string("dimension mismatch: ") + what + " is " + std::to_string(model) +
                            " in the model but " + std::to_string(samples) + " in the data");
  };
  check("frames", a.frames, b.frames);
  check("objects", a.objects, b.objects);
  check("input_dim", a.input_dim, b.input_dim);
  check("word_dim", a.word_dim, b.word_dim);
  check("max_words", a.max_words, b.max_words);
}

ForwardResult GroundingModel::forward(Graph& g, const SyntheticSample& sample) const {
  const auto& m = config_.model;
  ForwardResult out;
  out.query = query_->encode(g, sample.query);
  StreamFrames frames;
  for (Stream s : kStreams) {
    const std::size_t i = stream_index(s);
    if (!encoders_[i]) continue;
    const auto encoded = encoders_[i]->encode(g, sample.streams[i]);
    out.branches[i] = branches_[i]->forward(g, encoded, out.query, m.frames, m.objects);
    frames[i] = out.branches[i]->frames;
  }
  out.fused = associator_ ? associator_->associate(g, frames, out.query.sentence)
                          : fuse_streams(frames, out.query.sentence);
  out.head = head_->score(g, out.fused.frames);
  out.proposals = head_->proposals(out.head);
  return out;
}

Var GroundingModel::loss(Graph& g, const SyntheticSample& sample, ForwardResult* result) const {
  ForwardResult local;
  ForwardResult& r = result ? *result : local;
  r = forward(g, sample);
  const auto targets = attach_targets(r.proposals.anchors, sample.ground_truth, config_.grounding.positive_threshold);
  const Var iou = loss_iou(r.head.scores, targets.iou);
  const Var boundary = loss_boundary(r.head.offsets, targets);
  r.proposals.targets = targets;
  return total_loss(iou, boundary, config_.grounding.boundary_weight);
}

ProposalSet GroundingModel::infer(const SyntheticSample& sample) const {
  Graph g;
  return forward(g, sample).proposals;
}

}  // namespace ma3srn
