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


#include "lab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "lab/evaluation.hpp"
#include "lab/model.hpp"

namespace ma3srn {
namespace {

std::string save_rng(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

std::mt19937_64 restore_rng(const std::string& text) {
  std::mt19937_64 rng;
  std::istringstream is(text);
  is >> rng;
  if (!is) throw ValidationError("checkpoint: unreadable generator state");
  return rng;
}

Checkpoint fresh_state(const ExperimentConfig& config, const GroundingModel& model) {
  Checkpoint c;
  c.config = config;
  for (const auto& p : model.parameters()) {
    c.parameters.push_back({p->name, p->value, Tensor::filled(p->value.shape(), 0.0),
                            Tensor::filled(p->value.shape(), 0.0), p->value});
  }
  std::seed_seq seq{static_cast<std::uint32_t>(config.optimizer.seed),
                    static_cast<std::uint32_t>(config.optimizer.seed >> 32), 0x5eedu};
  c.rng_state = save_rng(std::mt19937_64(seq));
  return c;
}

}  // namespace

Checkpoint train(const ExperimentConfig& config, const std::vector<SyntheticSample>& train_set,
                 const std::vector<SyntheticSample>& eval_set, const TrainOptions& options) {
  config.validate();
  if (train_set.empty()) throw ValidationError("train: empty training set");
  if (eval_set.empty()) throw ValidationError("train: empty evaluation set");
  for (const auto& s : train_set) validate_sample(s, config);
  for (const auto& s : eval_set) validate_sample(s, config);

  GroundingModel model(config);
  Checkpoint state;
  if (options.resume) {
    state = *options.resume;
    if (state.config.dump() != config.dump()) throw ValidationError("train: resume checkpoint has a different config");
    load_current(state, model);
  } else {
    state = fresh_state(config, model);
  }
  if (state.finished) return state;

  const auto& opt = config.optimizer;
  auto& params = model.parameters();
  std::mt19937_64 rng = restore_rng(state.rng_state);
  const std::size_t batch = opt.batch_size;
  const std::size_t batches = (train_set.size() + batch - 1) / batch;
  const double total_steps = static_cast<double>(opt.epochs * batches);

  std::vector<std::size_t> order(train_set.size());
  std::size_t ran = 0;
  while (state.epoch < opt.epochs && (!options.stop_after || ran < *options.stop_after)) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    double lr = opt.learning_rate;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t lo = b * batch, hi = std::min(train_set.size(), lo + batch);
      params.zero_grad();
      for (std::size_t i = lo; i < hi; ++i) {
        Graph g;
        const Var loss = model.loss(g, train_set[order[i]]);
        const double value = loss.value()[0];
        const std::size_t global_batch = state.epoch * batches + b;
        if (!std::isfinite(value))
          throw DivergenceError(global_batch, "non-finite loss in batch " + std::to_string(global_batch) +
                                                  " (epoch " + std::to_string(state.epoch + 1) + ")");
        loss_sum += value;
        g.backward(loss);
      }
      const double inv = 1.0 / static_cast<double>(hi - lo);
      double norm2 = 0.0;
      for (auto& p : params) {
        for (auto& x : p->grad.values()) {
          x *= inv;
          norm2 += x * x;
        }
      }
      const double norm = std::sqrt(norm2);
      const double clip = norm > opt.clip_norm ? opt.clip_norm / norm : 1.0;

      lr = opt.learning_rate;
      if (opt.linear_decay) lr *= std::max(0.0, 1.0 - static_cast<double>(state.step) / total_steps);
      ++state.step;
      const double t = static_cast<double>(state.step);
      const double c1 = 1.0 - std::pow(opt.beta1, t), c2 = 1.0 - std::pow(opt.beta2, t);
      for (std::size_t k = 0; k < params.size(); ++k) {
        auto& p = params[k];
        auto& s = state.parameters[k];
        auto value = p.value.values();
        auto grad = p.grad.values();
        auto m = s.m.values();
        auto v = s.v.values();
        for (std::size_t i = 0; i < value.size(); ++i) {
          const double gi = grad[i] * clip;
          m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * gi;
          v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * gi * gi;
          value[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + opt.epsilon);
        }
      }
    }
    ++state.epoch;
    ++ran;

    const auto report = evaluate(model, eval_set, MetricGrid{{1}, {0.5, 0.7}});
    EpochRecord record{state.epoch, lr, loss_sum / static_cast<double>(train_set.size()), report.metric(1, 0.5),
                       report.metric(1, 0.7)};
    state.log.push_back(record);
    for (std::size_t k = 0; k < params.size(); ++k) state.parameters[k].value = params[k].value;
    if (record.eval_r1_05 > state.best_metric) {
      state.best_metric = record.eval_r1_05;
      state.best_epoch = state.epoch;
      state.epochs_since_improvement = 0;
      for (std::size_t k = 0; k < params.size(); ++k) state.parameters[k].best = params[k].value;
    } else {
      ++state.epochs_since_improvement;
    }
    state.rng_state = save_rng(rng);
    if (options.on_epoch) options.on_epoch(record);
    if (state.epochs_since_improvement >= opt.patience) break;
  }
  state.finished = state.epoch >= opt.epochs || state.epochs_since_improvement >= opt.patience;
  return state;
}

}  // namespace ma3srn
