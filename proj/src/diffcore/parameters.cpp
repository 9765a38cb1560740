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

#include "diffcore/parameters.hpp"

#include <cmath>

#include "diffcore/errors.hpp"

namespace ma3srn {

Parameter& ParameterStore::add(std::string name, Tensor init) {
  if (index_.contains(name)) throw ValidationError("duplicate parameter name: " + name);
  auto param = std::make_unique<Parameter>();
  param->name = name;
  param->grad = Tensor(init.shape());
  param->value = std::move(init);
  index_.emplace(std::move(name), items_.size());
  items_.push_back(std::move(param));
  return *items_.back();
}

Parameter& ParameterStore::get(std::string_view name) {
  auto* p = find(name);
  if (!p) throw ValidationError("unknown parameter: " + std::string(name));
  return *p;
}

const Parameter& ParameterStore::get(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ValidationError("unknown parameter: " + std::string(name));
  return *items_[it->second];
}

Parameter* ParameterStore::find(std::string_view name) noexcept {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : items_[it->second].get();
}

std::size_t ParameterStore::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : items_) n += p->value.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : items_) p->grad.fill(0.0);
}

std::vector<std::string> ParameterStore::names() const {
  std::vector<std::string> out;
  out.reserve(items_.size());
  for (const auto& p : items_) out.push_back(p->name);
  return out;
}

Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

Tensor glorot_matrix(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  return glorot_uniform({fan_in, fan_out}, fan_in, fan_out, rng);
}

}  // namespace ma3srn
