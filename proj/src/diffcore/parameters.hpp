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
#include <map>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "diffcore/tensor.hpp"

namespace ma3srn {

/// A learnable tensor with its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;  // same shape as value
};

/// Owns every parameter of a model. Addresses are stable for the store's
/// lifetime and iteration follows registration order.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;
  ParameterStore(ParameterStore&&) = default;
  ParameterStore& operator=(ParameterStore&&) = default;

  // Throws ValidationError on a duplicate name.
  Parameter& add(std::string name, Tensor init);

  Parameter& get(std::string_view name);
  const Parameter& get(std::string_view name) const;
  Parameter* find(std::string_view name) noexcept;

  std::size_t size() const noexcept { return items_.size(); }
  std::size_t scalar_count() const noexcept;

  Parameter& operator[](std::size_t i) { return *items_[i]; }
  const Parameter& operator[](std::size_t i) const { return *items_[i]; }

  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.cbegin(); }
  auto end() const { return items_.cend(); }

  void zero_grad();
  std::vector<std::string> names() const;

 private:
  std::vector<std::unique_ptr<Parameter>> items_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

// Variance-preserving scaled-uniform init: U(-a, a), a = sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

// Weight matrix [fan_in, fan_out] with glorot init.
Tensor glorot_matrix(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

}  // namespace ma3srn
