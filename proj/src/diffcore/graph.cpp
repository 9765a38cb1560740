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

#include "diffcore/graph.hpp"

#include <string>

#include "diffcore/errors.hpp"

namespace ma3srn {

const Tensor& Var::value() const { return graph_->value(id_); }

Var Graph::constant(Tensor value) {
  Node n;
  n.op = "constant";
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Graph::parameter(Parameter& param) {
  if (auto it = parameter_nodes_.find(&param); it != parameter_nodes_.end()) return Var(this, it->second);
  Node n;
  n.op = "parameter";
  n.value = param.value;
  n.parameter = &param;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  parameter_nodes_.emplace(&param, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Var Graph::record(std::string_view op, Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
  Node n;
  n.op = op;
  n.value = std::move(value);
  for (auto id : inputs) {
    if (id >= nodes_.size()) throw std::logic_error(std::string(op) + ": input refers to a later node");
    n.requires_grad = n.requires_grad || nodes_[id].requires_grad;
  }
  n.inputs = std::move(inputs);
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Tensor& Graph::grad(std::size_t id) {
  auto& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

const Tensor* Graph::grad_if_any(std::size_t id) const {
  const auto& n = nodes_[id];
  return n.grad.empty() ? nullptr : &n.grad;
}

void Graph::backward(Var loss) {
  if (&loss.graph() != this) throw std::logic_error("backward: loss belongs to another graph");
  const std::size_t root = loss.id();
  if (nodes_[root].value.size() != 1)
    throw ShapeError("backward: loss must be a scalar, got " + shape_string(nodes_[root].value.shape()));
  for (std::size_t id = 0; id <= root; ++id)
    for (auto in : nodes_[id].inputs)
      if (in >= id) throw std::logic_error("backward: graph contains a cycle");

  for (auto& n : nodes_) n.grad = Tensor();
  grad(root).fill(1.0);
  for (std::size_t id = root + 1; id-- > 0;) {
    const Node& n = nodes_[id];
    if (n.grad.empty() || !n.requires_grad) continue;
    if (n.parameter) {
      n.parameter->grad.matrix() += n.grad.matrix();
    } else if (n.backward) {
      n.backward(*this, n);
    }
  }
}

}  // namespace ma3srn
