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
#include <deque>
#include <functional>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "diffcore/parameters.hpp"
#include "diffcore/tensor.hpp"

namespace ma3srn {

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Graph& graph() const { return *graph_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Tape of primitive evaluations. Nodes are appended in evaluation order, so
/// every input id is smaller than the id of the node that consumes it and the
/// append order is a topological order.
class Graph {
 public:
  struct Node;
  using BackwardFn = std::function<void(Graph&, const Node&)>;

  struct Node {
    std::string_view op;
    Tensor value;
    Tensor grad;  // empty until something flows into it
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Parameter* parameter = nullptr;
    bool requires_grad = false;
  };

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  // Repeated calls with the same parameter return the same leaf.
  Var parameter(Parameter& param);

  // Appends an op node. `backward` runs only if some input requires grad.
  Var record(std::string_view op, Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

  const Node& node(std::size_t id) const { return nodes_[id]; }
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  // Gradient buffer of a node, zero-initialised on first access.
  Tensor& grad(std::size_t id);
  const Tensor* grad_if_any(std::size_t id) const;

  /// Reverse sweep from a scalar node. Gradients are added to the `grad`
  /// field of every reachable Parameter; callers zero them between steps.
  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  std::deque<Node> nodes_;  // deque keeps value() references valid across records
  std::unordered_map<const Parameter*, std::size_t> parameter_nodes_;
};

}  // namespace ma3srn
