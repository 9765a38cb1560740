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
#include <functional>
#include <string>
#include <vector>

#include "diffcore/graph.hpp"
#include "diffcore/parameters.hpp"

namespace ma3srn {

struct GradcheckEntry {
  std::string parameter;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double relative_error = 0.0;
  bool pass = true;
};

struct GradcheckReport {
  std::size_t checked = 0;
  std::size_t failed = 0;
  double worst_relative_error = 0.0;
  std::vector<GradcheckEntry> worst;  // descending by relative error

  bool passed() const noexcept { return failed == 0; }
};

// Builds a fresh graph and returns the scalar loss node.
using LossBuilder = std::function<Var(Graph&)>;

inline constexpr double kGradcheckFloor = 1e-6;

/// Compares reverse-mode gradients against central differences for every
/// entry of every parameter. An entry passes when
/// |g_analytic - g_fd| / max(|g_fd|, 1e-6) <= tol. Failures are reported,
/// never thrown. Parameter values are restored on return.
GradcheckReport finite_difference_check(ParameterStore& params, const LossBuilder& loss, double h, double tol,
                                        std::size_t keep_worst = 10);

}  // namespace ma3srn
