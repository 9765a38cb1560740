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

#include "diffcore/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace ma3srn {
namespace {

double evaluate(const LossBuilder& loss) {
  Graph g;
  return loss(g).value()[0];
}

}  // namespace

GradcheckReport finite_difference_check(ParameterStore& params, const LossBuilder& loss, double h, double tol,
                                        std::size_t keep_worst) {
  GradcheckReport report;
  if (params.size() == 0) return report;

  params.zero_grad();
  {
    Graph g;
    g.backward(loss(g));
  }
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.push_back(p->grad);

  std::vector<GradcheckEntry> entries;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = params[pi];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double original = p.value[i];
      p.value[i] = original + h;
      const double up = evaluate(loss);
      p.value[i] = original - h;
      const double down = evaluate(loss);
      p.value[i] = original;

      GradcheckEntry e;
      e.parameter = p.name;
      e.index = i;
      e.analytic = analytic[pi][i];
      e.numeric = (up - down) / (2.0 * h);
      e.relative_error = std::abs(e.analytic - e.numeric) / std::max(std::abs(e.numeric), kGradcheckFloor);
      e.pass = std::isfinite(e.relative_error) && e.relative_error <= tol;
      ++report.checked;
      if (!e.pass) ++report.failed;
      report.worst_relative_error = std::max(report.worst_relative_error, e.relative_error);
      entries.push_back(std::move(e));
    }
  }
  const std::size_t keep = std::min(keep_worst, entries.size());
  std::partial_sort(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(keep), entries.end(),
                    [](const GradcheckEntry& a, const GradcheckEntry& b) { return a.relative_error > b.relative_error; });
  entries.resize(keep);
  report.worst = std::move(entries);
  params.zero_grad();
  return report;
}

}  // namespace ma3srn
