// Copyright 2026 The asrlab Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "asrlab/gradcheck.hpp"

#include <cmath>
#include <numeric>
#include <vector>

namespace asrlab {

namespace {

double eval_at(const ScalarFn& f, const Tensor& x, std::size_t i, double delta) {
  NoGradGuard guard;
  std::vector<double> data(x.data().begin(), x.data().end());
  data[i] += delta;
  const Tensor y = f(Tensor::from(x.shape(), std::move(data)));
  return y.item();
}

}  // namespace

GradCheckReport finite_difference_check(const ScalarFn& f, const Tensor& x, double epsilon,
                                        double tolerance, std::span<const std::size_t> coords) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) {
    throw Error("finite_difference_check: epsilon must lie in [1e-7, 1e-3]");
  }
  Tensor leaf = Tensor::from(x.shape(), std::vector<double>(x.data().begin(), x.data().end()), true);
  const Tensor y = f(leaf);
  if (y.numel() != 1) throw ShapeError("finite_difference_check: f must return a scalar");

  {
    NoGradGuard guard;
    const double a = f(x.detach()).item();
    const double b = f(x.detach()).item();
    if (a != b || a != y.item()) {
      throw Error("finite_difference_check: f is not deterministic");
    }
  }

  std::vector<double> analytic(x.numel(), 0.0);
  if (y.requires_grad()) {
    backward(y);
    if (leaf.has_grad()) analytic.assign(leaf.grad().begin(), leaf.grad().end());
  }

  std::vector<std::size_t> all;
  if (coords.empty()) {
    all.resize(x.numel());
    std::iota(all.begin(), all.end(), 0);
    coords = all;
  }

  GradCheckReport report;
  for (std::size_t i : coords) {
    if (i >= x.numel()) throw ShapeError("finite_difference_check: coordinate out of range");
    const double numeric = (eval_at(f, x, i, epsilon) - eval_at(f, x, i, -epsilon)) / (2.0 * epsilon);
    const double a = analytic[i];
    const double rel = std::abs(a - numeric) / (std::abs(a) + std::abs(numeric) + 1e-12);
    if (rel > report.max_rel_error || report.checked == 0) {
      report.max_rel_error = std::max(report.max_rel_error, rel);
      if (rel >= report.max_rel_error) report.worst_index = i;
    }
    ++report.checked;
  }
  report.pass = report.max_rel_error <= tolerance;
  return report;
}

}  // namespace asrlab
