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

#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "asrlab/tensor.hpp"

namespace asrlab {

struct GradCheckReport {
  double max_rel_error = 0.0;
  bool pass = true;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

using ScalarFn = std::function<Tensor(const Tensor&)>;

// Compares backward() against central differences, coordinate by coordinate.
// Relative error per coordinate: |a - n| / (|a| + |n| + 1e-12).
// `coords` restricts the check to a subset of flat indices (all when empty).
// Throws if f is not bit-reproducible across two evaluations or epsilon is
// outside [1e-7, 1e-3].
GradCheckReport finite_difference_check(const ScalarFn& f, const Tensor& x, double epsilon,
                                        double tolerance,
                                        std::span<const std::size_t> coords = {});

}  // namespace asrlab
