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
#include <span>
#include <vector>

#include "asrlab/tensor.hpp"

namespace asrlab::ctc {

inline constexpr int kBlank = 0;

/// Read-only view of one utterance's T' x V log-probabilities.
struct Lattice {
  std::span<const double> log_probs;  // row-major, length * num_classes values
  std::size_t length = 0;
  std::size_t num_classes = 0;

  double at(std::size_t t, std::size_t k) const { return log_probs[t * num_classes + k]; }

  // From a [T, V] tensor.
  static Lattice of(const Tensor& t);
  // Utterance b of a [B, T, V] tensor, truncated to `length` frames.
  static Lattice of(const Tensor& batch, std::size_t b, std::size_t length);
};

// Number of adjacent equal labels; each needs a separating blank.
std::size_t repeats(std::span<const int> target);
bool feasible(std::size_t num_frames, std::span<const int> target);

// -log p(target | lattice) by the forward recursion in log space.
double negative_log_likelihood(const Lattice& lattice, std::span<const int> target);

// Mean over the batch of -log p(target_b | log_probs[b, :lengths[b]]).
// log_probs: [B, T, V]. Throws naming T', L and repeats for an infeasible target.
Tensor ctc_loss(const Tensor& log_probs, const std::vector<std::size_t>& lengths,
                const std::vector<std::vector<int>>& targets);

// Sums every frame path that collapses to the target. Needs T' <= 8 and V <= 5.
// Returns +infinity when no path collapses to the target.
double ctc_brute_force(const Lattice& lattice, std::span<const int> target);

// Merge repeats, then drop blanks.
std::vector<int> collapse(std::span<const int> path);

struct Hypothesis {
  enum class Kind { kGreedy, kBeam };
  std::vector<int> ids;
  double score = 0.0;
  Kind kind = Kind::kGreedy;
};

// Per-frame argmax (lowest id on ties), collapsed; score is the sum of the chosen log-probs.
Hypothesis greedy_decode(const Lattice& lattice);

// Prefix beam search without a language model. Surviving prefixes are scored
// with their exact log-probability; best first.
std::vector<Hypothesis> prefix_beam_decode(const Lattice& lattice, std::size_t beam_width);

}  // namespace asrlab::ctc
