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


#include "asrlab/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

namespace asrlab::ctc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double lse(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

std::string describe(std::size_t frames, std::span<const int> target) {
  return "T'=" + std::to_string(frames) + ", L=" + std::to_string(target.size()) +
         ", repeats=" + std::to_string(repeats(target));
}

void check_target(const Lattice& lat, std::span<const int> target) {
  for (int id : target) {
    if (id <= kBlank || static_cast<std::size_t>(id) >= lat.num_classes) {
      throw Error("ctc: target id " + std::to_string(id) + " outside 1.." + std::to_string(lat.num_classes - 1));
    }
  }
  if (!feasible(lat.length, target)) throw Error("ctc: infeasible target, " + describe(lat.length, target));
}

// Alpha and beta over the blank-interleaved label sequence; both include the
// emission at t. Returns log p and fills grad (d(-log p)/d log_probs) when asked.
double forward_backward(const Lattice& lat, std::span<const int> target, double* grad) {
  const std::size_t T = lat.length, V = lat.num_classes, S = 2 * target.size() + 1;
  auto label = [&](std::size_t s) { return s % 2 == 0 ? kBlank : target[s / 2]; };
  auto can_skip = [&](std::size_t s) { return s >= 2 && s % 2 == 1 && label(s) != label(s - 2); };

  std::vector<double> alpha(T * S, kNegInf);
  alpha[0] = lat.at(0, kBlank);
  if (S > 1) alpha[1] = lat.at(0, static_cast<std::size_t>(label(1)));
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t s = 0; s < S; ++s) {
      double a = alpha[(t - 1) * S + s];
      if (s >= 1) a = lse(a, alpha[(t - 1) * S + s - 1]);
      if (can_skip(s)) a = lse(a, alpha[(t - 1) * S + s - 2]);
      if (a != kNegInf) alpha[t * S + s] = a + lat.at(t, static_cast<std::size_t>(label(s)));
    }
  }
  double logp = alpha[(T - 1) * S + S - 1];
  if (S > 1) logp = lse(logp, alpha[(T - 1) * S + S - 2]);
  if (grad == nullptr) return logp;

  std::vector<double> beta(T * S, kNegInf);
  beta[(T - 1) * S + S - 1] = lat.at(T - 1, kBlank);
  if (S > 1) beta[(T - 1) * S + S - 2] = lat.at(T - 1, static_cast<std::size_t>(label(S - 2)));
  for (std::size_t t = T - 1; t-- > 0;) {
    for (std::size_t s = 0; s < S; ++s) {
      double b = beta[(t + 1) * S + s];
      if (s + 1 < S) b = lse(b, beta[(t + 1) * S + s + 1]);
      if (s + 2 < S && can_skip(s + 2)) b = lse(b, beta[(t + 1) * S + s + 2]);
      if (b != kNegInf) beta[t * S + s] = b + lat.at(t, static_cast<std::size_t>(label(s)));
    }
  }
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t s = 0; s < S; ++s) {
      const double ab = alpha[t * S + s] + beta[t * S + s];
      if (ab == kNegInf) continue;
      const auto k = static_cast<std::size_t>(label(s));
      grad[t * V + k] -= std::exp(ab - lat.at(t, k) - logp);
    }
  }
  return logp;
}

}  // namespace

Lattice Lattice::of(const Tensor& t) {
  if (t.rank() != 2) throw ShapeError("ctc lattice must be [T,V], got " + to_string(t.shape()));
  return Lattice{t.data(), t.dim(0), t.dim(1)};
}

Lattice Lattice::of(const Tensor& batch, std::size_t b, std::size_t length) {
  if (batch.rank() != 3 || b >= batch.dim(0) || length > batch.dim(1)) {
    throw ShapeError("ctc lattice: cannot take utterance " + std::to_string(b) + " of length " +
                     std::to_string(length) + " from " + to_string(batch.shape()));
  }
  const std::size_t T = batch.dim(1), V = batch.dim(2);
  return Lattice{batch.data().subspan(b * T * V, length * V), length, V};
}

std::size_t repeats(std::span<const int> target) {
  std::size_t r = 0;
  for (std::size_t i = 1; i < target.size(); ++i) r += target[i] == target[i - 1];
  return r;
}

bool feasible(std::size_t num_frames, std::span<const int> target) {
  return num_frames >= target.size() + repeats(target) && num_frames > 0;
}

double negative_log_likelihood(const Lattice& lattice, std::span<const int> target) {
  check_target(lattice, target);
  return -forward_backward(lattice, target, nullptr);
}

Tensor ctc_loss(const Tensor& log_probs, const std::vector<std::size_t>& lengths,
                const std::vector<std::vector<int>>& targets) {
  if (log_probs.rank() != 3) throw ShapeError("ctc_loss: expected [B,T,V], got " + to_string(log_probs.shape()));
  const std::size_t B = log_probs.dim(0), T = log_probs.dim(1), V = log_probs.dim(2);
  if (lengths.size() != B || targets.size() != B) {
    throw ShapeError("ctc_loss: batch of " + std::to_string(B) + " with " + std::to_string(lengths.size()) +
                     " lengths and " + std::to_string(targets.size()) + " targets");
  }
  for (double v : log_probs.data())
    if (!std::isfinite(v)) throw ShapeError("ctc_loss: non-finite log-probability");
  std::vector<double> grad(log_probs.numel(), 0.0);
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    const Lattice lat = Lattice::of(log_probs, b, lengths[b]);
    check_target(lat, targets[b]);
    total -= forward_backward(lat, targets[b], grad.data() + b * T * V);
  }
  const double inv_b = 1.0 / static_cast<double>(B);
  for (double& g : grad) g *= inv_b;
  return detail::make_result(OpKind::kCtcLoss, {}, {total * inv_b}, {log_probs}, [&]() -> detail::BackwardFn {
    return [log_probs, grad = std::move(grad)](std::span<const double> g) {
      auto& gx = log_probs.impl()->grad_buffer();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[0] * grad[i];
    };
  });
}

std::vector<int> collapse(std::span<const int> path) {
  std::vector<int> out;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i > 0 && path[i] == path[i - 1]) continue;
    if (path[i] != kBlank) out.push_back(path[i]);
  }
  return out;
}

double ctc_brute_force(const Lattice& lat, std::span<const int> target) {
  if (lat.length > 8 || lat.num_classes > 5) {
    throw Error("ctc_brute_force: instance too large (T'=" + std::to_string(lat.length) +
                ", V=" + std::to_string(lat.num_classes) + ", limits 8 and 5)");
  }
  const std::vector<int> want(target.begin(), target.end());
  std::vector<int> path(lat.length, 0);
  double total = 0.0;
  for (;;) {
    if (collapse(path) == want) {
      double lp = 0.0;
      for (std::size_t t = 0; t < lat.length; ++t) lp += lat.at(t, static_cast<std::size_t>(path[t]));
      total += std::exp(lp);
    }
    std::size_t t = 0;
    while (t < lat.length && ++path[t] == static_cast<int>(lat.num_classes)) path[t++] = 0;
    if (t == lat.length) break;
  }
  return total > 0.0 ? -std::log(total) : std::numeric_limits<double>::infinity();
}

Hypothesis greedy_decode(const Lattice& lat) {
  std::vector<int> path(lat.length);
  Hypothesis h;
  for (std::size_t t = 0; t < lat.length; ++t) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < lat.num_classes; ++k)
      if (lat.at(t, k) > lat.at(t, best)) best = k;
    path[t] = static_cast<int>(best);
    h.score += lat.at(t, best);
  }
  h.ids = collapse(path);
  h.kind = Hypothesis::Kind::kGreedy;
  return h;
}

std::vector<Hypothesis> prefix_beam_decode(const Lattice& lat, std::size_t beam_width) {
  if (beam_width == 0) throw Error("prefix_beam_decode: beam_width must be at least 1");
  struct Score {
    double blank = kNegInf, non_blank = kNegInf;
    double total() const { return lse(blank, non_blank); }
  };
  using Beam = std::map<std::vector<int>, Score>;
  Beam beam;
  beam[{}].blank = 0.0;
  for (std::size_t t = 0; t < lat.length; ++t) {
    Beam next;
    for (const auto& [prefix, sc] : beam) {
      Score& same = next[prefix];
      same.blank = lse(same.blank, sc.total() + lat.at(t, kBlank));
      for (std::size_t k = 1; k < lat.num_classes; ++k) {
        const double p = lat.at(t, k);
        const int id = static_cast<int>(k);
        std::vector<int> extended = prefix;
        extended.push_back(id);
        Score& ext = next[extended];
        if (!prefix.empty() && prefix.back() == id) {
          // A repeat only extends after a blank; otherwise it merges.
          next[prefix].non_blank = lse(next[prefix].non_blank, sc.non_blank + p);
          ext.non_blank = lse(ext.non_blank, sc.blank + p);
        } else {
          ext.non_blank = lse(ext.non_blank, sc.total() + p);
        }
      }
    }
    std::vector<std::pair<std::vector<int>, Score>> ranked(next.begin(), next.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second.total() > b.second.total(); });
    if (ranked.size() > beam_width) ranked.resize(beam_width);
    beam = Beam(ranked.begin(), ranked.end());
  }
  std::vector<Hypothesis> out;
  // Pruning drops some path mass; survivors are rescored exactly.
  for (const auto& [prefix, sc] : beam) {
    out.push_back({prefix, forward_backward(lat, prefix, nullptr), Hypothesis::Kind::kBeam});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
  return out;
}

}  // namespace asrlab::ctc
