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


#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <vector>

#include "asrlab/ctc.hpp"
#include "asrlab/gradcheck.hpp"
#include "asrlab/ops.hpp"

namespace asrlab::ctc {
namespace {

// Random [T, V] log-softmax rows.
Tensor random_lattice(std::size_t T, std::size_t V, Rng& rng, double spread = 3.0) {
  std::vector<double> v(T * V);
  for (double& x : v) x = spread * (2.0 * uniform01(rng) - 1.0);
  NoGradGuard g;
  const Tensor t = ops::log_softmax(Tensor::from({T, V}, v));
  return t.detach();
}

std::vector<int> random_target(std::size_t max_len, std::size_t V, Rng& rng) {
  std::vector<int> t(static_cast<std::size_t>(uniform01(rng) * (max_len + 1)));
  for (int& x : t) x = 1 + static_cast<int>(uniform01(rng) * (V - 1));
  return t;
}

// Exhaustive transcript distribution, independent of the library's brute force.
std::map<std::vector<int>, double> transcript_distribution(const Lattice& lat) {
  std::map<std::vector<int>, double> dist;
  std::vector<int> path(lat.length, 0);
  for (;;) {
    std::vector<int> label;
    int prev = -1;
    double lp = 0.0;
    for (std::size_t t = 0; t < lat.length; ++t) {
      if (path[t] != prev && path[t] != 0) label.push_back(path[t]);
      prev = path[t];
      lp += lat.at(t, static_cast<std::size_t>(path[t]));
    }
    dist[label] += std::exp(lp);
    std::size_t t = 0;
    while (t < lat.length && ++path[t] == static_cast<int>(lat.num_classes)) path[t++] = 0;
    if (t == lat.length) break;
  }
  return dist;
}

TEST(CtcLoss, UniformTwoFrameExample) {
  const double l = std::log(0.5);
  const Tensor lat = Tensor::from({1, 2, 2}, {l, l, l, l});
  const Tensor loss = ctc_loss(lat, {2}, {{1}});
  EXPECT_NEAR(loss.item(), -std::log(0.75), 1e-10);
  EXPECT_NEAR(loss.item(), 0.287682, 1e-6);
  EXPECT_NEAR(ctc_brute_force(Lattice::of(ops::reshape(lat, {2, 2})), std::vector<int>{1}), -std::log(0.75), 1e-10);
}

TEST(CtcLoss, EmptyTargetIsAllBlank) {
  Rng rng(1);
  const Tensor lat = random_lattice(5, 4, rng);
  double expect = 0.0;
  for (std::size_t t = 0; t < 5; ++t) expect -= lat[t * 4];
  EXPECT_NEAR(negative_log_likelihood(Lattice::of(lat), {}), expect, 1e-12);
}

TEST(CtcLoss, InfeasibleTargetNamesQuantities) {
  const Tensor lat = Tensor::from({1, 3}, {std::log(0.2), std::log(0.3), std::log(0.5)});
  try {
    negative_log_likelihood(Lattice::of(lat), std::vector<int>{1, 2});
    FAIL();
  } catch (const Error& e) {
    const std::string m = e.what();
    EXPECT_NE(m.find("T'=1"), std::string::npos);
    EXPECT_NE(m.find("L=2"), std::string::npos);
    EXPECT_NE(m.find("repeats=0"), std::string::npos);
  }
  EXPECT_FALSE(feasible(3, std::vector<int>{1, 1, 2}));
  EXPECT_TRUE(feasible(4, std::vector<int>{1, 1, 2}));
  EXPECT_EQ(ctc_brute_force(Lattice::of(lat), std::vector<int>{1, 2}), std::numeric_limits<double>::infinity());
}

TEST(CtcLoss, MatchesBruteForceOnRandomInstances) {
  Rng rng(2026);
  for (int i = 0; i < 200; ++i) {
    const std::size_t T = 1 + static_cast<std::size_t>(uniform01(rng) * 6);
    const std::size_t V = 2 + static_cast<std::size_t>(uniform01(rng) * 3);
    const Tensor lat = random_lattice(T, V, rng);
    const std::vector<int> target = random_target(3, V, rng);
    const Lattice view = Lattice::of(lat);
    const double brute = ctc_brute_force(view, target);
    if (!feasible(T, target)) {
      EXPECT_TRUE(std::isinf(brute));
      continue;
    }
    EXPECT_NEAR(negative_log_likelihood(view, target), brute, 1e-8) << "T=" << T << " V=" << V;
  }
}

TEST(CtcLoss, BruteForceDistributionSumsToOne) {
  Rng rng(5);
  const Tensor lat = random_lattice(3, 3, rng);
  const auto dist = transcript_distribution(Lattice::of(lat));
  double total = 0.0;
  for (const auto& [label, p] : dist) {
    total += p;
    EXPECT_NEAR(std::exp(-ctc_brute_force(Lattice::of(lat), label)), p, 1e-12);
  }
  EXPECT_NEAR(total, 1.0, 1e-9);
}

TEST(CtcLoss, GradientMatchesFiniteDifferences) {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor lat = random_lattice(6, 4, rng);
    std::vector<int> target = random_target(3, 4, rng);
    while (!feasible(5, target)) target.pop_back();
    auto f = [&](const Tensor& x) { return ctc_loss(ops::reshape(x, {1, 6, 4}), {5}, {target}); };
    const auto r = finite_difference_check(f, lat, 1e-6, 1e-4);
    EXPECT_TRUE(r.pass) << r.max_rel_error;
  }
}

TEST(CtcLoss, BatchMeanAndPaddingIgnored) {
  Rng rng(3);
  const Tensor a = random_lattice(5, 4, rng), b = random_lattice(5, 4, rng);
  std::vector<double> v(a.data().begin(), a.data().end());
  v.insert(v.end(), b.data().begin(), b.data().end());
  Tensor batch = Tensor::from({2, 5, 4}, v, true);
  const std::vector<int> ta{1, 2}, tb{3};
  const Tensor loss = ctc_loss(batch, {5, 3}, {ta, tb});
  const double la = negative_log_likelihood(Lattice::of(a), ta);
  const double lb = negative_log_likelihood(Lattice::of(ops::slice(b, 0, 0, 3).detach()), tb);
  EXPECT_NEAR(loss.item(), 0.5 * (la + lb), 1e-12);
  backward(loss);
  for (std::size_t i = 2 * 5 * 4 - 2 * 4; i < 40; ++i) EXPECT_EQ(batch.grad()[i], 0.0);
}

TEST(CtcLoss, RelabelingCovariance) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor lat = random_lattice(6, 4, rng);
    std::vector<int> target = random_target(3, 4, rng);
    if (!feasible(6, target)) continue;
    const std::vector<int> perm{0, 3, 1, 2};
    std::vector<double> v(24);
    for (std::size_t t = 0; t < 6; ++t)
      for (std::size_t k = 0; k < 4; ++k) v[t * 4 + static_cast<std::size_t>(perm[k])] = lat[t * 4 + k];
    std::vector<int> relabeled;
    for (int id : target) relabeled.push_back(perm[static_cast<std::size_t>(id)]);
    EXPECT_NEAR(negative_log_likelihood(Lattice::of(lat), target),
                negative_log_likelihood(Lattice::of(Tensor::from({6, 4}, v)), relabeled), 1e-12);
  }
}

Tensor one_hot_lattice(const std::vector<int>& path, std::size_t V) {
  std::vector<double> v(path.size() * V, std::log(1e-12));
  for (std::size_t t = 0; t < path.size(); ++t) v[t * V + static_cast<std::size_t>(path[t])] = 0.0;
  return Tensor::from({path.size(), V}, v);
}

TEST(Greedy, CollapseRules) {
  EXPECT_EQ(greedy_decode(Lattice::of(one_hot_lattice({1, 1, 0, 2, 2}, 3))).ids, (std::vector<int>{1, 2}));
  EXPECT_TRUE(greedy_decode(Lattice::of(one_hot_lattice({0, 0, 0}, 3))).ids.empty());
  EXPECT_EQ(greedy_decode(Lattice::of(one_hot_lattice({1, 0, 1}, 3))).ids, (std::vector<int>{1, 1}));
}

TEST(Greedy, TiesGoToLowestId) {
  const double h = std::log(0.5);
  const Tensor lat = Tensor::from({1, 3}, {std::log(1e-9), h, h});
  EXPECT_EQ(greedy_decode(Lattice::of(lat)).ids, (std::vector<int>{1}));
}

TEST(Greedy, NoBlankAndNoUnseparatedRepeats) {
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor lat = random_lattice(8, 5, rng);
    const Lattice view = Lattice::of(lat);
    const Hypothesis h = greedy_decode(view);
    std::vector<int> path;
    double score = 0.0;
    for (std::size_t t = 0; t < 8; ++t) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < 5; ++k) if (view.at(t, k) > view.at(t, best)) best = k;
      path.push_back(static_cast<int>(best));
      score += view.at(t, best);
    }
    EXPECT_NEAR(h.score, score, 1e-12);
    EXPECT_LE(h.score, 0.0);
    for (int id : h.ids) EXPECT_NE(id, kBlank);
    // Count adjacent equal ids in the output; each needs a blank between them in the path.
    std::size_t separated = 0;
    for (std::size_t t = 0; t + 1 < path.size(); ++t) {
      if (path[t] != 0) {
        std::size_t u = t + 1;
        while (u < path.size() && path[u] == path[t]) ++u;
        std::size_t w = u;
        while (w < path.size() && path[w] == 0) ++w;
        if (w > u && w < path.size() && path[w] == path[t]) ++separated;
      }
    }
    EXPECT_EQ(repeats(h.ids) <= separated, true);
  }
}

TEST(Beam, OneHotLatticeForcesTranscript) {
  const auto hyps = prefix_beam_decode(Lattice::of(one_hot_lattice({0, 2, 2, 0, 1, 0, 1}, 4)), 8);
  ASSERT_FALSE(hyps.empty());
  EXPECT_EQ(hyps[0].ids, (std::vector<int>{2, 1, 1}));
  EXPECT_NEAR(hyps[0].score, 0.0, 1e-9);
  for (std::size_t i = 1; i < hyps.size(); ++i) EXPECT_GE(hyps[i - 1].score, hyps[i].score);
}

TEST(Beam, TopScoreAtLeastGreedyTrueProbability) {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t T = 2 + static_cast<std::size_t>(uniform01(rng) * 5);
    const Tensor lat = random_lattice(T, 4, rng);
    const Lattice view = Lattice::of(lat);
    const Hypothesis g = greedy_decode(view);
    const auto beam = prefix_beam_decode(view, 16);
    EXPECT_GE(beam[0].score, -ctc_brute_force(view, g.ids) - 1e-12);
  }
}

TEST(Beam, WideBeamRecoversMostProbableTranscript) {
  Rng rng(8);
  int hits = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t T = 2 + static_cast<std::size_t>(uniform01(rng) * 5);
    const std::size_t V = 2 + static_cast<std::size_t>(uniform01(rng) * 3);
    const Tensor lat = random_lattice(T, V, rng);
    const auto dist = transcript_distribution(Lattice::of(lat));
    auto best = dist.begin();
    for (auto it = dist.begin(); it != dist.end(); ++it)
      if (it->second > best->second) best = it;
    const auto beam = prefix_beam_decode(Lattice::of(lat), 16);
    hits += beam[0].ids == best->first;
    EXPECT_NEAR(beam[0].score, std::log(dist.at(beam[0].ids)), 1e-9);
  }
  EXPECT_GE(hits, 95);
}

TEST(Beam, RejectsZeroWidth) {
  Rng rng(1);
  const Tensor lat = random_lattice(2, 3, rng);
  EXPECT_THROW(prefix_beam_decode(Lattice::of(lat), 0), Error);
}

}  // namespace
}  // namespace asrlab::ctc
