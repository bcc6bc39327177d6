/*
 * Copyright 2026 The microvad Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "microvad/metrics.hpp"

namespace microvad {
namespace {

std::vector<LabeledScore> make(std::vector<std::pair<double, bool>> v) {
  std::vector<LabeledScore> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back({v[i].first, v[i].second, "item" + std::to_string(i)});
  }
  return out;
}

TEST(Metrics, ThreeItemHandCase) {
  const auto s = make({{0.9, true}, {0.8, false}, {0.7, true}});
  const auto m = compute_metrics(s);
  EXPECT_NEAR(m.aupr, 5.0 / 6.0, 1e-9);
  EXPECT_NEAR(m.f1_max, 0.8, 1e-9);
  EXPECT_DOUBLE_EQ(m.tau_star, 0.7);
  EXPECT_DOUBLE_EQ(m.recall_at_tau, 1.0);
  EXPECT_NEAR(m.precision_at_tau, 2.0 / 3.0, 1e-12);
  EXPECT_EQ(m.positives, 2);
  EXPECT_EQ(m.negatives, 1);
}

TEST(Metrics, PerfectSeparation) {
  const auto m = compute_metrics(make({{5, true}, {4, true}, {1, false}, {0.5, false}}));
  EXPECT_DOUBLE_EQ(m.aupr, 1.0);
  EXPECT_DOUBLE_EQ(m.f1_max, 1.0);
  EXPECT_DOUBLE_EQ(m.tau_star, 4.0);
}

TEST(Metrics, AllTiedIsPrevalence) {
  const auto m = compute_metrics(make({{1, true}, {1, false}, {1, false}, {1, true}, {1, false}}));
  EXPECT_NEAR(m.aupr, 0.4, 1e-12);
  EXPECT_NEAR(m.f1_max, 2.0 * 2 / (2.0 * 2 + 3), 1e-12);
}

TEST(Metrics, F1TiesPreferHigherThreshold) {
  // Threshold 3 -> tp 1 fp 0 fn 1 (F1 2/3); threshold 1 -> tp 2 fp 2 (F1 2/3).
  const auto m = compute_metrics(make({{3, true}, {2, false}, {1, false}, {1, true}}));
  EXPECT_DOUBLE_EQ(m.tau_star, 3.0);
}

TEST(Metrics, InvariantToMonotoneTransformAndOrder) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<std::pair<double, bool>> v;
    const int n = 4 + static_cast<int>(rng() % 30);
    for (int i = 0; i < n; ++i) v.emplace_back(std::round(u(rng) * 10) / 10, i % 3 == 0);
    const auto base = compute_metrics(make(v));
    auto w = v;
    for (auto& p : w) p.first = std::exp(3.0 * p.first) + 7.0;
    const auto tr = compute_metrics(make(w));
    EXPECT_NEAR(tr.aupr, base.aupr, 1e-12);
    EXPECT_NEAR(tr.f1_max, base.f1_max, 1e-12);
    // Same items flagged at the selected threshold.
    for (std::size_t i = 0; i < v.size(); ++i) {
      EXPECT_EQ(v[i].first >= base.tau_star, w[i].first >= tr.tau_star);
    }
    std::shuffle(v.begin(), v.end(), rng);
    const auto sh = compute_metrics(make(v));
    EXPECT_NEAR(sh.aupr, base.aupr, 1e-12);
    EXPECT_DOUBLE_EQ(sh.tau_star, base.tau_star);
  }
}

TEST(Metrics, RandomScoresApproachPrevalence) {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 4000;
  const double prevalence = 0.3;
  std::vector<std::pair<double, bool>> v;
  for (int i = 0; i < n; ++i) v.emplace_back(u(rng), u(rng) < prevalence);
  const auto m = compute_metrics(make(v));
  const double p = static_cast<double>(m.positives) / n;
  // Loose bound: AP of a random ranking concentrates near the prevalence.
  const double sigma = std::sqrt(p * (1 - p) / m.positives);
  EXPECT_NEAR(m.aupr, p, 3 * sigma + 0.01);
}

TEST(Metrics, SingleClassIsDegenerate) {
  try {
    compute_metrics(make({{1, false}, {2, false}}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDegenerateInput);
  }
  EXPECT_THROW(compute_metrics(make({{1, true}})), Error);
  EXPECT_THROW(compute_metrics(make({{std::nan(""), true}, {1, false}})), Error);
}

TEST(ApplyThreshold, InclusiveAndEmptyPrecision) {
  const auto s = make({{0.9, true}, {0.8, false}, {0.7, true}});
  const auto at = apply_threshold(s, 0.8);
  EXPECT_EQ(at.true_positives, 1);
  EXPECT_EQ(at.false_positives, 1);
  EXPECT_EQ(at.false_negatives, 1);
  EXPECT_EQ(at.true_negatives, 0);
  EXPECT_DOUBLE_EQ(at.recall, 0.5);
  ASSERT_TRUE(at.precision.has_value());
  EXPECT_DOUBLE_EQ(*at.precision, 0.5);
  const auto none = apply_threshold(s, 1.0);
  EXPECT_FALSE(none.precision.has_value());
  EXPECT_EQ(none.recall, 0.0);
  const auto all = apply_threshold(s, -1.0);
  EXPECT_EQ(all.recall, 1.0);
}

TEST(ApplyThreshold, AgreesWithF1Point) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 30; ++t) {
    std::vector<std::pair<double, bool>> v;
    for (int i = 0; i < 20; ++i) v.emplace_back(u(rng), i % 2 == 0);
    const auto s = make(v);
    const auto m = compute_metrics(s);
    const auto at = apply_threshold(s, m.tau_star);
    EXPECT_DOUBLE_EQ(at.recall, m.recall_at_tau);
    EXPECT_DOUBLE_EQ(*at.precision, m.precision_at_tau);
  }
}

}  // namespace
}  // namespace microvad
