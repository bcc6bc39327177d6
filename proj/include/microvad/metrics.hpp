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

#ifndef MICROVAD_METRICS_HPP_
#define MICROVAD_METRICS_HPP_

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "microvad/error.hpp"

// Anomalous is the positive class everywhere in this file.

namespace microvad {

struct LabeledScore {
  double score = 0.0;
  bool anomalous = false;
  std::string id;
};

struct Metrics {
  double aupr = 0.0;
  double f1_max = 0.0;
  double tau_star = 0.0;
  double recall_at_tau = 0.0;
  double precision_at_tau = 0.0;
  int positives = 0;
  int negatives = 0;
};

/// One operating point per distinct score, highest threshold first.
struct PrPoint {
  double threshold = 0.0;
  double recall = 0.0;
  double precision = 0.0;
  int true_positives = 0;
  int false_positives = 0;
};

namespace detail {

inline std::vector<PrPoint> pr_points(std::span<const LabeledScore> scored, int& positives,
                                      int& negatives) {
  std::vector<std::pair<double, bool>> sorted;
  sorted.reserve(scored.size());
  positives = negatives = 0;
  for (const auto& s : scored) {
    if (std::isnan(s.score)) throw invalid_argument("score of '" + s.id + "' is NaN");
    sorted.emplace_back(s.score, s.anomalous);
    (s.anomalous ? positives : negatives)++;
  }
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<PrPoint> points;
  int tp = 0, fp = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    const double t = sorted[i].first;
    // A tie group enters the ranking atomically.
    for (; i < sorted.size() && sorted[i].first == t; ++i) (sorted[i].second ? tp : fp)++;
    points.push_back({t, positives ? static_cast<double>(tp) / positives : 0.0,
                      static_cast<double>(tp) / (tp + fp), tp, fp});
  }
  return points;
}

}  // namespace detail

/// Precision-recall points at every distinct score (predict s >= tau).
inline std::vector<PrPoint> pr_curve(std::span<const LabeledScore> scored) {
  int p = 0, n = 0;
  return detail::pr_points(scored, p, n);
}

/// AUPR by average-precision step integration over tie groups, plus the
/// F1-max operating point (ties resolved toward the higher threshold).
inline Metrics compute_metrics(std::span<const LabeledScore> scored) {
  int positives = 0, negatives = 0;
  const auto points = detail::pr_points(scored, positives, negatives);
  if (positives == 0 || negatives == 0) {
    throw degenerate_input("metrics need both anomalous and normal items (got " +
                           std::to_string(positives) + " anomalous, " +
                           std::to_string(negatives) + " normal)");
  }
  Metrics m;
  m.positives = positives;
  m.negatives = negatives;
  double prev_recall = 0.0;
  double best_f1 = -1.0;
  for (const auto& pt : points) {
    m.aupr += (pt.recall - prev_recall) * pt.precision;
    prev_recall = pt.recall;
    const int fn = positives - pt.true_positives;
    const double f1 = 2.0 * pt.true_positives /
                      (2.0 * pt.true_positives + pt.false_positives + fn);
    if (f1 > best_f1) {
      best_f1 = f1;
      m.tau_star = pt.threshold;
      m.recall_at_tau = pt.recall;
      m.precision_at_tau = pt.precision;
    }
  }
  m.f1_max = best_f1;
  return m;
}

struct ThresholdResult {
  double recall = 0.0;
  std::optional<double> precision;  // empty when nothing is predicted positive
  int true_positives = 0;
  int false_positives = 0;
  int true_negatives = 0;
  int false_negatives = 0;
};

/// Confusion counts with predict-anomalous iff s >= tau.
inline ThresholdResult apply_threshold(std::span<const LabeledScore> scored, double tau) {
  ThresholdResult r;
  for (const auto& s : scored) {
    const bool flagged = s.score >= tau;
    if (s.anomalous) {
      (flagged ? r.true_positives : r.false_negatives)++;
    } else {
      (flagged ? r.false_positives : r.true_negatives)++;
    }
  }
  const int positives = r.true_positives + r.false_negatives;
  r.recall = positives ? static_cast<double>(r.true_positives) / positives : 0.0;
  const int predicted = r.true_positives + r.false_positives;
  if (predicted > 0) r.precision = static_cast<double>(r.true_positives) / predicted;
  return r;
}

}  // namespace microvad

#endif  // MICROVAD_METRICS_HPP_
