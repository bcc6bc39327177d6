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

#ifndef MICROVAD_PIPELINE_HPP_
#define MICROVAD_PIPELINE_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "microvad/backend.hpp"
#include "microvad/channel_select.hpp"
#include "microvad/checkpoint.hpp"
#include "microvad/fmap_io.hpp"
#include "microvad/image.hpp"
#include "microvad/manifest.hpp"
#include "microvad/metrics.hpp"
#include "microvad/normality_bank.hpp"
#include "microvad/pgs.hpp"
#include "microvad/roi.hpp"

// Glue from dataset entries to banks and scores:
// image -> ROI (+ flips) -> features -> channel mask -> descriptors -> bank.

namespace microvad {

/// Sampling geometry for a checkpoint on a backend's grid.
inline SamplingGeometry checkpoint_geometry(const CheckpointConfig& cfg,
                                            const FeatureBackend& backend) {
  const auto grid = backend.grid();
  validate_flip_compatibility(cfg, grid);
  return build_geometry(cfg.granularity, nominal_grid_anchor(cfg, grid), grid.grid_h,
                        grid.grid_w);
}

/// A featurized training or query sample, with its grid vessel labels when
/// a mask was supplied.
struct FeaturizedSample {
  FeatureMap map;
  std::optional<VesselAnnotation> vessels;
  std::string id;
};

namespace detail {

inline VesselAnnotation annotate(const Image& roi_mask, const FeatureBackend& backend) {
  const auto g = backend.grid();
  return annotate_vessels(roi_mask, g.input_px, g.patch_px, g.stride_px, g.grid_h, g.grid_w);
}

}  // namespace detail

/// Featurizes one entry. Image entries are cropped around their anchor and,
/// with `augment`, expanded by the checkpoint's flips. FMAP entries are taken
/// as stored.
inline std::vector<FeaturizedSample> featurize_entry(const Manifest& manifest,
                                                     const ManifestEntry& entry,
                                                     const CheckpointConfig& cfg,
                                                     const FeatureBackend& backend,
                                                     bool augment) {
  std::vector<FeaturizedSample> out;
  std::optional<Image> mask;
  if (entry.vessel_mask_path) mask = read_pnm(manifest.resolve(*entry.vessel_mask_path));

  if (entry.kind == EntryKind::kFmap) {
    FeaturizedSample s{load_precomputed(manifest.resolve(entry.path), backend), std::nullopt,
                       entry.path};
    if (mask) {
      if (mask->width != cfg.roi_px || mask->height != cfg.roi_px) {
        throw config_error("vessel mask for '" + entry.path + "' must be " +
                           std::to_string(cfg.roi_px) + " px square");
      }
      s.vessels = detail::annotate(*mask, backend);
    }
    out.push_back(std::move(s));
    return out;
  }

  const Image raw = read_pnm(manifest.resolve(entry.path));
  const RoiImage roi = extract_roi(raw, entry.anchor_px, cfg.anchor_offset, cfg.roi_px, entry.path);
  std::optional<Image> roi_mask;
  if (mask) {
    if (mask->width == raw.width && mask->height == raw.height) {
      roi_mask = crop_like(roi, *mask);
    } else if (mask->width == cfg.roi_px && mask->height == cfg.roi_px) {
      roi_mask = *mask;
    } else {
      throw config_error("vessel mask for '" + entry.path +
                         "' matches neither the raw image nor the ROI size");
    }
  }
  const std::vector<Flip> no_flips;
  const auto& flips = augment ? cfg.flips : no_flips;
  const auto rois = augment_flips(roi, flips);
  for (std::size_t i = 0; i < rois.size(); ++i) {
    FeaturizedSample s{featurize(rois[i], backend), std::nullopt, entry.path};
    if (i > 0) s.id += "#" + flip_name(flips[i - 1]);
    if (roi_mask) {
      s.vessels = detail::annotate(i == 0 ? *roi_mask : apply_flip(*roi_mask, flips[i - 1]),
                                   backend);
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// Training set for one checkpoint: every normal entry, augmented.
inline std::vector<FeaturizedSample> training_samples(const Manifest& manifest,
                                                      const CheckpointConfig& cfg,
                                                      const FeatureBackend& backend) {
  std::vector<FeaturizedSample> out;
  for (const auto& e : manifest.entries) {
    if (e.checkpoint != cfg.name) {
      throw config_error("entry '" + e.path + "' belongs to checkpoint '" + e.checkpoint +
                         "', expected '" + cfg.name + "'");
    }
    if (e.label != Label::kNormal) continue;
    for (auto& s : featurize_entry(manifest, e, cfg, backend, true)) out.push_back(std::move(s));
  }
  return out;
}

/// Scores channels on the training stack with the checkpoint's SNR variant
/// and keeps the configured fraction.
inline ChannelMask learn_channel_mask(std::span<const FeaturizedSample> samples,
                                      const CheckpointConfig& cfg, double fraction,
                                      bool bottom = false) {
  std::vector<FeatureMap> stack;
  for (const auto& s : samples) stack.push_back(s.map);
  std::vector<double> scores;
  if (cfg.snr_mode == SnrMode::kVessel) {
    std::vector<VesselAnnotation> ann;
    for (const auto& s : samples) {
      if (!s.vessels) {
        throw insufficient_data("vessel SNR needs a vessel mask for '" + s.id + "'");
      }
      ann.push_back(*s.vessels);
    }
    scores = snr_vessel(stack, ann);
  } else {
    scores = snr_generic(stack);
  }
  ChannelMask mask = select_top(scores, fraction, bottom);
  mask.mode = cfg.snr_mode;
  mask.checkpoint = cfg.name;
  mask.sample_count = static_cast<int>(samples.size());
  return mask;
}

/// Selected-channel PGS descriptors of one map.
inline DescriptorSet describe(const FeatureMap& map, const ChannelMask& mask,
                              const SamplingGeometry& geometry) {
  if (mask.input_channels() != map.channels()) {
    throw invalid_argument("mask was learned on " + std::to_string(mask.input_channels()) +
                           " channels, map has " + std::to_string(map.channels()));
  }
  return sample_descriptors(select_channels(map, mask), geometry);
}

inline NormalityBank fit_bank(std::span<const FeaturizedSample> samples,
                              const CheckpointConfig& cfg, const FeatureBackend& backend,
                              const ChannelMask& mask) {
  if (samples.size() < 2) {
    throw insufficient_data("fitting needs at least 2 normal samples, got " +
                            std::to_string(samples.size()));
  }
  const auto geometry = checkpoint_geometry(cfg, backend);
  std::vector<DescriptorSet> sets;
  sets.reserve(samples.size());
  for (const auto& s : samples) sets.push_back(describe(s.map, mask, geometry));
  return fit(sets, geometry, mask, cfg.epsilon, cfg);
}

inline ScoreResult score_map(const NormalityBank& bank, const FeatureMap& map) {
  return score(bank, describe(map, bank.mask, bank.geometry));
}

/// A threshold tau for the strict rule s > tau that flags exactly the items
/// the inclusive rule s >= tau_star flags: halfway to the next lower score.
inline double deployable_threshold(std::span<const LabeledScore> scored, double tau_star) {
  double below = -std::numeric_limits<double>::infinity();
  for (const auto& s : scored) {
    if (s.score < tau_star) below = std::max(below, s.score);
  }
  const double tau = std::isfinite(below) ? below + (tau_star - below) / 2.0
                                          : std::nextafter(tau_star, -1.0);
  return std::max(tau, 0.0);
}

struct ItemReport {
  std::string id;
  std::optional<double> score;
  Label label = Label::kUnlabeled;
  std::optional<bool> anomalous;
  std::string error;
};

struct EvalReport {
  std::optional<Metrics> metrics;
  std::optional<double> verdict_threshold;
  std::string verdict_rule;
  std::vector<ItemReport> items;
  int failures = 0;
};

/// Scores every item of a labeled manifest against the bank. A failing item
/// is recorded and skipped.
inline EvalReport evaluate_manifest(const NormalityBank& bank, const Manifest& manifest,
                                    const FeatureBackend& backend) {
  if (manifest.entries.empty()) throw degenerate_input("manifest has no entries");
  std::set<std::string> checkpoints;
  for (const auto& e : manifest.entries) checkpoints.insert(e.checkpoint);
  if (checkpoints.size() > 1) {
    throw config_error("manifest mixes " + std::to_string(checkpoints.size()) + " checkpoints");
  }
  if (*checkpoints.begin() != bank.config.name) {
    throw config_error("manifest is for checkpoint '" + *checkpoints.begin() +
                       "' but the bank was fit for '" + bank.config.name + "'");
  }
  EvalReport report;
  std::vector<LabeledScore> labeled;
  for (const auto& e : manifest.entries) {
    ItemReport item{e.path, std::nullopt, e.label, std::nullopt, {}};
    try {
      auto samples = featurize_entry(manifest, e, bank.config, backend, false);
      item.score = score_map(bank, samples.front().map).score;
      if (e.label != Label::kUnlabeled) {
        labeled.push_back({*item.score, e.label == Label::kAnomalous, e.path});
      }
    } catch (const Error& err) {
      item.error = err.what();
      ++report.failures;
    }
    report.items.push_back(std::move(item));
  }
  if (report.failures == static_cast<int>(report.items.size())) {
    throw degenerate_input("every manifest item failed; first error: " +
                           report.items.front().error);
  }
  report.metrics = compute_metrics(labeled);
  if (bank.threshold) {
    report.verdict_threshold = *bank.threshold;
    report.verdict_rule = "score > bank threshold";
    for (auto& item : report.items) {
      if (item.score) item.anomalous = is_anomalous(*item.score, *bank.threshold);
    }
  } else {
    report.verdict_threshold = report.metrics->tau_star;
    report.verdict_rule = "score >= tau_star";
    for (auto& item : report.items) {
      if (item.score) item.anomalous = *item.score >= report.metrics->tau_star;
    }
  }
  return report;
}

inline nlohmann::json metrics_to_json(const Metrics& m) {
  return {{"aupr", m.aupr},
          {"f1_max", m.f1_max},
          {"tau_star", m.tau_star},
          {"recall_at_tau", m.recall_at_tau},
          {"precision_at_tau", m.precision_at_tau},
          {"counts", {{"P", m.positives}, {"N", m.negatives}}}};
}

inline nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& it : r.items) {
    nlohmann::json j = {{"id", it.id}, {"label", label_name(it.label)}};
    j["score"] = it.score ? nlohmann::json(*it.score) : nlohmann::json(nullptr);
    j["verdict"] = it.anomalous ? nlohmann::json(*it.anomalous ? "anomalous" : "normal")
                                : nlohmann::json(nullptr);
    if (!it.error.empty()) j["error"] = it.error;
    items.push_back(std::move(j));
  }
  nlohmann::json out = {{"items", items}, {"failures", r.failures}};
  out["metrics"] = r.metrics ? metrics_to_json(*r.metrics) : nlohmann::json(nullptr);
  if (r.verdict_threshold) {
    out["verdict"] = {{"threshold", *r.verdict_threshold}, {"rule", r.verdict_rule}};
  }
  return out;
}

}  // namespace microvad

#endif  // MICROVAD_PIPELINE_HPP_
