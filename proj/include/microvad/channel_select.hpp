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

#ifndef MICROVAD_CHANNEL_SELECT_HPP_
#define MICROVAD_CHANNEL_SELECT_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "microvad/error.hpp"
#include "microvad/feature_map.hpp"
#include "microvad/image.hpp"
#include "microvad/io_util.hpp"

namespace microvad {

/// Variance floor shared by both SNR variants.
inline constexpr double kSnrVarianceFloor = 1e-12;

enum class SnrMode { kGeneric, kVessel };

inline std::string snr_mode_name(SnrMode mode) {
  return mode == SnrMode::kGeneric ? "generic" : "vessel";
}

inline SnrMode parse_snr_mode(const std::string& s) {
  if (s == "generic") return SnrMode::kGeneric;
  if (s == "vessel") return SnrMode::kVessel;
  throw config_error("unknown snr_mode '" + s + "'");
}

struct ChannelMask {
  std::vector<int> kept;        // ascending
  std::vector<double> scores;   // one per input channel
  SnrMode mode = SnrMode::kGeneric;
  double fraction = 1.0;
  bool bottom = false;          // ablation: lowest-scoring channels kept
  std::string checkpoint;
  int sample_count = 0;         // K'

  int input_channels() const { return static_cast<int>(scores.size()); }

  friend bool operator==(const ChannelMask&, const ChannelMask&) = default;
};

/// Identity mask over `channels` channels.
inline ChannelMask full_mask(int channels) {
  ChannelMask mask;
  mask.kept.resize(channels);
  std::iota(mask.kept.begin(), mask.kept.end(), 0);
  mask.scores.assign(channels, 0.0);
  return mask;
}

inline FeatureMap select_channels(const FeatureMap& map, const ChannelMask& mask) {
  return select_channels(map, std::span<const int>(mask.kept));
}

namespace detail {

inline void check_stack(std::span<const FeatureMap> stack) {
  if (stack.size() < 2) {
    throw insufficient_data("channel SNR needs at least 2 samples, got " +
                            std::to_string(stack.size()));
  }
  for (const auto& m : stack) {
    if (!m.same_dims(stack.front())) {
      throw invalid_argument("sample dims " + m.dims() + " differ from " +
                             stack.front().dims());
    }
  }
}

}  // namespace detail

/// Per-channel SNR mu^2 / sigma^2 at each location over the stack (unbiased
/// variance, floored), averaged over all locations.
inline std::vector<double> snr_generic(std::span<const FeatureMap> stack) {
  detail::check_stack(stack);
  const auto& first = stack.front();
  const int c = first.channels();
  const std::size_t cells = first.cells();
  const double k = static_cast<double>(stack.size());
  std::vector<double> beta(c, 0.0);
  std::vector<double> sum(c), sq(c);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    std::fill(sum.begin(), sum.end(), 0.0);
    for (const auto& m : stack) {
      const float* v = m.data().data() + cell * c;
      for (int ch = 0; ch < c; ++ch) sum[ch] += v[ch];
    }
    std::fill(sq.begin(), sq.end(), 0.0);
    for (const auto& m : stack) {
      const float* v = m.data().data() + cell * c;
      for (int ch = 0; ch < c; ++ch) {
        const double d = v[ch] - sum[ch] / k;
        sq[ch] += d * d;
      }
    }
    for (int ch = 0; ch < c; ++ch) {
      const double mu = sum[ch] / k;
      const double var = std::max(sq[ch] / (k - 1.0), kSnrVarianceFloor);
      beta[ch] += mu * mu / var;
    }
  }
  for (auto& b : beta) b /= static_cast<double>(cells);
  return beta;
}

/// Per-cell vessel labels on the feature grid (1 = vessel, 0 = cortex).
struct VesselAnnotation {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> labels;
};

/// A grid cell is vessel when at least `threshold` of its patch pixels are.
/// The mask is first brought to the backend input size (nearest, corner
/// aligned); cell k covers input pixels [k*stride, k*stride + patch).
inline VesselAnnotation annotate_vessels(const Image& mask, int input_px, int patch_px,
                                         int stride_px, int grid_h, int grid_w,
                                         double threshold = 0.5) {
  if (mask.channels != 1) throw invalid_argument("vessel mask must be single-channel");
  const Image scaled = resize_nearest(mask, input_px, input_px);
  VesselAnnotation ann{grid_h, grid_w, std::vector<std::uint8_t>(
                                           static_cast<std::size_t>(grid_h) * grid_w, 0)};
  for (int gy = 0; gy < grid_h; ++gy) {
    for (int gx = 0; gx < grid_w; ++gx) {
      int vessel = 0;
      int total = 0;
      for (int y = gy * stride_px; y < std::min(gy * stride_px + patch_px, input_px); ++y) {
        for (int x = gx * stride_px; x < std::min(gx * stride_px + patch_px, input_px); ++x) {
          vessel += scaled.at(x, y) >= 128 ? 1 : 0;
          ++total;
        }
      }
      ann.labels[static_cast<std::size_t>(gy) * grid_w + gx] =
          total > 0 && vessel >= threshold * total ? 1 : 0;
    }
  }
  return ann;
}

/// Vessel-contrast SNR: (mu_cortex - mu_vessel)^2 / (sigma_cortex *
/// sigma_vessel), each class pooled over every annotated patch of every map.
inline std::vector<double> snr_vessel(std::span<const FeatureMap> stack,
                                      std::span<const VesselAnnotation> annotations) {
  detail::check_stack(stack);
  if (annotations.size() != stack.size()) {
    throw invalid_argument("need one vessel annotation per sample (" +
                           std::to_string(stack.size()) + " samples, " +
                           std::to_string(annotations.size()) + " annotations)");
  }
  const int c = stack.front().channels();
  const std::size_t cells = stack.front().cells();
  // Two passes per class for stable variance.
  std::vector<double> sum[2] = {std::vector<double>(c, 0.0), std::vector<double>(c, 0.0)};
  double count[2] = {0.0, 0.0};
  for (std::size_t s = 0; s < stack.size(); ++s) {
    const auto& ann = annotations[s];
    if (ann.height != stack[s].height() || ann.width != stack[s].width()) {
      throw invalid_argument("vessel annotation grid does not match feature map " +
                             stack[s].dims());
    }
    for (std::size_t cell = 0; cell < cells; ++cell) {
      const int cls = ann.labels[cell] ? 1 : 0;
      const float* v = stack[s].data().data() + cell * c;
      for (int ch = 0; ch < c; ++ch) sum[cls][ch] += v[ch];
      count[cls] += 1.0;
    }
  }
  if (count[0] < 2.0) throw insufficient_data("cortex (non-vessel) population has fewer than 2 patches");
  if (count[1] < 2.0) throw insufficient_data("vessel population has fewer than 2 patches");
  std::vector<double> mean[2];
  for (int cls = 0; cls < 2; ++cls) {
    mean[cls].resize(c);
    for (int ch = 0; ch < c; ++ch) mean[cls][ch] = sum[cls][ch] / count[cls];
  }
  std::vector<double> sq[2] = {std::vector<double>(c, 0.0), std::vector<double>(c, 0.0)};
  for (std::size_t s = 0; s < stack.size(); ++s) {
    for (std::size_t cell = 0; cell < cells; ++cell) {
      const int cls = annotations[s].labels[cell] ? 1 : 0;
      const float* v = stack[s].data().data() + cell * c;
      for (int ch = 0; ch < c; ++ch) {
        const double d = v[ch] - mean[cls][ch];
        sq[cls][ch] += d * d;
      }
    }
  }
  std::vector<double> beta(c);
  for (int ch = 0; ch < c; ++ch) {
    const double sd_cortex = std::sqrt(sq[0][ch] / (count[0] - 1.0));
    const double sd_vessel = std::sqrt(sq[1][ch] / (count[1] - 1.0));
    const double diff = mean[0][ch] - mean[1][ch];
    beta[ch] = diff * diff / std::max(sd_cortex * sd_vessel, kSnrVarianceFloor);
  }
  return beta;
}

/// Keeps floor(fraction * C0) channels: the highest scores (or the lowest,
/// with `bottom`), ties toward the lower index, returned ascending.
inline ChannelMask select_top(std::span<const double> scores, double fraction,
                              bool bottom = false) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw invalid_argument("channel fraction must be in (0, 1], got " + std::to_string(fraction));
  }
  const int c0 = static_cast<int>(scores.size());
  // The small bias absorbs products like 0.7 * 10 = 6.9999...
  const int keep = static_cast<int>(std::floor(fraction * c0 + 1e-9));
  if (keep < 1) {
    throw invalid_argument("fraction " + std::to_string(fraction) + " of " +
                           std::to_string(c0) + " channels keeps none");
  }
  std::vector<int> order(c0);
  std::iota(order.begin(), order.end(), 0);
  // Top ranking: higher score first, then lower index. Bottom mode walks the
  // same ranking from the other end, so the two masks are complementary.
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
  });
  if (bottom) std::reverse(order.begin(), order.end());
  ChannelMask mask;
  mask.kept.assign(order.begin(), order.begin() + keep);
  std::sort(mask.kept.begin(), mask.kept.end());
  mask.scores.assign(scores.begin(), scores.end());
  mask.fraction = fraction;
  mask.bottom = bottom;
  return mask;
}

// Mask file: {mode, fraction, bottom, kept, scores, source: {checkpoint, K'}}.

inline nlohmann::json mask_to_json(const ChannelMask& mask) {
  return {{"mode", snr_mode_name(mask.mode)},
          {"fraction", mask.fraction},
          {"bottom", mask.bottom},
          {"kept", mask.kept},
          {"scores", mask.scores},
          {"source", {{"checkpoint", mask.checkpoint}, {"K'", mask.sample_count}}}};
}

inline ChannelMask mask_from_json(const nlohmann::json& j) {
  ChannelMask mask;
  try {
    mask.mode = parse_snr_mode(j.at("mode").get<std::string>());
    mask.fraction = j.at("fraction").get<double>();
    mask.bottom = j.value("bottom", false);
    mask.kept = j.at("kept").get<std::vector<int>>();
    mask.scores = j.at("scores").get<std::vector<double>>();
    if (j.contains("source")) {
      mask.checkpoint = j["source"].value("checkpoint", std::string());
      mask.sample_count = j["source"].value("K'", 0);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("bad channel mask: ") + e.what());
  }
  if (mask.kept.empty()) throw Error(ErrorKind::kFormat, "channel mask keeps no channels");
  for (std::size_t i = 0; i < mask.kept.size(); ++i) {
    if (mask.kept[i] < 0 || mask.kept[i] >= mask.input_channels() ||
        (i > 0 && mask.kept[i] <= mask.kept[i - 1])) {
      throw Error(ErrorKind::kFormat, "channel mask indices must be ascending and < " +
                                          std::to_string(mask.input_channels()));
    }
  }
  return mask;
}

inline void write_mask(const ChannelMask& mask, const std::filesystem::path& path) {
  io::write_file_atomic(path, mask_to_json(mask).dump(2) + "\n");
}

inline ChannelMask read_mask(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::kFormat, "bad channel mask '" + path.string() + "': " + e.what());
  }
  return mask_from_json(j);
}

}  // namespace microvad

#endif  // MICROVAD_CHANNEL_SELECT_HPP_
