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

#ifndef MICROVAD_RENDER_HPP_
#define MICROVAD_RENDER_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "microvad/error.hpp"
#include "microvad/image.hpp"
#include "microvad/normality_bank.hpp"
#include "microvad/pgs.hpp"
#include "microvad/roi.hpp"

namespace microvad {

/// Blue-to-red JET color for t in [0, 1].
inline std::array<std::uint8_t, 3> jet(double t) {
  t = std::clamp(t, 0.0, 1.0);
  auto channel = [](double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
  };
  return {channel(1.5 - std::abs(4.0 * t - 3.0)), channel(1.5 - std::abs(4.0 * t - 2.0)),
          channel(1.5 - std::abs(4.0 * t - 1.0))};
}

struct Marker {
  int location = 0;
  double x_px = 0.0;  // overlay pixel coordinates
  double y_px = 0.0;
  double radius_px = 0.0;
};

struct Heatmap {
  Image overlay;  // RGB, backend input resolution
  std::vector<Marker> markers;
  double scale_max = 0.0;
};

/// Paints each window's score over its pixel footprint (per-pixel maximum
/// where windows overlap), colors it with JET over [0, max(2 tau, max s_n)],
/// blends it at alpha 0.5 over the resized ROI and circles every window whose
/// score exceeds tau.
inline Heatmap render_heatmap(const ScoreResult& result, const SamplingGeometry& geometry,
                              const Image& roi, double tau, const GridSpec& grid = {}) {
  if (result.per_location.size() != geometry.size()) {
    throw invalid_argument("score result has " + std::to_string(result.per_location.size()) +
                           " locations, geometry has " + std::to_string(geometry.size()));
  }
  const int n = grid.input_px;
  std::vector<double> heat(static_cast<std::size_t>(n) * n, 0.0);
  double max_score = 0.0;
  for (std::size_t i = 0; i < geometry.size(); ++i) {
    const auto& w = geometry.windows[i];
    const double s = result.per_location[i];
    max_score = std::max(max_score, s);
    const int py0 = w.y0 * grid.stride_px;
    const int py1 = std::min(n, (w.y1 - 1) * grid.stride_px + grid.patch_px);
    const int px0 = w.x0 * grid.stride_px;
    const int px1 = std::min(n, (w.x1 - 1) * grid.stride_px + grid.patch_px);
    for (int y = py0; y < py1; ++y) {
      for (int x = px0; x < px1; ++x) {
        auto& h = heat[static_cast<std::size_t>(y) * n + x];
        h = std::max(h, s);
      }
    }
  }
  Heatmap out;
  out.scale_max = std::max(2.0 * tau, max_score);
  const FloatImage base = resize_bilinear(roi, n, n);
  out.overlay = Image(n, n, 3);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double t = out.scale_max > 0 ? heat[static_cast<std::size_t>(y) * n + x] / out.scale_max : 0.0;
      const auto color = jet(t);
      for (int c = 0; c < 3; ++c) {
        const double b = base.at(x, y, base.channels == 3 ? c : 0) * 255.0;
        out.overlay.at(x, y, c) =
            static_cast<std::uint8_t>(std::lround(0.5 * b + 0.5 * color[c]));
      }
    }
  }
  for (std::size_t i = 0; i < geometry.size(); ++i) {
    if (!(result.per_location[i] > tau)) continue;
    const auto& w = geometry.windows[i];
    const double half_patch = (grid.patch_px - 1) / 2.0;
    Marker m{static_cast<int>(i), w.center.x * grid.stride_px + half_patch,
             w.center.y * grid.stride_px + half_patch, grid.stride_px * w.g() / 2.0 + 2.0};
    out.markers.push_back(m);
    // One-pixel white circle outline.
    const int r = static_cast<int>(std::ceil(m.radius_px + 1));
    for (int y = static_cast<int>(m.y_px) - r; y <= static_cast<int>(m.y_px) + r + 1; ++y) {
      for (int x = static_cast<int>(m.x_px) - r; x <= static_cast<int>(m.x_px) + r + 1; ++x) {
        if (x < 0 || y < 0 || x >= n || y >= n) continue;
        if (std::abs(std::hypot(x - m.x_px, y - m.y_px) - m.radius_px) <= 0.5) {
          for (int c = 0; c < 3; ++c) out.overlay.at(x, y, c) = 255;
        }
      }
    }
  }
  return out;
}

inline Heatmap render_heatmap(const ScoreResult& result, const SamplingGeometry& geometry,
                              const Image& roi, double tau, const std::filesystem::path& out_path,
                              const GridSpec& grid = {}) {
  auto heatmap = render_heatmap(result, geometry, roi, tau, grid);
  write_pnm(heatmap.overlay, out_path);
  return heatmap;
}

}  // namespace microvad

#endif  // MICROVAD_RENDER_HPP_
