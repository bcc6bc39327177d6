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

#ifndef MICROVAD_ROI_HPP_
#define MICROVAD_ROI_HPP_

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "microvad/checkpoint.hpp"
#include "microvad/error.hpp"
#include "microvad/feature_map.hpp"
#include "microvad/image.hpp"

namespace microvad {

/// Pixel coordinate: u is the column, v the row.
struct PixelPoint {
  double u = 0.0;
  double v = 0.0;
  friend bool operator==(const PixelPoint&, const PixelPoint&) = default;
};

/// Anchor-aligned square crop of a raw image.
struct RoiImage {
  Image pixels;
  PixelPoint anchor_px;      // anchor inside the crop
  int applied_shift_u = 0;   // border clamping shift, crop-origin pixels
  int applied_shift_v = 0;
  int left = 0;              // crop origin in the raw image
  int top = 0;
  std::string source_id;
  std::vector<Flip> applied_flips;

  int size() const { return pixels.width; }
};

/// Crop a roi_px square centered at anchor + offset, shifted minimally so it
/// stays inside the raw image.
inline RoiImage extract_roi(const Image& raw, PixelPoint anchor, PixelOffset offset,
                            int roi_px, std::string source_id = {}) {
  if (raw.width < roi_px || raw.height < roi_px) {
    throw Error(ErrorKind::kInvalidArgument,
                "raw image " + std::to_string(raw.width) + "x" + std::to_string(raw.height) +
                    " is smaller than the " + std::to_string(roi_px) + " px ROI");
  }
  const int half = roi_px / 2;
  const int cu = static_cast<int>(std::lround(anchor.u)) + offset.du;
  const int cv = static_cast<int>(std::lround(anchor.v)) + offset.dv;
  const int want_left = cu - half;
  const int want_top = cv - half;
  const int left = std::clamp(want_left, 0, raw.width - roi_px);
  const int top = std::clamp(want_top, 0, raw.height - roi_px);
  RoiImage roi;
  roi.pixels = crop(raw, left, top, roi_px, roi_px);
  roi.anchor_px = {anchor.u - left, anchor.v - top};
  roi.applied_shift_u = left - want_left;
  roi.applied_shift_v = top - want_top;
  roi.left = left;
  roi.top = top;
  roi.source_id = std::move(source_id);
  return roi;
}

/// Crop a companion raster (e.g. a vessel mask at raw resolution) with the
/// rectangle the ROI used.
inline Image crop_like(const RoiImage& roi, const Image& companion) {
  return crop(companion, roi.left, roi.top, roi.size(), roi.size());
}

inline Image apply_flip(const Image& img, Flip flip) {
  switch (flip) {
    case Flip::kVertical: return flip_vertical(img);
    case Flip::kHorizontal: return flip_horizontal(img);
    case Flip::kBoth: return flip_vertical(flip_horizontal(img));
  }
  return img;
}

inline PixelPoint apply_flip(PixelPoint p, Flip flip, int size_px) {
  const double last = size_px - 1;
  switch (flip) {
    case Flip::kVertical: return {p.u, last - p.v};
    case Flip::kHorizontal: return {last - p.u, p.v};
    case Flip::kBoth: return {last - p.u, last - p.v};
  }
  return p;
}

inline RoiImage apply_flip(const RoiImage& roi, Flip flip) {
  RoiImage out = roi;
  out.pixels = apply_flip(roi.pixels, flip);
  out.anchor_px = apply_flip(roi.anchor_px, flip, roi.size());
  out.applied_flips.push_back(flip);
  return out;
}

/// The original followed by one mirrored copy per enabled flip.
inline std::vector<RoiImage> augment_flips(const RoiImage& roi, const std::vector<Flip>& flips) {
  std::vector<RoiImage> out;
  out.reserve(1 + flips.size());
  out.push_back(roi);
  for (Flip f : flips) out.push_back(apply_flip(roi, f));
  return out;
}

/// Grid layout of a patch backend: cell k covers input pixels
/// [k * stride, k * stride + patch).
struct GridSpec {
  int input_px = 252;
  int patch_px = 14;
  int stride_px = 7;
  int grid_h = 35;
  int grid_w = 35;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Nearest patch center: clamp(round((u - patch/2) / stride), 0, W - 1).
inline GridPoint anchor_to_grid(PixelPoint anchor_px, int patch_px, int stride_px,
                                int grid_h, int grid_w) {
  auto axis = [&](double p, int n) {
    const double k = std::round((p - patch_px / 2.0) / stride_px);
    return std::clamp(k, 0.0, static_cast<double>(n - 1));
  };
  return {axis(anchor_px.u, grid_w), axis(anchor_px.v, grid_h)};
}

/// ROI pixel -> backend input pixel under the corner-aligned resize.
inline PixelPoint roi_to_input(PixelPoint p, int roi_px, int input_px) {
  const double s = static_cast<double>(input_px - 1) / (roi_px - 1);
  return {p.u * s, p.v * s};
}

inline GridPoint roi_anchor_to_grid(PixelPoint anchor_px, int roi_px, const GridSpec& grid) {
  return anchor_to_grid(roi_to_input(anchor_px, roi_px, grid.input_px), grid.patch_px,
                        grid.stride_px, grid.grid_h, grid.grid_w);
}

/// Where the anchor sits in a ROI that needed no border shift.
inline PixelPoint nominal_roi_anchor(const CheckpointConfig& cfg) {
  const int half = cfg.roi_px / 2;
  return {static_cast<double>(half - cfg.anchor_offset.du),
          static_cast<double>(half - cfg.anchor_offset.dv)};
}

/// Grid anchor the checkpoint's sampling geometry is built around.
inline GridPoint nominal_grid_anchor(const CheckpointConfig& cfg, const GridSpec& grid) {
  return roi_anchor_to_grid(nominal_roi_anchor(cfg), cfg.roi_px, grid);
}

/// Every enabled flip must leave the nominal anchor's grid cell in place,
/// otherwise augmented samples would not share one sampling geometry.
inline void validate_flip_compatibility(const CheckpointConfig& cfg, const GridSpec& grid) {
  const auto anchor = nominal_roi_anchor(cfg);
  if (anchor.u < 0 || anchor.v < 0 || anchor.u > cfg.roi_px - 1 || anchor.v > cfg.roi_px - 1) {
    throw config_error("checkpoint '" + cfg.name + "': anchor offset moves the anchor out of the ROI");
  }
  const auto base = roi_anchor_to_grid(anchor, cfg.roi_px, grid);
  for (Flip f : cfg.flips) {
    const auto moved = roi_anchor_to_grid(apply_flip(anchor, f, cfg.roi_px), cfg.roi_px, grid);
    if (!(moved == base)) {
      throw config_error("checkpoint '" + cfg.name + "': " + flip_name(f) +
                         " flip moves the anchor grid cell from (" + std::to_string(base.x) +
                         ", " + std::to_string(base.y) + ") to (" + std::to_string(moved.x) +
                         ", " + std::to_string(moved.y) + ")");
    }
  }
}

}  // namespace microvad

#endif  // MICROVAD_ROI_HPP_
