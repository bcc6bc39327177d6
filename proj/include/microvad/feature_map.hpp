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

#ifndef MICROVAD_FEATURE_MAP_HPP_
#define MICROVAD_FEATURE_MAP_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "microvad/error.hpp"

namespace microvad {

/// Where a feature map came from. Optional on every map.
struct FeatureMapMeta {
  int source_width_px = 0;
  int source_height_px = 0;
  int patch_px = 0;
  int stride_px = 0;
  std::string checkpoint;
  std::string backend;

  friend bool operator==(const FeatureMapMeta&, const FeatureMapMeta&) = default;
};

/// Fractional grid coordinate: x is the column, y the row.
struct GridPoint {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const GridPoint&, const GridPoint&) = default;
};

/// Immutable H x W x C grid of 32-bit features, row-major (y, x, c).
class FeatureMap {
 public:
  FeatureMap() = default;

  FeatureMap(int height, int width, int channels, std::vector<float> data,
             std::optional<FeatureMapMeta> meta = std::nullopt)
      : height_(height),
        width_(width),
        channels_(channels),
        data_(std::move(data)),
        meta_(std::move(meta)) {
    if (height <= 0 || width <= 0 || channels <= 0) {
      throw invalid_argument("feature map dims must be positive, got " +
                             dims_string(height, width, channels));
    }
    const auto expected = static_cast<std::size_t>(height) * width * channels;
    if (data_.size() != expected) {
      throw invalid_argument("feature map of " + dims_string(height, width, channels) +
                             " needs " + std::to_string(expected) + " values, got " +
                             std::to_string(data_.size()));
    }
    for (std::size_t i = 0; i < data_.size(); ++i) {
      if (!std::isfinite(data_[i])) {
        throw invalid_argument("non-finite feature value at index " + std::to_string(i));
      }
    }
  }

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t cells() const { return static_cast<std::size_t>(height_) * width_; }

  std::span<const float> data() const { return data_; }
  const std::optional<FeatureMapMeta>& meta() const { return meta_; }

  float at(int y, int x, int c) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  /// The C-vector of one cell.
  std::span<const float> cell(int y, int x) const {
    return std::span<const float>(data_).subspan(
        (static_cast<std::size_t>(y) * width_ + x) * channels_, channels_);
  }

  bool same_dims(const FeatureMap& other) const {
    return height_ == other.height_ && width_ == other.width_ &&
           channels_ == other.channels_;
  }

  std::string dims() const { return dims_string(height_, width_, channels_); }

  static std::string dims_string(int h, int w, int c) {
    return std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(c);
  }

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
  std::optional<FeatureMapMeta> meta_;
};

/// Average pooling with kernel = stride = g. Partial edge windows average
/// their valid cells only; accumulation is in double.
inline FeatureMap avg_pool(const FeatureMap& map, int g) {
  if (g <= 0) throw invalid_argument("pooling size must be >= 1, got " + std::to_string(g));
  if (g > std::max(map.height(), map.width())) {
    throw invalid_argument("pooling size " + std::to_string(g) + " exceeds map extent " +
                           map.dims());
  }
  if (g == 1) return map;
  const int h = map.height();
  const int w = map.width();
  const int c = map.channels();
  const int out_h = (h + g - 1) / g;
  const int out_w = (w + g - 1) / g;
  std::vector<float> out(static_cast<std::size_t>(out_h) * out_w * c);
  std::vector<double> acc(c);
  for (int i = 0; i < out_h; ++i) {
    const int y1 = std::min(i * g + g, h);
    for (int j = 0; j < out_w; ++j) {
      const int x1 = std::min(j * g + g, w);
      std::fill(acc.begin(), acc.end(), 0.0);
      for (int y = i * g; y < y1; ++y) {
        for (int x = j * g; x < x1; ++x) {
          auto v = map.cell(y, x);
          for (int k = 0; k < c; ++k) acc[k] += v[k];
        }
      }
      const double count = static_cast<double>(y1 - i * g) * (x1 - j * g);
      float* dst = out.data() + (static_cast<std::size_t>(i) * out_w + j) * c;
      for (int k = 0; k < c; ++k) dst[k] = static_cast<float>(acc[k] / count);
    }
  }
  return FeatureMap(out_h, out_w, c, std::move(out), map.meta());
}

/// Keeps the listed channels, in the listed order.
inline FeatureMap select_channels(const FeatureMap& map, std::span<const int> kept) {
  if (kept.empty()) throw invalid_argument("channel selection keeps no channels");
  for (int k : kept) {
    if (k < 0 || k >= map.channels()) {
      throw invalid_argument("channel index " + std::to_string(k) +
                             " out of range for " + std::to_string(map.channels()) +
                             " channels");
    }
  }
  const int out_c = static_cast<int>(kept.size());
  std::vector<float> out(map.cells() * out_c);
  const auto src = map.data();
  const auto in_c = static_cast<std::size_t>(map.channels());
  for (std::size_t cell = 0; cell < map.cells(); ++cell) {
    const float* s = src.data() + cell * in_c;
    float* d = out.data() + cell * out_c;
    for (int k = 0; k < out_c; ++k) d[k] = s[kept[k]];
  }
  return FeatureMap(map.height(), map.width(), out_c, std::move(out), map.meta());
}

}  // namespace microvad

#endif  // MICROVAD_FEATURE_MAP_HPP_
