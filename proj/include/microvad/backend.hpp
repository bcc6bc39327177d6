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

#ifndef MICROVAD_BACKEND_HPP_
#define MICROVAD_BACKEND_HPP_

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "microvad/error.hpp"
#include "microvad/feature_map.hpp"
#include "microvad/fmap_io.hpp"
#include "microvad/image.hpp"
#include "microvad/roi.hpp"

namespace microvad {

/// Maps a ROI to a FeatureMap of fixed dims. Implementations must be
/// deterministic: the same ROI gives a bit-identical map.
class FeatureBackend {
 public:
  virtual ~FeatureBackend() = default;

  virtual std::string id() const = 0;
  virtual GridSpec grid() const = 0;
  virtual int channels() const = 0;

  /// False for backends whose features are produced offline (FMAP files).
  virtual bool can_featurize() const { return true; }
  virtual FeatureMap featurize(const RoiImage& roi) const = 0;
};

/// Channel layout of the filter-bank backend.
enum FilterBankChannel : int {
  kGrayMean = 0,
  kGrayStd,
  kMeanDx,
  kMeanDy,
  kMeanAbsDx,
  kMeanAbsDy,
  kRedMean,
  kGreenMean,
  kBlueMean,
  kRedStd,
  kGreenStd,
  kBlueStd,
  kGrayMin,
  kGrayMax,
  kLaplacianMean,
  kGrayRange,
  kFilterBankChannels,
};

/// Hand-built 16-channel descriptor per patch: intensity statistics, patch
/// local forward differences, color moments and a 4-neighbour Laplacian.
/// Needs no model weights.
class FilterBankBackend final : public FeatureBackend {
 public:
  std::string id() const override { return "filterbank"; }
  GridSpec grid() const override { return {}; }
  int channels() const override { return kFilterBankChannels; }

  FeatureMap featurize(const RoiImage& roi) const override {
    const GridSpec g = grid();
    const FloatImage img = resize_bilinear(roi.pixels, g.input_px, g.input_px);
    const int n = g.input_px;
    const int nc = img.channels;

    std::vector<double> gray(static_cast<std::size_t>(n) * n);
    for (std::size_t i = 0; i < gray.size(); ++i) {
      gray[i] = nc == 3 ? 0.299 * img.values[3 * i] + 0.587 * img.values[3 * i + 1] +
                              0.114 * img.values[3 * i + 2]
                        : img.values[i];
    }
    auto gray_at = [&](int x, int y) { return gray[static_cast<std::size_t>(y) * n + x]; };
    auto color_at = [&](int x, int y, int c) {
      return nc == 3 ? static_cast<double>(img.at(x, y, c)) : gray_at(x, y);
    };

    const int p = g.patch_px;
    std::vector<float> out(static_cast<std::size_t>(g.grid_h) * g.grid_w * kFilterBankChannels);
    for (int gy = 0; gy < g.grid_h; ++gy) {
      for (int gx = 0; gx < g.grid_w; ++gx) {
        const int x0 = gx * g.stride_px;
        const int y0 = gy * g.stride_px;
        const double count = static_cast<double>(p) * p;

        double sum = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
        double csum[3] = {0.0, 0.0, 0.0};
        for (int y = y0; y < y0 + p; ++y) {
          for (int x = x0; x < x0 + p; ++x) {
            const double v = gray_at(x, y);
            sum += v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            for (int c = 0; c < 3; ++c) csum[c] += color_at(x, y, c);
          }
        }
        const double mean = sum / count;
        double cmean[3];
        for (int c = 0; c < 3; ++c) cmean[c] = csum[c] / count;

        double sq = 0.0, csq[3] = {0.0, 0.0, 0.0};
        double dx = 0.0, dy = 0.0, adx = 0.0, ady = 0.0, lap = 0.0;
        for (int y = y0; y < y0 + p; ++y) {
          for (int x = x0; x < x0 + p; ++x) {
            const double v = gray_at(x, y);
            sq += (v - mean) * (v - mean);
            for (int c = 0; c < 3; ++c) {
              const double d = color_at(x, y, c) - cmean[c];
              csq[c] += d * d;
            }
            if (x + 1 < x0 + p) {
              const double d = gray_at(x + 1, y) - v;
              dx += d;
              adx += std::abs(d);
            }
            if (y + 1 < y0 + p) {
              const double d = gray_at(x, y + 1) - v;
              dy += d;
              ady += std::abs(d);
            }
            if (x > x0 && x + 1 < x0 + p && y > y0 && y + 1 < y0 + p) {
              lap += gray_at(x - 1, y) + gray_at(x + 1, y) + gray_at(x, y - 1) +
                     gray_at(x, y + 1) - 4.0 * v;
            }
          }
        }
        const double diffs = static_cast<double>(p) * (p - 1);
        const double interior = static_cast<double>(p - 2) * (p - 2);

        float* f = out.data() + (static_cast<std::size_t>(gy) * g.grid_w + gx) * kFilterBankChannels;
        f[kGrayMean] = static_cast<float>(mean);
        f[kGrayStd] = static_cast<float>(std::sqrt(sq / count));
        f[kMeanDx] = static_cast<float>(dx / diffs);
        f[kMeanDy] = static_cast<float>(dy / diffs);
        f[kMeanAbsDx] = static_cast<float>(adx / diffs);
        f[kMeanAbsDy] = static_cast<float>(ady / diffs);
        for (int c = 0; c < 3; ++c) {
          f[kRedMean + c] = static_cast<float>(cmean[c]);
          f[kRedStd + c] = static_cast<float>(std::sqrt(csq[c] / count));
        }
        f[kGrayMin] = static_cast<float>(lo);
        f[kGrayMax] = static_cast<float>(hi);
        f[kLaplacianMean] = static_cast<float>(lap / interior);
        f[kGrayRange] = static_cast<float>(hi - lo);
      }
    }
    FeatureMapMeta meta{roi.size(), roi.size(), g.patch_px, g.stride_px, {}, id()};
    return FeatureMap(g.grid_h, g.grid_w, kFilterBankChannels, std::move(out), meta);
  }
};

/// Declared dims of a backbone that runs outside this toolkit; its features
/// arrive as FMAP files.
class PrecomputedBackend final : public FeatureBackend {
 public:
  PrecomputedBackend(std::string id, GridSpec grid, int channels)
      : id_(std::move(id)), grid_(grid), channels_(channels) {}

  std::string id() const override { return id_; }
  GridSpec grid() const override { return grid_; }
  int channels() const override { return channels_; }
  bool can_featurize() const override { return false; }

  FeatureMap featurize(const RoiImage&) const override {
    throw config_error("backend '" + id_ +
                       "' produces features offline; supply FMAP entries instead of images");
  }

 private:
  std::string id_;
  GridSpec grid_;
  int channels_;
};

inline std::vector<std::string> backend_ids() { return {"filterbank", "dinov2-vits14"}; }

inline std::unique_ptr<FeatureBackend> make_backend(const std::string& id) {
  if (id == "filterbank") return std::make_unique<FilterBankBackend>();
  if (id == "dinov2-vits14") return std::make_unique<PrecomputedBackend>(id, GridSpec{}, 384);
  throw config_error("unknown backend '" + id + "'");
}

inline FeatureMap featurize(const RoiImage& roi, const FeatureBackend& backend) {
  return backend.featurize(roi);
}

/// Reads an FMAP and checks it against the backend's declared dims.
inline FeatureMap load_precomputed(const std::filesystem::path& path,
                                   const FeatureBackend& backend) {
  auto map = read_fmap(path);
  const auto g = backend.grid();
  if (map.height() != g.grid_h || map.width() != g.grid_w ||
      map.channels() != backend.channels()) {
    throw config_error("'" + path.string() + "': expected " +
                       FeatureMap::dims_string(g.grid_h, g.grid_w, backend.channels()) +
                       " for backend '" + backend.id() + "', found " + map.dims());
  }
  return map;
}

}  // namespace microvad

#endif  // MICROVAD_BACKEND_HPP_
