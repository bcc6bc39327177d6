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

#ifndef MICROVAD_PGS_HPP_
#define MICROVAD_PGS_HPP_

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "microvad/error.hpp"
#include "microvad/feature_map.hpp"

// Progressive-granularity sampling. Near the anchor the grid is sampled cell
// by cell; every lambda grid units of Chebyshev distance the pooling size
// doubles, from 2^a0 up to the cap 2^a1.

namespace microvad {

/// The <lambda, a0, a1> triplet.
struct GranularityParams {
  double lambda = 6.0;
  int a0 = 0;
  int a1 = 2;

  void validate() const {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
      throw invalid_argument("lambda must be positive, got " + std::to_string(lambda));
    }
    if (a0 < 0 || a1 < a0 || a1 > 20) {
      throw invalid_argument("need 0 <= a0 <= a1 <= 20, got a0=" + std::to_string(a0) +
                             " a1=" + std::to_string(a1));
    }
  }

  friend bool operator==(const GranularityParams&, const GranularityParams&) = default;
};

inline double chebyshev(GridPoint p, GridPoint q) {
  return std::max(std::abs(p.x - q.x), std::abs(p.y - q.y));
}

/// Exponent p of the granularity 2^p assigned to `loc`.
inline int granularity_level(const GranularityParams& params, GridPoint anchor,
                             GridPoint loc) {
  const double steps = std::floor(chebyshev(loc, anchor) / params.lambda);
  if (steps >= static_cast<double>(params.a1 - params.a0)) return params.a1;
  return params.a0 + static_cast<int>(steps);
}

inline int granularity_at(const GranularityParams& params, GridPoint anchor, GridPoint loc) {
  return 1 << granularity_level(params, anchor, loc);
}

/// One pooled window kept by the sampler. Extent is half-open in raw cells.
struct SamplingWindow {
  int level = 0;  // exponent p, g = 2^p
  int row = 0;    // window index i in the level's pooled grid
  int col = 0;    // window index j
  GridPoint center;
  int y0 = 0, y1 = 0, x0 = 0, x1 = 0;

  int g() const { return 1 << level; }
  int cell_count() const { return (y1 - y0) * (x1 - x0); }

  friend bool operator==(const SamplingWindow&, const SamplingWindow&) = default;
};

namespace detail {

inline void fnv_mix(std::uint64_t& h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xffu;
    h *= 0x100000001b3ull;
  }
}

}  // namespace detail

/// Deterministic window list for one checkpoint. Order: ascending level,
/// then row-major window index.
struct SamplingGeometry {
  int height = 0;
  int width = 0;
  GridPoint anchor;
  GranularityParams params;
  std::vector<SamplingWindow> windows;

  std::size_t size() const { return windows.size(); }

  /// FNV-1a over the canonical content.
  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    detail::fnv_mix(h, static_cast<std::uint64_t>(height));
    detail::fnv_mix(h, static_cast<std::uint64_t>(width));
    detail::fnv_mix(h, std::bit_cast<std::uint64_t>(anchor.x));
    detail::fnv_mix(h, std::bit_cast<std::uint64_t>(anchor.y));
    detail::fnv_mix(h, std::bit_cast<std::uint64_t>(params.lambda));
    detail::fnv_mix(h, static_cast<std::uint64_t>(params.a0));
    detail::fnv_mix(h, static_cast<std::uint64_t>(params.a1));
    detail::fnv_mix(h, windows.size());
    for (const auto& w : windows) {
      for (int v : {w.level, w.row, w.col, w.y0, w.y1, w.x0, w.x1}) {
        detail::fnv_mix(h, static_cast<std::uint64_t>(v));
      }
      detail::fnv_mix(h, std::bit_cast<std::uint64_t>(w.center.x));
      detail::fnv_mix(h, std::bit_cast<std::uint64_t>(w.center.y));
    }
    return h;
  }

  friend bool operator==(const SamplingGeometry&, const SamplingGeometry&) = default;
};

inline SamplingGeometry build_geometry(const GranularityParams& params, GridPoint anchor,
                                       int height, int width) {
  params.validate();
  if (height <= 0 || width <= 0) throw invalid_argument("grid dims must be positive");
  if (!(anchor.x >= 0 && anchor.x <= width - 1 && anchor.y >= 0 && anchor.y <= height - 1)) {
    throw invalid_argument("anchor (" + std::to_string(anchor.x) + ", " +
                           std::to_string(anchor.y) + ") outside " + std::to_string(height) +
                           "x" + std::to_string(width) + " grid");
  }
  SamplingGeometry geo{height, width, anchor, params, {}};
  for (int level = params.a0; level <= params.a1; ++level) {
    const int g = 1 << level;
    const int rows = (height + g - 1) / g;
    const int cols = (width + g - 1) / g;
    for (int i = 0; i < rows; ++i) {
      const int y0 = i * g;
      const int y1 = std::min(y0 + g, height);
      for (int j = 0; j < cols; ++j) {
        const int x0 = j * g;
        const int x1 = std::min(x0 + g, width);
        // Centroid of the valid cells.
        const GridPoint center{(x0 + x1 - 1) / 2.0, (y0 + y1 - 1) / 2.0};
        if (granularity_level(params, anchor, center) == level) {
          geo.windows.push_back({level, i, j, center, y0, y1, x0, x1});
        }
      }
    }
  }
  return geo;
}

/// How many kept windows cover each raw cell. Ring boundaries can leave a
/// cell covered zero or several times.
struct CoverageStats {
  std::vector<int> per_cell;  // row-major H x W
  int uncovered = 0;
  int multiply_covered = 0;
  int max_coverage = 0;
};

inline CoverageStats coverage(const SamplingGeometry& geo) {
  CoverageStats stats;
  stats.per_cell.assign(static_cast<std::size_t>(geo.height) * geo.width, 0);
  for (const auto& w : geo.windows) {
    for (int y = w.y0; y < w.y1; ++y) {
      for (int x = w.x0; x < w.x1; ++x) ++stats.per_cell[static_cast<std::size_t>(y) * geo.width + x];
    }
  }
  for (int c : stats.per_cell) {
    if (c == 0) ++stats.uncovered;
    if (c > 1) ++stats.multiply_covered;
    stats.max_coverage = std::max(stats.max_coverage, c);
  }
  return stats;
}

/// N descriptors of dimension `dim`, row-major, tied to one geometry.
struct DescriptorSet {
  int count = 0;
  int dim = 0;
  std::vector<double> values;
  std::uint64_t geometry_hash = 0;

  std::span<const double> row(int n) const {
    return std::span<const double>(values).subspan(static_cast<std::size_t>(n) * dim, dim);
  }
};

/// Mean of the map over each window's raw extent.
inline DescriptorSet sample_descriptors(const FeatureMap& map, const SamplingGeometry& geo) {
  if (map.height() != geo.height || map.width() != geo.width) {
    throw invalid_argument("feature map grid " + std::to_string(map.height()) + "x" +
                           std::to_string(map.width()) + " does not match geometry grid " +
                           std::to_string(geo.height) + "x" + std::to_string(geo.width));
  }
  const int c = map.channels();
  DescriptorSet out{static_cast<int>(geo.size()), c, {}, geo.hash()};
  out.values.assign(geo.size() * static_cast<std::size_t>(c), 0.0);
  for (std::size_t n = 0; n < geo.size(); ++n) {
    const auto& w = geo.windows[n];
    double* dst = out.values.data() + n * c;
    for (int y = w.y0; y < w.y1; ++y) {
      for (int x = w.x0; x < w.x1; ++x) {
        const auto v = map.cell(y, x);
        for (int k = 0; k < c; ++k) dst[k] += v[k];
      }
    }
    const double inv = 1.0 / w.cell_count();
    for (int k = 0; k < c; ++k) dst[k] *= inv;
  }
  return out;
}

inline std::string hash_hex(std::uint64_t h) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[i] = kDigits[h & 0xf];
  return out;
}

/// Windows are stored as [level, row, col, y0, y1, x0, x1, cx, cy].
inline nlohmann::json geometry_to_json(const SamplingGeometry& geo) {
  nlohmann::json windows = nlohmann::json::array();
  for (const auto& w : geo.windows) {
    windows.push_back({w.level, w.row, w.col, w.y0, w.y1, w.x0, w.x1, w.center.x, w.center.y});
  }
  return {{"grid", {geo.height, geo.width}},
          {"anchor", {geo.anchor.x, geo.anchor.y}},
          {"lambda", geo.params.lambda},
          {"a0", geo.params.a0},
          {"a1", geo.params.a1},
          {"n_pgs", geo.size()},
          {"hash", hash_hex(geo.hash())},
          {"windows", windows}};
}

/// Parses a serialized geometry and checks its stored hash.
inline SamplingGeometry geometry_from_json(const nlohmann::json& j) {
  SamplingGeometry geo;
  std::string stored_hash;
  try {
    geo.height = j.at("grid").at(0).get<int>();
    geo.width = j.at("grid").at(1).get<int>();
    geo.anchor = {j.at("anchor").at(0).get<double>(), j.at("anchor").at(1).get<double>()};
    geo.params = {j.at("lambda").get<double>(), j.at("a0").get<int>(), j.at("a1").get<int>()};
    for (const auto& w : j.at("windows")) {
      SamplingWindow win;
      win.level = w.at(0).get<int>();
      win.row = w.at(1).get<int>();
      win.col = w.at(2).get<int>();
      win.y0 = w.at(3).get<int>();
      win.y1 = w.at(4).get<int>();
      win.x0 = w.at(5).get<int>();
      win.x1 = w.at(6).get<int>();
      win.center = {w.at(7).get<double>(), w.at(8).get<double>()};
      if (win.y0 < 0 || win.x0 < 0 || win.y1 > geo.height || win.x1 > geo.width ||
          win.y1 <= win.y0 || win.x1 <= win.x0 || win.level < 0 || win.level > 20) {
        throw Error(ErrorKind::kFormat, "window extent outside the grid");
      }
      geo.windows.push_back(win);
    }
    stored_hash = j.at("hash").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("bad geometry record: ") + e.what());
  }
  if (hash_hex(geo.hash()) != stored_hash) {
    throw Error(ErrorKind::kFormat, "geometry hash mismatch: stored " + stored_hash +
                                        ", content hashes to " + hash_hex(geo.hash()));
  }
  return geo;
}

}  // namespace microvad

#endif  // MICROVAD_PGS_HPP_
