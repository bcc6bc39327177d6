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

#ifndef MICROVAD_SYNTH_HPP_
#define MICROVAD_SYNTH_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "microvad/error.hpp"
#include "microvad/image.hpp"
#include "microvad/manifest.hpp"
#include "microvad/roi.hpp"

// Procedural microscope-like scenes with known ground truth: a T-tipped
// needle, a probe loop, or a vascularized cortex patch, optionally with an
// injected defect. Nothing here aims at realism; it gives controllable
// normal variation (mostly away from the anchor) and controllable anomalies.

namespace microvad::synth {

enum class SceneKind { kNeedle, kLoop, kCortex };
enum class AnomalyType { kNone, kBlob, kMissingStructure, kExtraVessel, kOcclusion };
enum class AnomalyLocation { kNearAnchor, kFarFromAnchor };

inline std::string kind_name(SceneKind k) {
  switch (k) {
    case SceneKind::kNeedle: return "needle";
    case SceneKind::kLoop: return "loop";
    case SceneKind::kCortex: return "cortex";
  }
  return "?";
}

inline SceneKind parse_kind(const std::string& s) {
  if (s == "needle") return SceneKind::kNeedle;
  if (s == "loop") return SceneKind::kLoop;
  if (s == "cortex") return SceneKind::kCortex;
  throw invalid_argument("unknown scene kind '" + s + "'");
}

inline std::string anomaly_name(AnomalyType t) {
  switch (t) {
    case AnomalyType::kNone: return "none";
    case AnomalyType::kBlob: return "blob";
    case AnomalyType::kMissingStructure: return "missing-structure";
    case AnomalyType::kExtraVessel: return "extra-vessel";
    case AnomalyType::kOcclusion: return "occlusion";
  }
  return "?";
}

struct AnomalySpec {
  AnomalyType type = AnomalyType::kNone;
  AnomalyLocation location = AnomalyLocation::kNearAnchor;
  double magnitude = 1.0;  // scales contrast and area together
};

struct SceneSpec {
  SceneKind kind = SceneKind::kNeedle;
  std::uint64_t seed = 0;
  AnomalySpec anomaly;
  double noise = 0.02;          // per-pixel Gaussian sigma, intensity units
  double anchor_jitter_px = 12;  // anchor placement around the image center
  int width = 320;
  int height = 320;
  bool hooked_needle = false;   // loop scenes: needle threaded through the loop
  double vessel_coverage = 0.10;  // cortex target
};

struct Scene {
  Image image;
  PixelPoint anchor;
  Label label = Label::kNormal;
  std::optional<Image> vessel_mask;  // cortex only; 255 = vessel
};

/// Deterministic, platform-independent sampling on top of mt19937_64, whose
/// output sequence the standard pins down.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int integer(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(uniform() * (hi - lo + 1));
  }
  double normal() {
    if (spare_) {
      const double v = *spare_;
      spare_.reset();
      return v;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

namespace detail {

using Color = std::array<double, 3>;

struct Canvas {
  int w = 0, h = 0;
  std::vector<Color> px;

  Canvas(int width, int height, Color fill) : w(width), h(height), px(static_cast<std::size_t>(width) * height, fill) {}
  Color& at(int x, int y) { return px[static_cast<std::size_t>(y) * w + x]; }

  void blend(int x, int y, const Color& c, double alpha) {
    if (x < 0 || y < 0 || x >= w || y >= h || alpha <= 0.0) return;
    auto& p = at(x, y);
    alpha = std::min(alpha, 1.0);
    for (int k = 0; k < 3; ++k) p[k] = (1.0 - alpha) * p[k] + alpha * c[k];
  }
};

/// Smooth value noise in [-1, 1] with lattice spacing `cell`.
class ValueNoise {
 public:
  ValueNoise(Rng& rng, int w, int h, double cell) : cell_(cell) {
    nx_ = static_cast<int>(w / cell) + 2;
    ny_ = static_cast<int>(h / cell) + 2;
    lattice_.resize(static_cast<std::size_t>(nx_) * ny_);
    for (auto& v : lattice_) v = rng.uniform(-1.0, 1.0);
  }

  double operator()(double x, double y) const {
    const double fx = x / cell_, fy = y / cell_;
    const int ix = static_cast<int>(fx), iy = static_cast<int>(fy);
    const double tx = smooth(fx - ix), ty = smooth(fy - iy);
    auto l = [&](int i, int j) { return lattice_[static_cast<std::size_t>(j) * nx_ + i]; };
    const double top = l(ix, iy) * (1 - tx) + l(ix + 1, iy) * tx;
    const double bottom = l(ix, iy + 1) * (1 - tx) + l(ix + 1, iy + 1) * tx;
    return top * (1 - ty) + bottom * ty;
  }

 private:
  static double smooth(double t) { return t * t * (3.0 - 2.0 * t); }
  double cell_;
  int nx_ = 0, ny_ = 0;
  std::vector<double> lattice_;
};

/// Anti-aliased coverage of a distance `d` from a shape boundary of half
/// width `r`.
inline double coverage(double d, double r) { return std::clamp(r - d + 0.5, 0.0, 1.0); }

inline double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  const double vx = bx - ax, vy = by - ay;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = px - (ax + t * vx), dy = py - (ay + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

/// Thick line segment.
inline void draw_segment(Canvas& cv, double ax, double ay, double bx, double by, double half_width,
                         const Color& c, double alpha = 1.0) {
  const int x0 = std::max(0, static_cast<int>(std::floor(std::min(ax, bx) - half_width - 1)));
  const int x1 = std::min(cv.w - 1, static_cast<int>(std::ceil(std::max(ax, bx) + half_width + 1)));
  const int y0 = std::max(0, static_cast<int>(std::floor(std::min(ay, by) - half_width - 1)));
  const int y1 = std::min(cv.h - 1, static_cast<int>(std::ceil(std::max(ay, by) + half_width + 1)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double d = segment_distance(x, y, ax, ay, bx, by);
      cv.blend(x, y, c, alpha * coverage(d, half_width));
    }
  }
}

inline void draw_ring(Canvas& cv, double cx, double cy, double radius, double half_width,
                      const Color& c, double gap_from = 0.0, double gap_to = 0.0) {
  const int r = static_cast<int>(std::ceil(radius + half_width + 1));
  for (int y = static_cast<int>(cy) - r; y <= static_cast<int>(cy) + r; ++y) {
    for (int x = static_cast<int>(cx) - r; x <= static_cast<int>(cx) + r; ++x) {
      const double dx = x - cx, dy = y - cy;
      if (gap_to > gap_from) {
        const double a = std::atan2(dy, dx);
        if (a >= gap_from && a <= gap_to) continue;
      }
      const double d = std::abs(std::sqrt(dx * dx + dy * dy) - radius);
      cv.blend(x, y, c, coverage(d, half_width));
    }
  }
}

/// Irregular disc: radius modulated by a few random harmonics.
inline void draw_blob(Canvas& cv, Rng& rng, double cx, double cy, double radius, const Color& c,
                      double alpha) {
  double amp[3], phase[3];
  for (int k = 0; k < 3; ++k) {
    amp[k] = rng.uniform(0.0, 0.15);
    phase[k] = rng.uniform(0.0, 2 * std::numbers::pi);
  }
  const int r = static_cast<int>(std::ceil(radius * 1.5 + 2));
  for (int y = static_cast<int>(cy) - r; y <= static_cast<int>(cy) + r; ++y) {
    for (int x = static_cast<int>(cx) - r; x <= static_cast<int>(cx) + r; ++x) {
      const double dx = x - cx, dy = y - cy;
      const double a = std::atan2(dy, dx);
      double rr = radius;
      for (int k = 0; k < 3; ++k) rr *= 1.0 + amp[k] * std::sin((k + 2) * a + phase[k]);
      cv.blend(x, y, c, alpha * coverage(std::sqrt(dx * dx + dy * dy), rr));
    }
  }
}

/// A smooth vessel-like curve as a polyline of about 1 px steps.
inline std::vector<std::array<double, 2>> random_curve(Rng& rng, int w, int h) {
  auto border_point = [&](int side) -> std::array<double, 2> {
    switch (side) {
      case 0: return {rng.uniform(0, w), -10.0};
      case 1: return {w + 10.0, rng.uniform(0, h)};
      case 2: return {rng.uniform(0, w), h + 10.0};
      default: return {-10.0, rng.uniform(0, h)};
    }
  };
  const int s0 = rng.integer(0, 3);
  const int s1 = (s0 + rng.integer(1, 3)) % 4;
  const auto p0 = border_point(s0);
  const auto p3 = border_point(s1);
  const std::array<double, 2> p1 = {rng.uniform(0, w), rng.uniform(0, h)};
  const std::array<double, 2> p2 = {rng.uniform(0, w), rng.uniform(0, h)};
  std::vector<std::array<double, 2>> pts;
  const int steps = 2 * (w + h);
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps, u = 1 - t;
    pts.push_back({u * u * u * p0[0] + 3 * u * u * t * p1[0] + 3 * u * t * t * p2[0] + t * t * t * p3[0],
                   u * u * u * p0[1] + 3 * u * u * t * p1[1] + 3 * u * t * t * p2[1] + t * t * t * p3[1]});
  }
  return pts;
}

inline double curve_distance(const std::vector<std::array<double, 2>>& pts, double x, double y) {
  double best = 1e300;
  for (const auto& p : pts) best = std::min(best, std::hypot(p[0] - x, p[1] - y));
  return best;
}

/// Stamps a vessel into the canvas and its coverage into `cover`.
inline void draw_vessel(Canvas& cv, std::vector<double>& cover,
                        const std::vector<std::array<double, 2>>& pts, double half_width,
                        const Color& c) {
  std::vector<double> local(cover.size(), 0.0);
  const int r = static_cast<int>(std::ceil(half_width + 1));
  for (std::size_t i = 0; i < pts.size(); i += 1) {
    const int px = static_cast<int>(std::lround(pts[i][0]));
    const int py = static_cast<int>(std::lround(pts[i][1]));
    for (int y = py - r; y <= py + r; ++y) {
      if (y < 0 || y >= cv.h) continue;
      for (int x = px - r; x <= px + r; ++x) {
        if (x < 0 || x >= cv.w) continue;
        const double d = std::hypot(x - pts[i][0], y - pts[i][1]);
        auto& l = local[static_cast<std::size_t>(y) * cv.w + x];
        l = std::max(l, coverage(d, half_width));
      }
    }
  }
  for (int y = 0; y < cv.h; ++y) {
    for (int x = 0; x < cv.w; ++x) {
      const auto idx = static_cast<std::size_t>(y) * cv.w + x;
      if (local[idx] > 0.0) {
        cv.blend(x, y, c, local[idx]);
        cover[idx] = std::max(cover[idx], local[idx]);
      }
    }
  }
}

/// Point at Chebyshev distance in [lo, hi] from the anchor, inside the image
/// margin.
inline std::array<double, 2> place(Rng& rng, const PixelPoint& anchor, double lo, double hi, int w,
                                   int h, double margin) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const double d = rng.uniform(lo, hi);
    const int side = rng.integer(0, 3);
    const double t = rng.uniform(-d, d);
    double x = anchor.u, y = anchor.v;
    switch (side) {
      case 0: x += t; y -= d; break;
      case 1: x += d; y += t; break;
      case 2: x += t; y += d; break;
      default: x -= d; y += t; break;
    }
    if (x >= margin && y >= margin && x <= w - 1 - margin && y <= h - 1 - margin) return {x, y};
  }
  return {anchor.u, anchor.v};
}

}  // namespace detail

/// Renders one scene. Base content and anomaly use separate random streams,
/// so a scene spec with and without an anomaly share every other pixel.
inline Scene gen_scene(const SceneSpec& spec) {
  using namespace detail;
  if (spec.width < 64 || spec.height < 64) throw invalid_argument("scene must be at least 64 px");
  Rng rng(mix_seed(spec.seed, 0));
  Rng arng(mix_seed(spec.seed, 1));
  Rng nrng(mix_seed(spec.seed, 2));
  const int w = spec.width, h = spec.height;
  Scene scene;
  scene.anchor = {std::round(w / 2.0 + rng.uniform(-spec.anchor_jitter_px, spec.anchor_jitter_px)),
                  std::round(h / 2.0 + rng.uniform(-spec.anchor_jitter_px, spec.anchor_jitter_px))};
  const double au = scene.anchor.u, av = scene.anchor.v;
  const bool color = spec.kind == SceneKind::kCortex;

  // Background: base tone, low-frequency illumination and fine texture.
  const Color base = color ? Color{0.80, 0.55, 0.52}
                           : Color{0.72, 0.72, 0.72};
  const double tone = rng.uniform(-0.03, 0.03);
  Canvas cv(w, h, base);
  ValueNoise illum(rng, w, h, 96.0);
  ValueNoise texture(rng, w, h, 6.0);
  const double tex_amp = color ? 0.05 : 0.025;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double v = tone + 0.04 * illum(x, y) + tex_amp * texture(x, y);
      auto& p = cv.at(x, y);
      for (int k = 0; k < 3; ++k) p[k] += v;
    }
  }

  // Normal clutter away from the anchor (dust, debris, tissue texture).
  const int clutter = rng.integer(2, 5);
  for (int i = 0; i < clutter; ++i) {
    const auto pos = place(rng, scene.anchor, 70.0, 125.0, w, h, 4.0);
    const double r = rng.uniform(3.0, 9.0);
    const double shade = rng.uniform(-0.25, 0.15);
    Color c = cv.at(static_cast<int>(pos[0]), static_cast<int>(pos[1]));
    for (auto& k : c) k += shade;
    draw_blob(cv, rng, pos[0], pos[1], r, c, rng.uniform(0.5, 0.9));
  }

  std::vector<double> vessel_cover;
  const Color dark = {0.20, 0.20, 0.20};
  switch (spec.kind) {
    case SceneKind::kNeedle: {
      // Horizontal shaft from the left edge, T crossbar at the tip.
      const double hw = rng.uniform(4.5, 6.0);
      const double tilt = rng.uniform(-0.02, 0.02);
      const double v = 0.22 + rng.uniform(-0.03, 0.03);
      const Color shade = {v, v, v};
      draw_segment(cv, -20.0, av - tilt * (au + 20.0), au - 2.0, av, hw, shade);
      const double bar = rng.uniform(12.0, 15.0);
      draw_segment(cv, au, av - bar, au, av + bar, 2.5, shade);
      break;
    }
    case SceneKind::kLoop: {
      // Probe strip from the top edge ending in a loop centered on the anchor.
      const double radius = rng.uniform(10.0, 12.0);
      const Color probe = {0.45, 0.45, 0.45};
      draw_segment(cv, au, -20.0, au, av - radius - 2.0, rng.uniform(7.0, 8.5), probe);
      draw_ring(cv, au, av, radius, 2.0, {0.28, 0.28, 0.28});
      if (spec.hooked_needle) {
        draw_segment(cv, au + radius * 0.2, av, w + 20.0, av + rng.uniform(-3, 3),
                     rng.uniform(3.0, 4.0), dark);
      }
      break;
    }
    case SceneKind::kCortex: {
      // Vessels avoid a clearance disc around the planned insertion point.
      vessel_cover.assign(static_cast<std::size_t>(w) * h, 0.0);
      const double clearance = 36.0;
      const Color vessel = {0.45, 0.10, 0.12};
      double covered = 0.0;
      for (int attempt = 0; attempt < 60 && covered < spec.vessel_coverage; ++attempt) {
        const auto pts = random_curve(rng, w, h);
        const double hw = rng.uniform(2.0, 5.0);
        if (curve_distance(pts, au, av) < clearance + hw) continue;
        draw_vessel(cv, vessel_cover, pts, hw, vessel);
        covered = 0.0;
        for (double v : vessel_cover) covered += v >= 0.5 ? 1.0 : 0.0;
        covered /= static_cast<double>(vessel_cover.size());
      }
      break;
    }
  }

  // Anomaly injection.
  const auto& an = spec.anomaly;
  if (an.type != AnomalyType::kNone) {
    scene.label = Label::kAnomalous;
    const double m = std::max(an.magnitude, 0.0);
    const bool near = an.location == AnomalyLocation::kNearAnchor;
    const auto pos = near ? place(arng, scene.anchor, 0.0, 8.0, w, h, 2.0)
                          : place(arng, scene.anchor, 90.0, 115.0, w, h, 8.0);
    const double contrast = std::min(0.9, 0.3 + 0.2 * m);
    switch (an.type) {
      case AnomalyType::kBlob: {
        const Color c = color ? Color{0.50, 0.05, 0.08} : Color{0.15, 0.15, 0.15};
        draw_blob(cv, arng, pos[0], pos[1], 3.0 + 3.0 * m, c, contrast + 0.1);
        break;
      }
      case AnomalyType::kMissingStructure: {
        // Paint background over part of the structure at the anchor.
        const double size = 5.0 + 5.0 * m;
        const double cx = near ? au + arng.uniform(-3, 3) : pos[0];
        const double cy = near ? av + (arng.uniform() < 0.5 ? -1 : 1) * size * 0.8 : pos[1];
        for (int y = static_cast<int>(cy - size); y <= static_cast<int>(cy + size); ++y) {
          for (int x = static_cast<int>(cx - size); x <= static_cast<int>(cx + size); ++x) {
            if (x < 0 || y < 0 || x >= w || y >= h) continue;
            const double t = std::clamp(std::max(std::abs(x - cx), std::abs(y - cy)) / size, 0.0, 1.0);
            cv.blend(x, y, base, (1.0 - t * t) * std::min(1.0, contrast + 0.2));
          }
        }
        break;
      }
      case AnomalyType::kExtraVessel: {
        const Color c = color ? Color{0.45, 0.10, 0.12} : dark;
        const double angle = arng.uniform(0, std::numbers::pi);
        const double len = 20.0 + 15.0 * m;
        const double dx = std::cos(angle) * len, dy = std::sin(angle) * len;
        draw_segment(cv, pos[0] - dx, pos[1] - dy, pos[0] + dx, pos[1] + dy, 1.5 + 1.5 * m, c,
                     std::min(1.0, contrast + 0.2));
        break;
      }
      case AnomalyType::kOcclusion: {
        const double half = 4.0 + 4.0 * m;
        const Color c = {0.5, 0.5, 0.5};
        for (int y = static_cast<int>(pos[1] - half); y <= static_cast<int>(pos[1] + half); ++y) {
          for (int x = static_cast<int>(pos[0] - half); x <= static_cast<int>(pos[0] + half); ++x) {
            cv.blend(x, y, c, contrast);
          }
        }
        break;
      }
      case AnomalyType::kNone:
        break;
    }
  }

  // Sensor noise and quantization.
  scene.image = Image(w, h, color ? 3 : 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto& p = cv.at(x, y);
      for (int k = 0; k < scene.image.channels; ++k) {
        const double v = p[k] + spec.noise * nrng.normal();
        scene.image.at(x, y, k) =
            static_cast<std::uint8_t>(std::clamp(std::lround(v * 255.0), 0L, 255L));
      }
    }
  }
  if (spec.kind == SceneKind::kCortex) {
    Image mask(w, h, 1);
    for (std::size_t i = 0; i < vessel_cover.size(); ++i) {
      mask.pixels[i] = vessel_cover[i] >= 0.5 ? 255 : 0;
    }
    scene.vessel_mask = std::move(mask);
  }
  return scene;
}

/// Fraction of vessel pixels in a mask.
inline double mask_coverage(const Image& mask) {
  std::size_t on = 0;
  for (auto p : mask.pixels) on += p >= 128 ? 1 : 0;
  return static_cast<double>(on) / mask.pixels.size();
}

struct DatasetCounts {
  int normal = 0;
  int anomalous = 0;
};

struct DatasetOptions {
  std::string checkpoint;        // manifest checkpoint field; defaults to the kind
  bool hooked_needle = false;
  double near_fraction = 0.8;    // share of anomalies placed at the anchor
  double magnitude_lo = 0.6;
  double magnitude_hi = 1.4;
  std::string prefix = "scene";
};

/// Anomaly types that make sense for a scene kind.
inline std::vector<AnomalyType> anomaly_types(SceneKind kind) {
  if (kind == SceneKind::kCortex) {
    return {AnomalyType::kBlob, AnomalyType::kExtraVessel, AnomalyType::kOcclusion};
  }
  return {AnomalyType::kBlob, AnomalyType::kMissingStructure, AnomalyType::kExtraVessel,
          AnomalyType::kOcclusion};
}

/// Scene family used for a checkpoint's synthetic data: needle scenes for
/// "needle", loop scenes for "fme", loops with a threaded needle for "hook"
/// and vessel fields for "cortex".
inline std::pair<SceneKind, DatasetOptions> scenes_for_checkpoint(const std::string& checkpoint) {
  DatasetOptions opt;
  opt.checkpoint = checkpoint;
  if (checkpoint == "needle") return {SceneKind::kNeedle, opt};
  if (checkpoint == "fme") return {SceneKind::kLoop, opt};
  if (checkpoint == "hook") {
    opt.hooked_needle = true;
    return {SceneKind::kLoop, opt};
  }
  if (checkpoint == "cortex") return {SceneKind::kCortex, opt};
  throw config_error("no synthetic scene family for checkpoint '" + checkpoint + "'");
}

/// Per-item scene specs of a dataset; normals first, then anomalies.
inline std::vector<SceneSpec> dataset_specs(DatasetCounts counts, SceneKind kind,
                                            std::uint64_t master_seed,
                                            const DatasetOptions& opt = {}) {
  if (counts.normal < 0 || counts.anomalous < 0) throw invalid_argument("counts must be >= 0");
  std::vector<SceneSpec> specs;
  Rng rng(mix_seed(master_seed, 7));
  const auto types = anomaly_types(kind);
  const int total = counts.normal + counts.anomalous;
  for (int i = 0; i < total; ++i) {
    SceneSpec s;
    s.kind = kind;
    s.seed = mix_seed(master_seed, 100 + static_cast<std::uint64_t>(i));
    s.hooked_needle = opt.hooked_needle;
    const double loc = rng.uniform();
    const double mag = rng.uniform(opt.magnitude_lo, opt.magnitude_hi);
    if (i >= counts.normal) {
      s.anomaly.type = types[static_cast<std::size_t>(i - counts.normal) % types.size()];
      s.anomaly.location =
          loc < opt.near_fraction ? AnomalyLocation::kNearAnchor : AnomalyLocation::kFarFromAnchor;
      s.anomaly.magnitude = mag;
    }
    specs.push_back(s);
  }
  return specs;
}

/// Writes images (PGM/PPM), cortex vessel masks and "manifest.json" into
/// `out_dir`. Returns the manifest entries.
inline std::vector<ManifestEntry> gen_dataset(DatasetCounts counts, SceneKind kind,
                                              std::uint64_t master_seed,
                                              const std::filesystem::path& out_dir,
                                              const DatasetOptions& opt = {}) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) {
    throw io_error("cannot create output directory '" + out_dir.string() + "'");
  }
  const std::string checkpoint = opt.checkpoint.empty() ? kind_name(kind) : opt.checkpoint;
  std::vector<ManifestEntry> entries;
  const auto specs = dataset_specs(counts, kind, master_seed, opt);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const Scene scene = gen_scene(specs[i]);
    char name[64];
    std::snprintf(name, sizeof(name), "%s_%04zu", opt.prefix.c_str(), i);
    const std::string image_name = std::string(name) + (scene.image.channels == 3 ? ".ppm" : ".pgm");
    write_pnm(scene.image, out_dir / image_name);
    ManifestEntry e;
    e.path = image_name;
    e.kind = EntryKind::kImage;
    e.label = scene.label;
    e.checkpoint = checkpoint;
    e.anchor_px = scene.anchor;
    if (scene.vessel_mask) {
      const std::string mask_name = std::string(name) + "_vessels.pgm";
      write_pnm(*scene.vessel_mask, out_dir / mask_name);
      e.vessel_mask_path = mask_name;
    }
    entries.push_back(std::move(e));
  }
  write_manifest(entries, out_dir / "manifest.json");
  return entries;
}

}  // namespace microvad::synth

#endif  // MICROVAD_SYNTH_HPP_
