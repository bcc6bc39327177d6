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

#ifndef MICROVAD_IMAGE_HPP_
#define MICROVAD_IMAGE_HPP_

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "microvad/error.hpp"
#include "microvad/io_util.hpp"

namespace microvad {

/// 8-bit image, 1 (gray) or 3 (RGB) interleaved channels, row-major.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, int c, std::uint8_t fill = 0)
      : width(w), height(h), channels(c),
        pixels(static_cast<std::size_t>(w) * h * c, fill) {
    if (w <= 0 || h <= 0 || (c != 1 && c != 3)) {
      throw invalid_argument("bad image shape " + std::to_string(w) + "x" +
                             std::to_string(h) + "x" + std::to_string(c));
    }
  }

  std::uint8_t& at(int x, int y, int c = 0) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int x, int y, int c = 0) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Float image, same layout as Image; values are intensities in [0, 1].
struct FloatImage {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<float> values;

  float at(int x, int y, int c = 0) const {
    return values[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

// --- PNM (binary P5/P6, maxval 255) ---------------------------------------

inline Image decode_pnm(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  auto fail = [&](const std::string& msg) -> FormatError { return FormatError(msg, pos); };
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> int {
    skip_space();
    long value = 0;
    const std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(bytes[pos]) && pos - start < 9) {
      value = value * 10 + (bytes[pos] - '0');
      ++pos;
    }
    if (pos == start) throw fail("expected integer in PNM header");
    return static_cast<int>(value);
  };

  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw fail("not a binary PGM/PPM (expected P5 or P6)");
  }
  const int channels = bytes[1] == '5' ? 1 : 3;
  pos = 2;
  const int w = read_int();
  const int h = read_int();
  const int maxval = read_int();
  if (w <= 0 || h <= 0) throw fail("PNM dims must be positive");
  if (maxval != 255) throw fail("only maxval 255 is supported");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw fail("missing header terminator");
  ++pos;
  const std::size_t need = static_cast<std::size_t>(w) * h * channels;
  if (bytes.size() - pos < need) throw fail("truncated PNM payload");
  Image img(w, h, channels);
  std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(pos), need, img.pixels.begin());
  return img;
}

inline std::string encode_pnm(const Image& img) {
  std::string out = (img.channels == 1 ? "P5\n" : "P6\n") + std::to_string(img.width) +
                    " " + std::to_string(img.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
  return out;
}

inline Image read_pnm(const std::filesystem::path& path) {
  return decode_pnm(io::read_file(path));
}

inline void write_pnm(const Image& img, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_pnm(img));
}

// --- geometry ----------------------------------------------------------------

inline Image crop(const Image& img, int left, int top, int w, int h) {
  if (left < 0 || top < 0 || left + w > img.width || top + h > img.height) {
    throw invalid_argument("crop rectangle outside image");
  }
  Image out(w, h, img.channels);
  const std::size_t row = static_cast<std::size_t>(w) * img.channels;
  for (int y = 0; y < h; ++y) {
    const auto* src = &img.pixels[(static_cast<std::size_t>(top + y) * img.width + left) *
                                  img.channels];
    std::copy_n(src, row, &out.pixels[static_cast<std::size_t>(y) * row]);
  }
  return out;
}

/// Mirror top-bottom (rows reversed).
inline Image flip_vertical(const Image& img) {
  Image out = img;
  const std::size_t row = static_cast<std::size_t>(img.width) * img.channels;
  for (int y = 0; y < img.height; ++y) {
    std::copy_n(&img.pixels[static_cast<std::size_t>(img.height - 1 - y) * row], row,
                &out.pixels[static_cast<std::size_t>(y) * row]);
  }
  return out;
}

/// Mirror left-right (columns reversed).
inline Image flip_horizontal(const Image& img) {
  Image out = img;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        out.at(x, y, c) = img.at(img.width - 1 - x, y, c);
      }
    }
  }
  return out;
}

inline FloatImage to_float(const Image& img) {
  FloatImage out{img.width, img.height, img.channels, {}};
  out.values.resize(img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    out.values[i] = static_cast<float>(img.pixels[i]) / 255.0f;
  }
  return out;
}

/// Bilinear resize with corner-aligned sampling: output pixel k samples the
/// source at k * (src - 1) / (dst - 1), so both corner pixels map exactly.
inline FloatImage resize_bilinear(const Image& img, int out_w, int out_h) {
  if (out_w <= 0 || out_h <= 0) throw invalid_argument("resize target must be positive");
  FloatImage out{out_w, out_h, img.channels, {}};
  out.values.resize(static_cast<std::size_t>(out_w) * out_h * img.channels);
  const double sx = out_w > 1 ? static_cast<double>(img.width - 1) / (out_w - 1) : 0.0;
  const double sy = out_h > 1 ? static_cast<double>(img.height - 1) / (out_h - 1) : 0.0;
  for (int y = 0; y < out_h; ++y) {
    const double fy = y * sy;
    const int y0 = std::min(static_cast<int>(fy), img.height - 1);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double fx = x * sx;
      const int x0 = std::min(static_cast<int>(fx), img.width - 1);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < img.channels; ++c) {
        const double top = (1.0 - wx) * img.at(x0, y0, c) + wx * img.at(x1, y0, c);
        const double bottom = (1.0 - wx) * img.at(x0, y1, c) + wx * img.at(x1, y1, c);
        out.values[(static_cast<std::size_t>(y) * out_w + x) * img.channels + c] =
            static_cast<float>(((1.0 - wy) * top + wy * bottom) / 255.0);
      }
    }
  }
  return out;
}

/// Nearest-neighbour resize with the same corner-aligned sampling.
inline Image resize_nearest(const Image& img, int out_w, int out_h) {
  Image out(out_w, out_h, img.channels);
  const double sx = out_w > 1 ? static_cast<double>(img.width - 1) / (out_w - 1) : 0.0;
  const double sy = out_h > 1 ? static_cast<double>(img.height - 1) / (out_h - 1) : 0.0;
  for (int y = 0; y < out_h; ++y) {
    const int sy_i = std::min(static_cast<int>(std::lround(y * sy)), img.height - 1);
    for (int x = 0; x < out_w; ++x) {
      const int sx_i = std::min(static_cast<int>(std::lround(x * sx)), img.width - 1);
      for (int c = 0; c < img.channels; ++c) out.at(x, y, c) = img.at(sx_i, sy_i, c);
    }
  }
  return out;
}

}  // namespace microvad

#endif  // MICROVAD_IMAGE_HPP_
