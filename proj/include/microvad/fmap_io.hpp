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

#ifndef MICROVAD_FMAP_IO_HPP_
#define MICROVAD_FMAP_IO_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "microvad/error.hpp"
#include "microvad/feature_map.hpp"
#include "microvad/io_util.hpp"

// FMAP layout: "FMAP1\n", u32 H, u32 W, u32 C, then H*W*C f32, all
// little-endian, row-major (y, x, c). Provenance goes to a JSON sidecar.

namespace microvad {

inline constexpr std::string_view kFmapMagic = "FMAP1\n";

inline std::string encode_fmap(const FeatureMap& map) {
  std::string out;
  out.reserve(kFmapMagic.size() + 12 + map.data().size() * sizeof(float));
  out.append(kFmapMagic);
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(map.height()));
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(map.width()));
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(map.channels()));
  out.append(reinterpret_cast<const char*>(map.data().data()),
             map.data().size() * sizeof(float));
  return out;
}

inline FeatureMap decode_fmap(const std::vector<std::uint8_t>& bytes) {
  io::Reader reader(bytes);
  if (reader.remaining() < kFmapMagic.size() ||
      reader.take(kFmapMagic.size(), "magic") != kFmapMagic) {
    throw FormatError("bad FMAP magic", 0);
  }
  const auto h = reader.get<std::uint32_t>("header");
  const auto w = reader.get<std::uint32_t>("header");
  const auto c = reader.get<std::uint32_t>("header");
  if (h == 0 || w == 0 || c == 0 || h > (1u << 20) || w > (1u << 20) || c > (1u << 20)) {
    throw FormatError("implausible FMAP dims " + FeatureMap::dims_string(h, w, c),
                      kFmapMagic.size());
  }
  const std::uint64_t count = static_cast<std::uint64_t>(h) * w * c;
  const std::uint64_t payload = count * sizeof(float);
  if (reader.remaining() != payload) {
    throw FormatError("declared " + FeatureMap::dims_string(h, w, c) + " needs " +
                          std::to_string(count) + " floats but payload holds " +
                          std::to_string(reader.remaining() / sizeof(float)) +
                          (reader.remaining() % sizeof(float) ? " and a partial value" : ""),
                      reader.offset() + std::min<std::uint64_t>(payload, reader.remaining()));
  }
  std::vector<float> data(count);
  const auto raw = reader.take(payload, "payload");
  std::memcpy(data.data(), raw.data(), payload);
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw FormatError("non-finite value in payload",
                        kFmapMagic.size() + 12 + i * sizeof(float));
    }
  }
  return FeatureMap(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c),
                    std::move(data));
}

inline nlohmann::json meta_to_json(const FeatureMapMeta& meta) {
  return {{"source_size_px", {meta.source_width_px, meta.source_height_px}},
          {"patch_px", meta.patch_px},
          {"stride_px", meta.stride_px},
          {"checkpoint", meta.checkpoint},
          {"backend", meta.backend}};
}

inline FeatureMapMeta meta_from_json(const nlohmann::json& j) {
  FeatureMapMeta meta;
  if (j.contains("source_size_px")) {
    meta.source_width_px = j.at("source_size_px").at(0).get<int>();
    meta.source_height_px = j.at("source_size_px").at(1).get<int>();
  }
  meta.patch_px = j.value("patch_px", 0);
  meta.stride_px = j.value("stride_px", 0);
  meta.checkpoint = j.value("checkpoint", std::string());
  meta.backend = j.value("backend", std::string());
  return meta;
}

/// "<dir>/<stem>.meta.json" next to an FMAP file.
inline std::filesystem::path fmap_sidecar_path(const std::filesystem::path& path) {
  auto sidecar = path;
  sidecar.replace_extension(".meta.json");
  return sidecar;
}

inline void write_fmap(const FeatureMap& map, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_fmap(map));
  if (map.meta()) {
    io::write_file_atomic(fmap_sidecar_path(path), meta_to_json(*map.meta()).dump(2) + "\n");
  }
}

inline FeatureMap read_fmap(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw io_error("feature map '" + path.string() + "' does not exist");
  }
  auto map = decode_fmap(io::read_file(path));
  const auto sidecar = fmap_sidecar_path(path);
  if (std::filesystem::exists(sidecar)) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(io::read_text(sidecar));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("bad sidecar '" + sidecar.string() + "': " + e.what(), 0);
    }
    std::vector<float> data(map.data().begin(), map.data().end());
    return FeatureMap(map.height(), map.width(), map.channels(), std::move(data),
                      meta_from_json(j));
  }
  return map;
}

}  // namespace microvad

#endif  // MICROVAD_FMAP_IO_HPP_
