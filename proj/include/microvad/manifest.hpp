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

#ifndef MICROVAD_MANIFEST_HPP_
#define MICROVAD_MANIFEST_HPP_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "microvad/error.hpp"
#include "microvad/io_util.hpp"
#include "microvad/roi.hpp"

namespace microvad {

enum class EntryKind { kImage, kFmap };
enum class Label { kNormal, kAnomalous, kUnlabeled };

inline std::string label_name(Label l) {
  switch (l) {
    case Label::kNormal: return "normal";
    case Label::kAnomalous: return "anomalous";
    case Label::kUnlabeled: return "unlabeled";
  }
  return "?";
}

inline Label parse_label(const std::string& s) {
  if (s == "normal") return Label::kNormal;
  if (s == "anomalous") return Label::kAnomalous;
  if (s == "unlabeled") return Label::kUnlabeled;
  throw config_error("unknown label '" + s + "'");
}

/// One dataset item. Paths are stored as written and resolved against the
/// manifest's directory.
struct ManifestEntry {
  std::string path;
  EntryKind kind = EntryKind::kImage;
  Label label = Label::kUnlabeled;
  std::string checkpoint;
  PixelPoint anchor_px;
  std::optional<std::string> vessel_mask_path;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct Manifest {
  std::vector<ManifestEntry> entries;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& p) const {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  }
};

inline nlohmann::json manifest_to_json(const std::vector<ManifestEntry>& entries) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : entries) {
    nlohmann::json j = {{"path", e.path},
                        {"kind", e.kind == EntryKind::kImage ? "image" : "fmap"},
                        {"label", label_name(e.label)},
                        {"checkpoint", e.checkpoint},
                        {"anchor_px", {e.anchor_px.u, e.anchor_px.v}}};
    if (e.vessel_mask_path) j["vessel_mask_path"] = *e.vessel_mask_path;
    arr.push_back(std::move(j));
  }
  return arr;
}

inline Manifest manifest_from_json(const nlohmann::json& arr, std::filesystem::path base_dir) {
  if (!arr.is_array()) throw config_error("manifest must be a JSON array");
  Manifest m{{}, std::move(base_dir)};
  try {
    for (const auto& j : arr) {
      ManifestEntry e;
      e.path = j.at("path").get<std::string>();
      const auto kind = j.at("kind").get<std::string>();
      if (kind == "image") {
        e.kind = EntryKind::kImage;
      } else if (kind == "fmap") {
        e.kind = EntryKind::kFmap;
      } else {
        throw config_error("unknown entry kind '" + kind + "'");
      }
      e.label = parse_label(j.value("label", std::string("unlabeled")));
      e.checkpoint = j.at("checkpoint").get<std::string>();
      if (j.contains("anchor_px")) {
        e.anchor_px = {j["anchor_px"].at(0).get<double>(), j["anchor_px"].at(1).get<double>()};
      }
      if (j.contains("vessel_mask_path") && !j["vessel_mask_path"].is_null()) {
        e.vessel_mask_path = j["vessel_mask_path"].get<std::string>();
      }
      m.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("bad manifest entry: ") + e.what());
  }
  return m;
}

inline Manifest read_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw io_error("manifest '" + path.string() + "' does not exist");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw config_error("cannot parse manifest '" + path.string() + "': " + e.what());
  }
  return manifest_from_json(j, path.parent_path());
}

inline void write_manifest(const std::vector<ManifestEntry>& entries,
                           const std::filesystem::path& path) {
  io::write_file_atomic(path, manifest_to_json(entries).dump(2) + "\n");
}

}  // namespace microvad

#endif  // MICROVAD_MANIFEST_HPP_
