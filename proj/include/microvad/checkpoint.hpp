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

#ifndef MICROVAD_CHECKPOINT_HPP_
#define MICROVAD_CHECKPOINT_HPP_

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "microvad/channel_select.hpp"
#include "microvad/error.hpp"
#include "microvad/io_util.hpp"
#include "microvad/pgs.hpp"

namespace microvad {

enum class Flip { kVertical, kHorizontal, kBoth };

inline std::string flip_name(Flip f) {
  switch (f) {
    case Flip::kVertical: return "vertical";
    case Flip::kHorizontal: return "horizontal";
    case Flip::kBoth: return "both";
  }
  return "?";
}

inline Flip parse_flip(const std::string& s) {
  if (s == "vertical") return Flip::kVertical;
  if (s == "horizontal") return Flip::kHorizontal;
  if (s == "both") return Flip::kBoth;
  throw config_error("unknown flip '" + s + "' (expected vertical, horizontal or both)");
}

/// Pixel offset (du, dv) from the anchor to the ROI center.
struct PixelOffset {
  int du = 0;
  int dv = 0;
  friend bool operator==(const PixelOffset&, const PixelOffset&) = default;
};

/// Everything that configures detection at one checkpoint.
struct CheckpointConfig {
  std::string name;
  PixelOffset anchor_offset;
  std::vector<Flip> flips;  // canonical order, no duplicates
  GranularityParams granularity;
  double epsilon = 0.01;
  double channel_fraction = 0.5;
  SnrMode snr_mode = SnrMode::kGeneric;
  std::string backend = "filterbank";
  int roi_px = 256;

  void validate() const {
    if (name.empty()) throw config_error("checkpoint name must not be empty");
    try {
      granularity.validate();
    } catch (const Error& e) {
      throw config_error("checkpoint '" + name + "': " + e.what());
    }
    if (!(epsilon > 0.0)) throw config_error("checkpoint '" + name + "': epsilon must be > 0");
    if (!(channel_fraction > 0.0 && channel_fraction <= 1.0)) {
      throw config_error("checkpoint '" + name + "': channel_fraction must be in (0, 1]");
    }
    if (roi_px < 2) throw config_error("checkpoint '" + name + "': roi_px must be >= 2");
    for (std::size_t i = 1; i < flips.size(); ++i) {
      if (flips[i] <= flips[i - 1]) {
        throw config_error("checkpoint '" + name + "': flips must be distinct");
      }
    }
  }

  friend bool operator==(const CheckpointConfig&, const CheckpointConfig&) = default;
};

inline nlohmann::json checkpoint_to_json(const CheckpointConfig& cfg) {
  nlohmann::json flips = nlohmann::json::array();
  for (Flip f : cfg.flips) flips.push_back(flip_name(f));
  return {{"name", cfg.name},
          {"anchor_offset_px", {cfg.anchor_offset.du, cfg.anchor_offset.dv}},
          {"flips", flips},
          {"lambda", cfg.granularity.lambda},
          {"a0", cfg.granularity.a0},
          {"a1", cfg.granularity.a1},
          {"epsilon", cfg.epsilon},
          {"channel_fraction", cfg.channel_fraction},
          {"snr_mode", snr_mode_name(cfg.snr_mode)},
          {"backend", cfg.backend},
          {"roi_px", cfg.roi_px}};
}

inline CheckpointConfig checkpoint_from_json(const nlohmann::json& j) {
  CheckpointConfig cfg;
  try {
    cfg.name = j.at("name").get<std::string>();
    if (j.contains("anchor_offset_px")) {
      cfg.anchor_offset = {j["anchor_offset_px"].at(0).get<int>(),
                           j["anchor_offset_px"].at(1).get<int>()};
    }
    for (const auto& f : j.value("flips", nlohmann::json::array())) {
      cfg.flips.push_back(parse_flip(f.get<std::string>()));
    }
    std::sort(cfg.flips.begin(), cfg.flips.end());
    cfg.granularity.lambda = j.at("lambda").get<double>();
    cfg.granularity.a0 = j.at("a0").get<int>();
    cfg.granularity.a1 = j.at("a1").get<int>();
    cfg.epsilon = j.value("epsilon", 0.01);
    cfg.channel_fraction = j.value("channel_fraction", 0.5);
    cfg.snr_mode = parse_snr_mode(j.value("snr_mode", std::string("generic")));
    cfg.backend = j.value("backend", std::string("filterbank"));
    cfg.roi_px = j.value("roi_px", 256);
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("bad checkpoint config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

/// Defaults for the four monitored checkpoints.
inline std::vector<CheckpointConfig> default_checkpoints() {
  CheckpointConfig needle;
  needle.name = "needle";
  needle.flips = {Flip::kVertical};
  needle.granularity = {6.0, 0, 2};

  CheckpointConfig fme = needle;
  fme.name = "fme";
  fme.flips = {Flip::kHorizontal};

  CheckpointConfig hook = needle;
  hook.name = "hook";
  hook.flips = {};

  CheckpointConfig cortex = needle;
  cortex.name = "cortex";
  cortex.flips = {Flip::kVertical, Flip::kHorizontal, Flip::kBoth};
  cortex.granularity = {3.0, 1, 3};
  cortex.snr_mode = SnrMode::kVessel;

  return {needle, fme, hook, cortex};
}

inline nlohmann::json checkpoints_to_json(const std::vector<CheckpointConfig>& cfgs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : cfgs) arr.push_back(checkpoint_to_json(c));
  return {{"checkpoints", arr}};
}

inline std::vector<CheckpointConfig> load_checkpoints(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw config_error("cannot parse '" + path.string() + "': " + e.what());
  }
  if (!j.contains("checkpoints") || !j["checkpoints"].is_array()) {
    throw config_error("'" + path.string() + "' has no \"checkpoints\" array");
  }
  std::vector<CheckpointConfig> out;
  for (const auto& c : j["checkpoints"]) out.push_back(checkpoint_from_json(c));
  return out;
}

inline const CheckpointConfig& find_checkpoint(const std::vector<CheckpointConfig>& cfgs,
                                               const std::string& name) {
  for (const auto& c : cfgs) {
    if (c.name == name) return c;
  }
  throw config_error("no checkpoint named '" + name + "'");
}

}  // namespace microvad

#endif  // MICROVAD_CHECKPOINT_HPP_
