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

// microvad command-line tool. Every command prints one JSON document on
// stdout. Exit codes: 0 ok, 1 anomalous (check), 2 usage, 3 data or format
// error, 4 insufficient data.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "microvad/microvad.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace microvad::cli {
namespace {

constexpr int kExitOk = 0;
constexpr int kExitAnomalous = 1;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitInsufficient = 4;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::string checkpoint;
  std::string backend;
  std::string bank;
  std::string mask;
  std::string manifest;
  std::string out;
  std::optional<double> tau;
  std::string heatmap;
  std::uint64_t seed = 0;
  std::optional<double> fraction;
  bool bottom = false;
  bool augment = false;
  bool set_threshold = false;
  std::string input;
  std::string anchor;
  int normal = 8;
  int anomalous = 0;
};

void print(const json& j) { std::cout << j.dump(2) << "\n"; }

std::vector<CheckpointConfig> checkpoints(const Options& o) {
  return o.config.empty() ? default_checkpoints() : load_checkpoints(o.config);
}

// Checkpoint from --checkpoint, falling back to the manifest's entries.
CheckpointConfig resolve_checkpoint(const Options& o, const Manifest* manifest = nullptr) {
  std::string name = o.checkpoint;
  if (name.empty() && manifest && !manifest->entries.empty()) {
    name = manifest->entries.front().checkpoint;
  }
  if (name.empty()) throw UsageError("--checkpoint is required");
  const auto all = checkpoints(o);
  for (const auto& c : all) {
    if (c.name == name) return c;
  }
  throw UsageError("unknown checkpoint '" + name + "'");
}

std::unique_ptr<FeatureBackend> resolve_backend(const Options& o, const CheckpointConfig& cfg) {
  const std::string id = o.backend.empty() ? cfg.backend : o.backend;
  for (const auto& known : backend_ids()) {
    if (known == id) return make_backend(id);
  }
  throw UsageError("unknown backend '" + id + "'");
}

Manifest require_manifest(const Options& o) {
  if (o.manifest.empty()) throw UsageError("--manifest is required");
  return read_manifest(o.manifest);
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string(flag) + " is required");
}

PixelPoint parse_anchor(const std::string& s, const Image& raw) {
  if (s.empty()) return {raw.width / 2.0, raw.height / 2.0};
  double u = 0, v = 0;
  char tail = 0;
  if (std::sscanf(s.c_str(), "%lf,%lf%c", &u, &v, &tail) != 2) {
    throw UsageError("--anchor must be 'u,v', got '" + s + "'");
  }
  return {u, v};
}

bool is_fmap(const std::string& path) { return fs::path(path).extension() == ".fmap"; }

// Single input for score/check: an FMAP, or an image cropped at --anchor.
struct Query {
  FeatureMap map;
  Image roi;
};

Query load_query(const Options& o, const CheckpointConfig& cfg, const FeatureBackend& backend) {
  require(o.input, "input");
  if (is_fmap(o.input)) {
    return {load_precomputed(o.input, backend), Image(cfg.roi_px, cfg.roi_px, 1, 128)};
  }
  const Image raw = read_pnm(o.input);
  const auto roi = extract_roi(raw, parse_anchor(o.anchor, raw), cfg.anchor_offset, cfg.roi_px,
                               o.input);
  return {featurize(roi, backend), roi.pixels};
}

// --- commands -----------------------------------------------------------------

int cmd_roi(const Options& o) {
  const auto manifest = require_manifest(o);
  const auto cfg = resolve_checkpoint(o, &manifest);
  require(o.out, "--out");
  fs::create_directories(o.out);
  std::vector<ManifestEntry> out;
  for (const auto& e : manifest.entries) {
    if (e.kind != EntryKind::kImage) throw invalid_argument("'" + e.path + "' is not an image");
    const Image raw = read_pnm(manifest.resolve(e.path));
    const auto roi = extract_roi(raw, e.anchor_px, cfg.anchor_offset, cfg.roi_px, e.path);
    const auto stem = fs::path(e.path).stem().string();
    ManifestEntry r = e;
    r.path = stem + "_roi" + fs::path(e.path).extension().string();
    r.anchor_px = roi.anchor_px;
    write_pnm(roi.pixels, fs::path(o.out) / r.path);
    if (e.vessel_mask_path) {
      r.vessel_mask_path = stem + "_roi_vessels.pgm";
      write_pnm(crop_like(roi, read_pnm(manifest.resolve(*e.vessel_mask_path))),
                fs::path(o.out) / *r.vessel_mask_path);
    }
    out.push_back(std::move(r));
  }
  write_manifest(out, fs::path(o.out) / "manifest.json");
  print({{"command", "roi"}, {"count", out.size()},
         {"manifest", (fs::path(o.out) / "manifest.json").string()}});
  return kExitOk;
}

int cmd_featurize(const Options& o) {
  const auto manifest = require_manifest(o);
  const auto cfg = resolve_checkpoint(o, &manifest);
  const auto backend = resolve_backend(o, cfg);
  require(o.out, "--out");
  fs::create_directories(o.out);
  std::vector<ManifestEntry> out;
  for (const auto& e : manifest.entries) {
    if (e.kind != EntryKind::kImage) throw invalid_argument("'" + e.path + "' is not an image");
    // Flips only multiply normal entries; they are training data.
    const bool augment = o.augment && e.label == Label::kNormal;
    const Image raw = read_pnm(manifest.resolve(e.path));
    const auto roi = extract_roi(raw, e.anchor_px, cfg.anchor_offset, cfg.roi_px, e.path);
    std::optional<Image> roi_mask;
    if (e.vessel_mask_path) roi_mask = crop_like(roi, read_pnm(manifest.resolve(*e.vessel_mask_path)));
    const std::vector<Flip> none;
    const auto& flips = augment ? cfg.flips : none;
    const auto rois = augment_flips(roi, flips);
    const auto stem = fs::path(e.path).stem().string();
    for (std::size_t i = 0; i < rois.size(); ++i) {
      const std::string name = stem + (i == 0 ? "" : "_" + flip_name(flips[i - 1]));
      auto map = featurize(rois[i], *backend);
      FeatureMapMeta meta = map.meta().value_or(FeatureMapMeta{});
      meta.checkpoint = cfg.name;
      write_fmap(FeatureMap(map.height(), map.width(), map.channels(),
                            std::vector<float>(map.data().begin(), map.data().end()), meta),
                 fs::path(o.out) / (name + ".fmap"));
      ManifestEntry f = e;
      f.kind = EntryKind::kFmap;
      f.path = name + ".fmap";
      f.anchor_px = rois[i].anchor_px;
      f.vessel_mask_path.reset();
      if (roi_mask) {
        f.vessel_mask_path = name + "_vessels.pgm";
        write_pnm(i == 0 ? *roi_mask : apply_flip(*roi_mask, flips[i - 1]),
                  fs::path(o.out) / *f.vessel_mask_path);
      }
      out.push_back(std::move(f));
    }
  }
  write_manifest(out, fs::path(o.out) / "manifest.json");
  print({{"command", "featurize"}, {"backend", backend->id()}, {"count", out.size()},
         {"manifest", (fs::path(o.out) / "manifest.json").string()}});
  return kExitOk;
}

ChannelMask learn_mask(const Options& o, const std::vector<FeaturizedSample>& samples,
                       const CheckpointConfig& cfg) {
  return learn_channel_mask(samples, cfg, o.fraction.value_or(cfg.channel_fraction), o.bottom);
}

int cmd_select_channels(const Options& o) {
  const auto manifest = require_manifest(o);
  const auto cfg = resolve_checkpoint(o, &manifest);
  const auto backend = resolve_backend(o, cfg);
  require(o.out, "--out");
  const auto samples = training_samples(manifest, cfg, *backend);
  const auto mask = learn_mask(o, samples, cfg);
  write_mask(mask, o.out);
  print({{"command", "select-channels"}, {"mode", snr_mode_name(mask.mode)},
         {"kept", mask.kept}, {"samples", mask.sample_count}, {"out", o.out}});
  return kExitOk;
}

int cmd_fit(const Options& o) {
  const auto manifest = require_manifest(o);
  const auto cfg = resolve_checkpoint(o, &manifest);
  const auto backend = resolve_backend(o, cfg);
  require(o.out, "--out");
  const auto samples = training_samples(manifest, cfg, *backend);
  if (samples.size() < 2) {
    throw insufficient_data("fitting needs at least 2 normal samples, got " +
                            std::to_string(samples.size()));
  }
  const auto mask = o.mask.empty() ? learn_mask(o, samples, cfg) : read_mask(o.mask);
  auto bank = fit_bank(samples, cfg, *backend, mask);
  if (o.tau) bank = set_threshold(std::move(bank), *o.tau);
  save_bank(bank, o.out);
  json j = {{"command", "fit"},           {"checkpoint", cfg.name},
            {"samples", bank.sample_count}, {"locations", bank.locations()},
            {"channels", bank.dim},        {"geometry_hash", hash_hex(bank.geometry.hash())},
            {"out", o.out}};
  if (bank.threshold) j["threshold"] = *bank.threshold;
  print(j);
  return kExitOk;
}

json score_json(const ScoreResult& r, const NormalityBank& bank) {
  const auto& w = bank.geometry.windows[r.argmax];
  return {{"score", r.score},
          {"argmax", {{"location", r.argmax}, {"g", w.g()}, {"center", {w.center.x, w.center.y}}}}};
}

int cmd_score(const Options& o) {
  require(o.bank, "--bank");
  const auto bank = load_bank(o.bank);
  const auto backend = resolve_backend(o, bank.config);
  const auto q = load_query(o, bank.config, *backend);
  const auto r = score_map(bank, q.map);
  json j = score_json(r, bank);
  j["command"] = "score";
  j["input"] = o.input;
  if (!o.heatmap.empty()) {
    const double tau = o.tau.value_or(bank.threshold.value_or(r.score));
    const auto h = render_heatmap(r, bank.geometry, q.roi, tau, fs::path(o.heatmap));
    j["heatmap"] = {{"path", o.heatmap}, {"markers", h.markers.size()}, {"tau", tau}};
  }
  print(j);
  return kExitOk;
}

int cmd_check(const Options& o) {
  require(o.bank, "--bank");
  const auto bank = load_bank(o.bank);
  const auto tau = o.tau ? o.tau : bank.threshold;
  if (!tau) throw config_error("bank has no threshold; pass --tau or run eval --set-threshold");
  const auto backend = resolve_backend(o, bank.config);
  const auto q = load_query(o, bank.config, *backend);
  const auto r = score_map(bank, q.map);
  const bool anomalous = is_anomalous(r.score, *tau);
  json j = score_json(r, bank);
  j["command"] = "check";
  j["input"] = o.input;
  j["tau"] = *tau;
  j["verdict"] = anomalous ? "anomalous" : "normal";
  print(j);
  return anomalous ? kExitAnomalous : kExitOk;
}

int cmd_eval(const Options& o) {
  require(o.bank, "--bank");
  const auto manifest = require_manifest(o);
  auto bank = load_bank(o.bank);
  const auto backend = resolve_backend(o, bank.config);
  auto report = evaluate_manifest(bank, manifest, *backend);
  json j = report_to_json(report);
  j["command"] = "eval";
  j["checkpoint"] = bank.config.name;
  if (o.set_threshold) {
    double tau = 0.0;
    if (o.tau) {
      tau = *o.tau;
    } else {
      std::vector<LabeledScore> scored;
      for (const auto& it : report.items) {
        if (it.score) scored.push_back({*it.score, it.label == Label::kAnomalous, it.id});
      }
      tau = deployable_threshold(scored, report.metrics->tau_star);
    }
    bank = set_threshold(std::move(bank), tau);
    save_bank(bank, o.bank);
    j["threshold_written"] = tau;
  }
  if (!o.out.empty()) io::write_file_atomic(o.out, j.dump(2) + "\n");
  print(j);
  return kExitOk;
}

int cmd_synth(const Options& o) {
  require(o.out, "--out");
  if (o.checkpoint.empty()) throw UsageError("--checkpoint is required");
  auto [kind, opt] = synth::scenes_for_checkpoint(o.checkpoint);
  const auto entries = synth::gen_dataset({o.normal, o.anomalous}, kind, o.seed, o.out, opt);
  print({{"command", "synth"}, {"kind", synth::kind_name(kind)}, {"count", entries.size()},
         {"seed", o.seed}, {"manifest", (fs::path(o.out) / "manifest.json").string()}});
  return kExitOk;
}

int cmd_dump_geometry(const Options& o) {
  const auto cfg = resolve_checkpoint(o);
  const auto backend = resolve_backend(o, cfg);
  const auto geo = checkpoint_geometry(cfg, *backend);
  const auto cov = coverage(geo);
  json j = geometry_to_json(geo);
  j["checkpoint"] = cfg.name;
  j["coverage"] = {{"uncovered", cov.uncovered}, {"multiply_covered", cov.multiply_covered}};
  if (!o.out.empty()) io::write_file_atomic(o.out, j.dump(2) + "\n");
  print(j);
  return kExitOk;
}

int exit_code(ErrorKind kind) {
  return kind == ErrorKind::kInsufficientData ? kExitInsufficient : kExitData;
}

void print_error(std::string_view kind, const std::string& message) {
  print({{"error", {{"kind", kind}, {"message", message}}}});
}

}  // namespace
}  // namespace microvad::cli

int main(int argc, char** argv) {
  using namespace microvad::cli;
  Options o;
  CLI::App app{"microvad: anchor-aligned visual anomaly detection"};
  app.require_subcommand(1);
  app.add_option("--config", o.config, "checkpoint config JSON")->check(CLI::ExistingFile);
  app.add_option("--checkpoint", o.checkpoint, "checkpoint name");
  app.add_option("--backend", o.backend, "feature backend id");

  auto* roi = app.add_subcommand("roi", "crop anchor-aligned ROIs from a manifest");
  auto* feat = app.add_subcommand("featurize", "write feature maps for a manifest");
  auto* sel = app.add_subcommand("select-channels", "learn a channel mask from normals");
  auto* fit = app.add_subcommand("fit", "fit a normality bank");
  auto* score = app.add_subcommand("score", "score one input");
  auto* check = app.add_subcommand("check", "score and compare to the bank threshold");
  auto* eval = app.add_subcommand("eval", "evaluate a labeled manifest");
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  auto* geo = app.add_subcommand("dump-geometry", "print the sampling geometry");

  for (auto* sub : {roi, feat, sel, fit, score, check, eval, synth, geo}) {
    sub->fallthrough();
  }
  for (auto* sub : {roi, feat, sel, fit, eval}) {
    sub->add_option("--manifest", o.manifest, "dataset manifest");
  }
  for (auto* sub : {roi, feat, sel, fit, eval, synth, geo}) {
    sub->add_option("--out", o.out, "output path");
  }
  for (auto* sub : {sel, fit}) {
    sub->add_option("--fraction", o.fraction, "kept channel fraction");
    sub->add_flag("--bottom", o.bottom, "keep the lowest-scoring channels (ablation)");
  }
  fit->add_option("--mask", o.mask, "channel mask file");
  for (auto* sub : {fit, score, check, eval}) sub->add_option("--tau", o.tau, "threshold");
  for (auto* sub : {score, check, eval}) sub->add_option("--bank", o.bank, "bank file");
  for (auto* sub : {score, check}) {
    sub->add_option("input", o.input, "FMAP or PGM/PPM image");
    sub->add_option("--anchor", o.anchor, "anchor 'u,v' in image pixels (default: center)");
  }
  score->add_option("--heatmap", o.heatmap, "write a heatmap PPM");
  feat->add_flag("--augment", o.augment, "add the checkpoint's flips for normal entries");
  eval->add_flag("--set-threshold", o.set_threshold,
                 "store a threshold in the bank (--tau, or derived from tau_star)");
  synth->add_option("--seed", o.seed, "master seed");
  synth->add_option("--normal", o.normal, "normal scene count");
  synth->add_option("--anomalous", o.anomalous, "anomalous scene count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (roi->parsed()) return cmd_roi(o);
    if (feat->parsed()) return cmd_featurize(o);
    if (sel->parsed()) return cmd_select_channels(o);
    if (fit->parsed()) return cmd_fit(o);
    if (score->parsed()) return cmd_score(o);
    if (check->parsed()) return cmd_check(o);
    if (eval->parsed()) return cmd_eval(o);
    if (synth->parsed()) return cmd_synth(o);
    if (geo->parsed()) return cmd_dump_geometry(o);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const microvad::Error& e) {
    print_error(microvad::error_kind_name(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    print_error("io-error", e.what());
    return kExitData;
  }
  return kExitUsage;
}
