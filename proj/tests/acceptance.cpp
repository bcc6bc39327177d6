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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "microvad/microvad.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace microvad;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("microvad_acceptance_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// --- equation oracles ---------------------------------------------------------

Outcome equation_oracles() {
  const auto t0 = Clock::now();
  std::mt19937 rng(2026);
  int configs = 0, mismatches = 0;
  double worst_mean = 0.0;
  for (; configs < 150; ++configs) {
    const int h = 1 + rng() % 16, w = 1 + rng() % 16;
    const int a1 = rng() % 4;
    const int a0 = rng() % (a1 + 1);
    const double lambda = 0.5 * (1 + rng() % 12);
    const double ax = rng() % w, ay = rng() % h;
    const GranularityParams params{lambda, a0, a1};
    const GridPoint anchor{ax, ay};

    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double d = std::max(std::fabs(x - ax), std::fabs(y - ay));
        if (chebyshev({static_cast<double>(x), static_cast<double>(y)}, anchor) != d) ++mismatches;
        if (granularity_at(params, anchor, {static_cast<double>(x), static_cast<double>(y)}) !=
            oracle::granularity(lambda, a0, a1, d)) {
          ++mismatches;
        }
      }
    }

    const auto geo = build_geometry(params, anchor, h, w);
    const auto ref = oracle::geometry(lambda, a0, a1, ax, ay, h, w);
    if (geo.size() != ref.size()) {
      ++mismatches;
      continue;
    }
    for (std::size_t n = 0; n < ref.size(); ++n) {
      const auto& g = geo.windows[n];
      int y0 = 1 << 30, x0 = 1 << 30, y1 = 0, x1 = 0;
      for (auto [y, x] : ref[n].cells) {
        y0 = std::min(y0, y);
        x0 = std::min(x0, x);
        y1 = std::max(y1, y + 1);
        x1 = std::max(x1, x + 1);
      }
      if (g.level != ref[n].level || g.y0 != y0 || g.y1 != y1 || g.x0 != x0 || g.x1 != x1 ||
          g.center.x != ref[n].cx || g.center.y != ref[n].cy) {
        ++mismatches;
      }
    }

    const int c = 1 + rng() % 4;
    std::vector<float> data(static_cast<std::size_t>(h) * w * c);
    std::uniform_real_distribution<float> u(-10.0f, 10.0f);
    for (auto& v : data) v = u(rng);
    const FeatureMap map(h, w, c, data);
    const auto desc = sample_descriptors(map, geo);
    for (std::size_t n = 0; n < ref.size(); ++n) {
      const auto want = oracle::window_mean(data, w, c, ref[n]);
      for (int k = 0; k < c; ++k) {
        worst_mean = std::max(worst_mean, std::fabs(desc.row(static_cast<int>(n))[k] - want[k]));
      }
    }
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && worst_mean <= 1e-6 && secs < 10.0,
          fmt("%d configs, %d integer mismatches, max mean error %.2e, %.2f s", configs,
              mismatches, worst_mean, secs)};
}

// --- statistics oracle --------------------------------------------------------

DescriptorSet random_set(const SamplingGeometry& geo, int dim, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> dist(0.0, scale);
  DescriptorSet d{static_cast<int>(geo.size()), dim, {}, geo.hash()};
  d.values.resize(geo.size() * dim);
  for (auto& v : d.values) v = dist(rng);
  return d;
}

Outcome statistics_oracle() {
  std::mt19937_64 rng(77);
  int instances = 0, monotone_fail = 0, equivariance_fail = 0;
  double worst = 0.0;
  for (; instances < 150; ++instances) {
    const int dim = 1 + rng() % 8;
    const int k = 2 + rng() % 15;
    const double eps = std::pow(10.0, -4.0 + static_cast<double>(rng() % 5));
    const double scale = std::pow(10.0, -1.0 + static_cast<double>(rng() % 3));
    const auto geo = build_geometry({1.0, 0, 0}, {0, 0}, 1, 3);
    std::vector<DescriptorSet> sets;
    for (int i = 0; i < k; ++i) sets.push_back(random_set(geo, dim, rng, scale));
    const auto q = random_set(geo, dim, rng, 2 * scale);
    const auto mask = full_mask(dim);
    const auto got = score(fit(sets, geo, mask, eps), q);
    for (int n = 0; n < 3; ++n) {
      std::vector<Eigen::VectorXd> xs;
      for (const auto& s : sets) xs.push_back(Eigen::Map<const Eigen::VectorXd>(s.row(n).data(), dim));
      const double want = oracle::DenseGaussian(xs, eps).distance(
          Eigen::Map<const Eigen::VectorXd>(q.row(n).data(), dim));
      worst = std::max(worst, std::fabs(got.per_location[n] - want) / std::max(want, 1e-300));
    }

    const auto looser = score(fit(sets, geo, mask, eps * 10), q);
    for (int n = 0; n < 3; ++n) {
      if (looser.per_location[n] > got.per_location[n] * (1 + 1e-12)) ++monotone_fail;
    }

    std::normal_distribution<double> shift_dist(0.0, 10 * scale);
    std::vector<double> shift(dim);
    for (auto& v : shift) v = shift_dist(rng);
    auto moved = sets;
    auto mq = q;
    for (auto* d : {&mq}) {
      for (std::size_t i = 0; i < d->values.size(); ++i) d->values[i] += shift[i % dim];
    }
    for (auto& s : moved) {
      for (std::size_t i = 0; i < s.values.size(); ++i) s.values[i] += shift[i % dim];
    }
    const auto shifted = score(fit(moved, geo, mask, eps), mq);
    for (int n = 0; n < 3; ++n) {
      if (std::fabs(shifted.per_location[n] - got.per_location[n]) >
          1e-9 * std::max(1.0, got.per_location[n])) {
        ++equivariance_fail;
      }
    }
  }
  return {worst <= 1e-8 && monotone_fail == 0 && equivariance_fail == 0,
          fmt("%d instances, max relative error %.2e, eps-monotonicity failures %d, "
              "translation failures %d",
              instances, worst, monotone_fail, equivariance_fail)};
}

// --- synthetic pipeline helpers ----------------------------------------------

struct Featurized {
  std::vector<FeaturizedSample> train;
  std::vector<FeatureMap> eval_maps;
  std::vector<bool> eval_labels;
};

Featurized featurize_synthetic(const CheckpointConfig& cfg, const FeatureBackend& backend,
                               std::uint64_t master_seed, const fs::path& dir) {
  auto [kind, opt] = synth::scenes_for_checkpoint(cfg.name);
  synth::gen_dataset({8, 0}, kind, synth::mix_seed(master_seed, 1), dir / "train", opt);
  synth::gen_dataset({20, 20}, kind, synth::mix_seed(master_seed, 2), dir / "eval", opt);
  Featurized out;
  out.train = training_samples(read_manifest(dir / "train" / "manifest.json"), cfg, backend);
  const auto eval = read_manifest(dir / "eval" / "manifest.json");
  for (const auto& e : eval.entries) {
    out.eval_maps.push_back(featurize_entry(eval, e, cfg, backend, false).front().map);
    out.eval_labels.push_back(e.label == Label::kAnomalous);
  }
  return out;
}

double aupr_of(const Featurized& data, const CheckpointConfig& cfg, const FeatureBackend& backend,
               double fraction, bool bottom) {
  const auto mask = learn_channel_mask(data.train, cfg, fraction, bottom);
  const auto bank = fit_bank(data.train, cfg, backend, mask);
  std::vector<LabeledScore> scored;
  for (std::size_t i = 0; i < data.eval_maps.size(); ++i) {
    scored.push_back({score_map(bank, data.eval_maps[i]).score, data.eval_labels[i], ""});
  }
  return compute_metrics(scored).aupr;
}

// --- protocol reproduction ----------------------------------------------------

Outcome protocol() {
  const auto t0 = Clock::now();
  const FilterBankBackend backend;
  const std::vector<std::pair<std::string, int>> expected = {
      {"needle", 16}, {"fme", 16}, {"hook", 8}, {"cortex", 32}};
  bool ok = true;
  std::string detail;
  for (const auto& [name, count] : expected) {
    const auto cfg = find_checkpoint(default_checkpoints(), name);
    const auto dir = scratch("protocol_" + name);
    auto [kind, opt] = synth::scenes_for_checkpoint(name);
    synth::gen_dataset({8, 0}, kind, 101, dir / "train", opt);
    synth::gen_dataset({20, 20}, kind, 202, dir / "eval", opt);
    const auto samples = training_samples(read_manifest(dir / "train" / "manifest.json"), cfg, backend);
    const auto mask = learn_channel_mask(samples, cfg, cfg.channel_fraction);
    const auto bank = fit_bank(samples, cfg, backend, mask);
    const auto report = evaluate_manifest(bank, read_manifest(dir / "eval" / "manifest.json"), backend);
    const auto& m = *report.metrics;
    const bool valid = static_cast<int>(samples.size()) == count && report.failures == 0 &&
                       m.positives == 20 && m.negatives == 20 && m.aupr >= 0 && m.aupr <= 1 &&
                       m.f1_max >= 0 && m.f1_max <= 1 && std::isfinite(m.tau_star) &&
                       static_cast<int>(mask.kept.size()) == kFilterBankChannels / 2;
    ok = ok && valid;
    detail += fmt("%s K'=%zu AUPR=%.3f F1=%.3f; ", name.c_str(), samples.size(), m.aupr, m.f1_max);
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < 60.0;
  return {ok, detail + fmt("%.2f s", secs)};
}

// --- ablations ----------------------------------------------------------------

// Cortex set, matched seeds: every variant sees the same featurized data.
// PGS vs uniform compares geometry with all channels kept; top vs bottom
// compares masks on the PGS geometry.
std::pair<Outcome, Outcome> ablations() {
  const FilterBankBackend backend;
  const auto cfg = find_checkpoint(default_checkpoints(), "cortex");
  auto uniform = cfg;
  uniform.granularity.a1 = uniform.granularity.a0;
  int pgs_wins = 0, top_wins = 0;
  std::string pgs_detail, fcs_detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto data = featurize_synthetic(cfg, backend, seed, scratch("ablation_" + std::to_string(seed)));
    const double pgs = aupr_of(data, cfg, backend, 1.0, false);
    const double uni = aupr_of(data, uniform, backend, 1.0, false);
    const double top = aupr_of(data, cfg, backend, 0.5, false);
    const double bottom = aupr_of(data, cfg, backend, 0.5, true);
    pgs_wins += pgs >= uni;
    top_wins += top >= bottom;
    pgs_detail += fmt(" %.3f/%.3f", pgs, uni);
    fcs_detail += fmt(" %.3f/%.3f", top, bottom);
  }
  return {{pgs_wins >= 3, fmt("PGS >= uniform on %d/5 seeds (PGS/uniform AUPR:%s)", pgs_wins,
                              pgs_detail.c_str())},
          {top_wins >= 3, fmt("top-50%% >= bottom-50%% on %d/5 seeds (top/bottom AUPR:%s)",
                              top_wins, fcs_detail.c_str())}};
}

// --- metrics ------------------------------------------------------------------

Outcome metrics_hand_case() {
  const std::vector<LabeledScore> three = {{0.9, true, "a"}, {0.8, false, "b"}, {0.7, true, "c"}};
  const auto m = compute_metrics(three);
  const std::vector<LabeledScore> perfect = {{4, true, "a"}, {3, true, "b"}, {2, false, "c"}, {1, false, "d"}};
  const auto p = compute_metrics(perfect);
  const bool ok = std::fabs(m.aupr - 5.0 / 6.0) <= 1e-9 && std::fabs(m.f1_max - 0.8) <= 1e-9 &&
                  m.tau_star == 0.7 && p.aupr == 1.0;
  return {ok, fmt("AUPR %.10f, F1_max %.10f at tau %.2f, perfect AUPR %.1f", m.aupr, m.f1_max,
                  m.tau_star, p.aupr)};
}

// --- latency ------------------------------------------------------------------

Outcome latency() {
  const auto cfg = find_checkpoint(default_checkpoints(), "needle");
  const auto backend = make_backend("dinov2-vits14");
  const auto geo = checkpoint_geometry(cfg, *backend);
  std::mt19937_64 rng(5);
  std::normal_distribution<float> dist(0.0f, 1.0f);
  auto random_map = [&] {
    std::vector<float> d(35 * 35 * 384);
    for (auto& v : d) v = dist(rng);
    return FeatureMap(35, 35, 384, std::move(d));
  };
  std::vector<FeaturizedSample> train;
  for (int i = 0; i < 16; ++i) train.push_back({random_map(), std::nullopt, ""});
  const auto mask = learn_channel_mask(train, cfg, 0.5);
  const auto path = scratch("latency") / "bank.nbnk";
  save_bank(fit_bank(train, cfg, *backend, mask), path);
  const auto bank = load_bank(path);
  const auto query = random_map();
  std::vector<double> ms;
  double sink = 0.0;
  for (int run = 0; run < 21; ++run) {
    const auto t0 = Clock::now();
    const auto selected = select_channels(query, bank.mask);
    const auto desc = sample_descriptors(selected, bank.geometry);
    sink += score(bank, desc).score;
    ms.push_back(seconds_since(t0) * 1e3);
  }
  std::sort(ms.begin(), ms.end());
  return {ms.back() < 50.0 && std::isfinite(sink),
          fmt("35x35x384, %d windows, %d channels kept: median %.2f ms, worst %.2f ms",
              bank.locations(), bank.dim, ms[ms.size() / 2], ms.back())};
}

// --- determinism --------------------------------------------------------------

struct Artifacts {
  std::string mask, bank, report;
};

Artifacts run_once(const fs::path& dir) {
  const FilterBankBackend backend;
  const auto cfg = find_checkpoint(default_checkpoints(), "cortex");
  synth::gen_dataset({8, 0}, synth::SceneKind::kCortex, 31, dir / "train");
  synth::gen_dataset({5, 5}, synth::SceneKind::kCortex, 32, dir / "eval");
  const auto samples = training_samples(read_manifest(dir / "train" / "manifest.json"), cfg, backend);
  const auto mask = learn_channel_mask(samples, cfg, cfg.channel_fraction);
  write_mask(mask, dir / "mask.json");
  save_bank(fit_bank(samples, cfg, backend, read_mask(dir / "mask.json")), dir / "bank.nbnk");
  const auto report = evaluate_manifest(load_bank(dir / "bank.nbnk"),
                                        read_manifest(dir / "eval" / "manifest.json"), backend);
  io::write_file_atomic(dir / "report.json", report_to_json(report).dump(2));
  return {io::read_text(dir / "mask.json"), io::read_text(dir / "bank.nbnk"),
          io::read_text(dir / "report.json")};
}

Outcome determinism() {
  const auto a = run_once(scratch("det_a"));
  const auto b = run_once(scratch("det_b"));
  const bool mask = a.mask == b.mask, bank = a.bank == b.bank, report = a.report == b.report;
  return {mask && bank && report,
          fmt("mask %s, bank %s (%zu bytes), report %s", mask ? "identical" : "DIFFERS",
              bank ? "identical" : "DIFFERS", a.bank.size(), report ? "identical" : "DIFFERS")};
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](const char* name, const Outcome& o) {
    std::printf("%s  %-22s %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  };
  auto guarded = [&](const char* name, const std::function<Outcome()>& fn) {
    try {
      report(name, fn());
    } catch (const std::exception& e) {
      report(name, {false, std::string("error: ") + e.what()});
    }
  };
  guarded("equation-oracles", equation_oracles);
  guarded("statistics-oracle", statistics_oracle);
  guarded("protocol", protocol);
  try {
    const auto [pgs, fcs] = ablations();
    report("ablation-pgs", pgs);
    report("ablation-fcs", fcs);
  } catch (const std::exception& e) {
    report("ablation-pgs", {false, std::string("error: ") + e.what()});
    report("ablation-fcs", {false, std::string("error: ") + e.what()});
  }
  guarded("metrics", metrics_hand_case);
  guarded("latency", latency);
  guarded("determinism", determinism);
  fs::remove_all(fs::temp_directory_path() / ("microvad_acceptance_" + std::to_string(::getpid())));
  std::printf("%d criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
