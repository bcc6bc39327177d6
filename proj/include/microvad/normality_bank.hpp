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

#ifndef MICROVAD_NORMALITY_BANK_HPP_
#define MICROVAD_NORMALITY_BANK_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "microvad/channel_select.hpp"
#include "microvad/checkpoint.hpp"
#include "microvad/error.hpp"
#include "microvad/io_util.hpp"
#include "microvad/linalg.hpp"
#include "microvad/pgs.hpp"

namespace microvad {

/// Per-location Gaussians N(mu_n, Sigma_n + eps I), stored as means and
/// packed Cholesky factors, together with everything needed to reproduce
/// the descriptors they were fit on.
struct NormalityBank {
  CheckpointConfig config;
  SamplingGeometry geometry;
  ChannelMask mask;
  double epsilon = 0.01;
  int sample_count = 0;  // K'
  int dim = 0;           // C_sel
  std::optional<double> threshold;
  std::vector<double> means;    // N x dim
  std::vector<double> factors;  // N x packed_size(dim)

  int locations() const { return static_cast<int>(geometry.size()); }

  std::span<const double> mean(int n) const {
    return std::span<const double>(means).subspan(static_cast<std::size_t>(n) * dim, dim);
  }
  std::span<const double> factor(int n) const {
    const auto p = linalg::packed_size(dim);
    return std::span<const double>(factors).subspan(static_cast<std::size_t>(n) * p, p);
  }
};

struct ScoreResult {
  double score = 0.0;             // max over locations
  std::vector<double> per_location;
  int argmax = 0;                 // lowest index on ties
};

/// Fits mean and regularized unbiased covariance per location. Samples are
/// put in a canonical order first, so the result does not depend on the
/// order they arrive in.
inline NormalityBank fit(std::span<const DescriptorSet> samples, const SamplingGeometry& geometry,
                         const ChannelMask& mask, double epsilon,
                         const CheckpointConfig& config = {}) {
  if (samples.size() < 2) {
    throw insufficient_data("fitting needs at least 2 normal samples, got " +
                            std::to_string(samples.size()));
  }
  if (!(epsilon > 0.0)) throw invalid_argument("epsilon must be positive");
  const auto hash = geometry.hash();
  const int dim = samples.front().dim;
  const int count = static_cast<int>(geometry.size());
  for (const auto& s : samples) {
    if (s.geometry_hash != hash || s.count != count) {
      throw invalid_argument("sample descriptors were not sampled with the bank geometry");
    }
    if (s.dim != dim || dim <= 0) {
      throw invalid_argument("descriptor dimension mismatch (" + std::to_string(s.dim) +
                             " vs " + std::to_string(dim) + ")");
    }
  }
  if (static_cast<int>(mask.kept.size()) != dim) {
    throw invalid_argument("mask keeps " + std::to_string(mask.kept.size()) +
                           " channels but descriptors have " + std::to_string(dim));
  }

  std::vector<const DescriptorSet*> order;
  for (const auto& s : samples) order.push_back(&s);
  std::stable_sort(order.begin(), order.end(), [](const DescriptorSet* a, const DescriptorSet* b) {
    return std::lexicographical_compare(a->values.begin(), a->values.end(), b->values.begin(),
                                        b->values.end());
  });

  NormalityBank bank;
  bank.config = config;
  bank.geometry = geometry;
  bank.mask = mask;
  bank.epsilon = epsilon;
  bank.sample_count = static_cast<int>(samples.size());
  bank.dim = dim;
  const auto packed = linalg::packed_size(dim);
  bank.means.assign(static_cast<std::size_t>(count) * dim, 0.0);
  bank.factors.assign(static_cast<std::size_t>(count) * packed, 0.0);

  const double k = static_cast<double>(samples.size());
  std::vector<double> centered(static_cast<std::size_t>(samples.size()) * dim);
  for (int n = 0; n < count; ++n) {
    double* mu = bank.means.data() + static_cast<std::size_t>(n) * dim;
    // Mean taken relative to the first sample: identical samples give their
    // value back exactly.
    const auto ref = order.front()->row(n);
    for (const auto* s : order) {
      const auto h = s->row(n);
      for (int c = 0; c < dim; ++c) mu[c] += h[c] - ref[c];
    }
    for (int c = 0; c < dim; ++c) mu[c] = ref[c] + mu[c] / k;
    for (std::size_t i = 0; i < order.size(); ++i) {
      const auto h = order[i]->row(n);
      for (int c = 0; c < dim; ++c) centered[i * dim + c] = h[c] - mu[c];
    }
    double* cov = bank.factors.data() + static_cast<std::size_t>(n) * packed;
    for (std::size_t i = 0; i < order.size(); ++i) {
      const double* d = centered.data() + i * dim;
      for (int r = 0; r < dim; ++r) {
        double* row = cov + linalg::packed_index(r, 0);
        const double dr = d[r];
        for (int c = 0; c <= r; ++c) row[c] += dr * d[c];
      }
    }
    for (int r = 0; r < dim; ++r) {
      double* row = cov + linalg::packed_index(r, 0);
      for (int c = 0; c <= r; ++c) row[c] /= (k - 1.0);
      row[r] += epsilon;
    }
    linalg::cholesky_packed(std::span<double>(cov, packed), dim);
  }
  return bank;
}

/// Mahalanobis distance per location via triangular solves; image score is
/// the maximum.
inline ScoreResult score(const NormalityBank& bank, const DescriptorSet& query) {
  if (query.geometry_hash != bank.geometry.hash() || query.count != bank.locations()) {
    throw invalid_argument("query descriptors were sampled with a different geometry (hash " +
                           hash_hex(query.geometry_hash) + ", bank " +
                           hash_hex(bank.geometry.hash()) + ")");
  }
  if (query.dim != bank.dim) {
    throw invalid_argument("query dimension " + std::to_string(query.dim) +
                           " does not match bank dimension " + std::to_string(bank.dim));
  }
  ScoreResult result;
  result.per_location.resize(bank.locations());
  std::vector<double> diff(bank.dim), y(bank.dim);
  for (int n = 0; n < bank.locations(); ++n) {
    const auto h = query.row(n);
    const auto mu = bank.mean(n);
    for (int c = 0; c < bank.dim; ++c) diff[c] = h[c] - mu[c];
    const double s = std::sqrt(linalg::forward_solve_norm2(bank.factor(n), diff, y));
    result.per_location[n] = s;
    if (s > result.score || n == 0) {
      result.score = s;
      result.argmax = n;
    }
  }
  return result;
}

inline NormalityBank set_threshold(NormalityBank bank, double tau) {
  if (!(tau >= 0.0)) throw invalid_argument("threshold must be >= 0, got " + std::to_string(tau));
  bank.threshold = tau;
  return bank;
}

/// Anomalous iff the image score exceeds tau.
inline bool is_anomalous(double image_score, double tau) { return image_score > tau; }

// --- persistence --------------------------------------------------------------
//
// "NBNK1\n", u32 header length, JSON header, then per location mu_n (dim f64)
// followed by the packed factor L_n (dim (dim + 1) / 2 f64).

inline constexpr std::string_view kBankMagic = "NBNK1\n";
inline constexpr int kBankVersion = 1;

inline std::string encode_bank(const NormalityBank& bank) {
  nlohmann::json header = {{"version", kBankVersion},
                           {"checkpoint", checkpoint_to_json(bank.config)},
                           {"geometry", geometry_to_json(bank.geometry)},
                           {"mask", mask_to_json(bank.mask)},
                           {"n_pgs", bank.locations()},
                           {"c_sel", bank.dim},
                           {"epsilon", bank.epsilon},
                           {"k", bank.sample_count}};
  if (bank.threshold) header["threshold"] = *bank.threshold;
  const std::string text = header.dump();
  std::string out;
  out.append(kBankMagic);
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out.append(text);
  const auto packed = linalg::packed_size(bank.dim);
  for (int n = 0; n < bank.locations(); ++n) {
    out.append(reinterpret_cast<const char*>(bank.mean(n).data()), bank.dim * sizeof(double));
    out.append(reinterpret_cast<const char*>(bank.factor(n).data()), packed * sizeof(double));
  }
  return out;
}

inline NormalityBank decode_bank(const std::vector<std::uint8_t>& bytes) {
  io::Reader reader(bytes);
  if (reader.remaining() < kBankMagic.size() ||
      reader.take(kBankMagic.size(), "magic") != kBankMagic) {
    throw FormatError("bad bank magic", 0);
  }
  const auto header_len = reader.get<std::uint32_t>("header length");
  const auto header_offset = reader.offset();
  const auto text = reader.take(header_len, "header");
  NormalityBank bank;
  try {
    const auto header = nlohmann::json::parse(text);
    const int version = header.at("version").get<int>();
    if (version != kBankVersion) {
      throw FormatError("unsupported bank version " + std::to_string(version), header_offset);
    }
    bank.config = checkpoint_from_json(header.at("checkpoint"));
    bank.geometry = geometry_from_json(header.at("geometry"));
    bank.mask = mask_from_json(header.at("mask"));
    bank.dim = header.at("c_sel").get<int>();
    bank.epsilon = header.at("epsilon").get<double>();
    bank.sample_count = header.at("k").get<int>();
    if (header.contains("threshold")) bank.threshold = header["threshold"].get<double>();
    if (header.at("n_pgs").get<int>() != bank.locations()) {
      throw FormatError("n_pgs disagrees with the window list", header_offset);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad bank header: ") + e.what(), header_offset);
  } catch (const FormatError&) {
    throw;
  } catch (const Error& e) {
    throw FormatError(std::string("bad bank header: ") + e.what(), header_offset);
  }
  if (bank.dim <= 0 || static_cast<int>(bank.mask.kept.size()) != bank.dim) {
    throw FormatError("c_sel disagrees with the channel mask", header_offset);
  }
  const auto packed = linalg::packed_size(bank.dim);
  const std::uint64_t need =
      static_cast<std::uint64_t>(bank.locations()) * (bank.dim + packed) * sizeof(double);
  if (reader.remaining() != need) {
    throw FormatError("payload holds " + std::to_string(reader.remaining()) +
                          " bytes, header implies " + std::to_string(need),
                      reader.offset());
  }
  bank.means.resize(static_cast<std::size_t>(bank.locations()) * bank.dim);
  bank.factors.resize(static_cast<std::size_t>(bank.locations()) * packed);
  for (int n = 0; n < bank.locations(); ++n) {
    auto mu = reader.take(bank.dim * sizeof(double), "means");
    std::memcpy(bank.means.data() + static_cast<std::size_t>(n) * bank.dim, mu.data(), mu.size());
    const auto at = reader.offset();
    auto l = reader.take(packed * sizeof(double), "factor");
    double* dst = bank.factors.data() + static_cast<std::size_t>(n) * packed;
    std::memcpy(dst, l.data(), l.size());
    for (int r = 0; r < bank.dim; ++r) {
      if (!(dst[linalg::packed_index(r, r)] > 0.0)) {
        throw FormatError("factor of location " + std::to_string(n) +
                              " has a non-positive diagonal",
                          at);
      }
    }
  }
  return bank;
}

inline void save_bank(const NormalityBank& bank, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_bank(bank));
}

inline NormalityBank load_bank(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw io_error("bank '" + path.string() + "' does not exist");
  return decode_bank(io::read_file(path));
}

}  // namespace microvad

#endif  // MICROVAD_NORMALITY_BANK_HPP_
