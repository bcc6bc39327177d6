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

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "microvad/backend.hpp"
#include "microvad/checkpoint.hpp"
#include "microvad/fmap_io.hpp"
#include "microvad/roi.hpp"

namespace microvad {
namespace {

Image noise_image(int w, int h, int c, std::uint32_t seed) {
  std::mt19937 rng(seed);
  Image img(w, h, c);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng() & 0xff);
  return img;
}

TEST(ExtractRoi, CenteredAnchor) {
  Image raw(2448, 2048, 1);
  auto roi = extract_roi(raw, {1224, 1024}, {}, 256);
  EXPECT_EQ(roi.size(), 256);
  EXPECT_EQ(roi.applied_shift_u, 0);
  EXPECT_EQ(roi.applied_shift_v, 0);
  EXPECT_EQ(roi.anchor_px, (PixelPoint{128, 128}));
  EXPECT_EQ(roi.left, 1224 - 128);
  EXPECT_EQ(roi.top, 1024 - 128);
}

TEST(ExtractRoi, CornerAnchorIsShiftedInside) {
  Image raw(400, 300, 1);
  auto roi = extract_roi(raw, {10, 10}, {}, 256);
  EXPECT_EQ(roi.applied_shift_u, 118);
  EXPECT_EQ(roi.applied_shift_v, 118);
  EXPECT_EQ(roi.anchor_px, (PixelPoint{10, 10}));
  EXPECT_EQ(roi.left, 0);
  EXPECT_EQ(roi.top, 0);
}

TEST(ExtractRoi, OffsetDisplacesCenter) {
  Image raw(1000, 1000, 1);
  auto roi = extract_roi(raw, {500, 500}, {10, -5}, 256);
  EXPECT_EQ(roi.anchor_px, (PixelPoint{118, 133}));
  EXPECT_EQ(roi.left + 128, 510);
  EXPECT_EQ(roi.top + 128, 495);
}

TEST(ExtractRoi, CopiesThePixels) {
  auto raw = noise_image(300, 280, 3, 1);
  auto roi = extract_roi(raw, {150, 140}, {}, 256);
  for (int y = 0; y < 256; y += 17) {
    for (int x = 0; x < 256; x += 13) {
      for (int c = 0; c < 3; ++c) EXPECT_EQ(roi.pixels.at(x, y, c), raw.at(roi.left + x, roi.top + y, c));
    }
  }
}

TEST(ExtractRoi, InteriorAnchorLandsAtCenter) {
  std::mt19937 rng(2);
  Image raw(800, 700, 1);
  for (int i = 0; i < 50; ++i) {
    const int roi_px = 16 + rng() % 200;
    const double u = roi_px + rng() % (800 - 2 * roi_px);
    const double v = roi_px + rng() % (700 - 2 * roi_px);
    auto roi = extract_roi(raw, {u, v}, {}, roi_px);
    EXPECT_EQ(roi.anchor_px, (PixelPoint{static_cast<double>(roi_px / 2), static_cast<double>(roi_px / 2)}));
  }
}

TEST(ExtractRoi, ImageSmallerThanRoi) {
  Image raw(200, 300, 1);
  try {
    extract_roi(raw, {100, 100}, {}, 256);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidArgument);
  }
}

TEST(AugmentFlips, CountsPerCheckpoint) {
  auto raw = noise_image(300, 300, 1, 3);
  auto roi = extract_roi(raw, {150, 150}, {}, 256);
  const auto cps = default_checkpoints();
  const int expected[] = {16, 16, 8, 32};  // needle, fme, hook, cortex with K = 8
  for (std::size_t i = 0; i < cps.size(); ++i) {
    int total = 0;
    for (int k = 0; k < 8; ++k) total += static_cast<int>(augment_flips(roi, cps[i].flips).size());
    EXPECT_EQ(total, expected[i]) << cps[i].name;
  }
}

TEST(AugmentFlips, FlipsAreInvolutions) {
  auto raw = noise_image(300, 300, 3, 4);
  auto roi = extract_roi(raw, {100, 190}, {5, -7}, 256);
  for (Flip f : {Flip::kVertical, Flip::kHorizontal, Flip::kBoth}) {
    auto twice = apply_flip(apply_flip(roi, f), f);
    EXPECT_EQ(twice.pixels, roi.pixels);
    EXPECT_EQ(twice.anchor_px, roi.anchor_px);
  }
}

TEST(AugmentFlips, MirrorsPixelsAndAnchor) {
  auto raw = noise_image(300, 300, 1, 5);
  auto roi = extract_roi(raw, {150, 150}, {20, 0}, 256);
  auto out = augment_flips(roi, {Flip::kVertical, Flip::kHorizontal});
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].pixels, roi.pixels);
  EXPECT_EQ(out[1].pixels.at(3, 0), roi.pixels.at(3, 255));
  EXPECT_EQ(out[1].anchor_px, (PixelPoint{roi.anchor_px.u, 255 - roi.anchor_px.v}));
  EXPECT_EQ(out[2].pixels.at(0, 7), roi.pixels.at(255, 7));
  EXPECT_EQ(out[2].anchor_px, (PixelPoint{255 - roi.anchor_px.u, roi.anchor_px.v}));
}

TEST(AnchorToGrid, PatchCenters) {
  EXPECT_EQ(anchor_to_grid({126, 126}, 14, 7, 35, 35), (GridPoint{17, 17}));
  EXPECT_EQ(anchor_to_grid({7, 7}, 14, 7, 35, 35), (GridPoint{0, 0}));
  EXPECT_EQ(anchor_to_grid({251, 0}, 14, 7, 35, 35), (GridPoint{34, 0}));
}

TEST(CheckpointConfig, DefaultsValidateAgainstFilterBankGrid) {
  FilterBankBackend fb;
  for (const auto& cfg : default_checkpoints()) {
    EXPECT_NO_THROW(validate_flip_compatibility(cfg, fb.grid())) << cfg.name;
    EXPECT_EQ(nominal_grid_anchor(cfg, fb.grid()), (GridPoint{17, 17}));
  }
  const auto cps = default_checkpoints();
  EXPECT_EQ(cps[0].granularity, (GranularityParams{6.0, 0, 2}));
  EXPECT_EQ(cps[3].granularity, (GranularityParams{3.0, 1, 3}));
  EXPECT_EQ(cps[3].snr_mode, SnrMode::kVessel);
}

TEST(CheckpointConfig, OffsetAlongMirrorAxisIsAllowed) {
  auto cfg = default_checkpoints()[0];  // vertical flip only
  cfg.anchor_offset = {-40, 0};
  EXPECT_NO_THROW(validate_flip_compatibility(cfg, GridSpec{}));
  cfg.anchor_offset = {0, 30};
  try {
    validate_flip_compatibility(cfg, GridSpec{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
}

TEST(CheckpointConfig, JsonRoundTripAndValidation) {
  for (const auto& cfg : default_checkpoints()) {
    EXPECT_EQ(checkpoint_from_json(checkpoint_to_json(cfg)), cfg);
  }
  auto j = checkpoint_to_json(default_checkpoints()[0]);
  j["a0"] = 3;
  EXPECT_THROW(checkpoint_from_json(j), Error);
  j = checkpoint_to_json(default_checkpoints()[0]);
  j["flips"] = {"sideways"};
  EXPECT_THROW(checkpoint_from_json(j), Error);
  j = checkpoint_to_json(default_checkpoints()[0]);
  j["epsilon"] = 0.0;
  EXPECT_THROW(checkpoint_from_json(j), Error);
}

RoiImage roi_from(Image img) {
  RoiImage roi;
  roi.anchor_px = {128, 128};
  roi.pixels = std::move(img);
  return roi;
}

TEST(FilterBank, ConstantImageHasNoStructure) {
  FilterBankBackend fb;
  auto map = fb.featurize(roi_from(Image(256, 256, 1, 90)));
  ASSERT_EQ(map.height(), 35);
  ASSERT_EQ(map.width(), 35);
  ASSERT_EQ(map.channels(), 16);
  for (int y = 0; y < 35; ++y) {
    for (int x = 0; x < 35; ++x) {
      for (int c : {kGrayStd, kMeanDx, kMeanDy, kMeanAbsDx, kMeanAbsDy, kRedStd, kGreenStd,
                    kBlueStd, kLaplacianMean, kGrayRange}) {
        EXPECT_EQ(map.at(y, x, c), 0.0f) << c;
      }
      EXPECT_NEAR(map.at(y, x, kGrayMean), 90 / 255.0, 1e-6);
      EXPECT_EQ(map.at(y, x, kRedMean), map.at(y, x, kGrayMean));
    }
  }
}

TEST(FilterBank, StepEdgeIsLocalToOneColumn) {
  Image img(256, 256, 1, 40);
  for (int y = 0; y < 256; ++y) {
    for (int x = 128; x < 256; ++x) img.at(x, y) = 200;
  }
  FilterBankBackend fb;
  auto map = fb.featurize(roi_from(img));
  for (int y = 0; y < 35; ++y) {
    for (int x = 0; x < 35; ++x) {
      if (x == 17) {
        EXPECT_GT(map.at(y, x, kMeanAbsDx), 0.0f);
      } else {
        EXPECT_EQ(map.at(y, x, kMeanAbsDx), 0.0f) << "column " << x;
      }
    }
  }
}

TEST(FilterBank, Deterministic) {
  FilterBankBackend fb;
  auto roi = roi_from(noise_image(256, 256, 3, 6));
  EXPECT_EQ(fb.featurize(roi), fb.featurize(roi));
}

TEST(FilterBank, CommutesWithFlips) {
  FilterBankBackend fb;
  auto roi = roi_from(noise_image(256, 256, 3, 7));
  auto base = fb.featurize(roi);
  for (Flip f : {Flip::kVertical, Flip::kHorizontal, Flip::kBoth}) {
    auto flipped = fb.featurize(apply_flip(roi, f));
    const bool mirror_x = f != Flip::kVertical;
    const bool mirror_y = f != Flip::kHorizontal;
    for (int y = 0; y < 35; ++y) {
      for (int x = 0; x < 35; ++x) {
        const int sy = mirror_y ? 34 - y : y;
        const int sx = mirror_x ? 34 - x : x;
        for (int c = 0; c < 16; ++c) {
          double want = base.at(sy, sx, c);
          if ((c == kMeanDx && mirror_x) || (c == kMeanDy && mirror_y)) want = -want;
          EXPECT_NEAR(flipped.at(y, x, c), want, 1e-5) << flip_name(f) << " c=" << c;
        }
      }
    }
  }
}

TEST(Backends, RegistryAndPrecomputed) {
  EXPECT_EQ(make_backend("filterbank")->channels(), 16);
  auto vit = make_backend("dinov2-vits14");
  EXPECT_EQ(vit->channels(), 384);
  EXPECT_FALSE(vit->can_featurize());
  EXPECT_THROW(vit->featurize(roi_from(Image(256, 256, 1))), Error);
  try {
    make_backend("resnet");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
}

TEST(LoadPrecomputed, ChecksDims) {
  const auto dir = std::filesystem::temp_directory_path() / ("microvad_roi_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  write_fmap(FeatureMap(35, 35, 384, std::vector<float>(35 * 35 * 384, 0.5f)), dir / "vit.fmap");
  write_fmap(FeatureMap(35, 35, 16, std::vector<float>(35 * 35 * 16, 0.5f)), dir / "fb.fmap");
  auto vit = make_backend("dinov2-vits14");
  EXPECT_EQ(load_precomputed(dir / "vit.fmap", *vit).channels(), 384);
  try {
    load_precomputed(dir / "fb.fmap", *vit);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
    EXPECT_NE(std::string(e.what()).find("35x35x384"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("35x35x16"), std::string::npos);
  }
  try {
    load_precomputed(dir / "missing.fmap", *vit);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIo);
  }
}

TEST(Pnm, RoundTripAndErrors) {
  auto img = noise_image(17, 9, 3, 8);
  auto s = encode_pnm(img);
  EXPECT_EQ(decode_pnm({s.begin(), s.end()}), img);
  auto gray = noise_image(5, 4, 1, 9);
  s = encode_pnm(gray);
  EXPECT_EQ(decode_pnm({s.begin(), s.end()}), gray);
  s.resize(s.size() - 1);
  EXPECT_THROW(decode_pnm({s.begin(), s.end()}), FormatError);
  const std::string p2 = "P2\n1 1\n255\n0";
  EXPECT_THROW(decode_pnm({p2.begin(), p2.end()}), FormatError);
  const std::string commented = "P5\n# comment\n2 1\n255\n\x01\x02";
  auto c = decode_pnm({commented.begin(), commented.end()});
  EXPECT_EQ(c.width, 2);
  EXPECT_EQ(c.at(1, 0), 2);
}

}  // namespace
}  // namespace microvad
