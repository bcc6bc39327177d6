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

#ifndef MICROVAD_MICROVAD_HPP_
#define MICROVAD_MICROVAD_HPP_

#include "microvad/backend.hpp"
#include "microvad/channel_select.hpp"
#include "microvad/checkpoint.hpp"
#include "microvad/error.hpp"
#include "microvad/feature_map.hpp"
#include "microvad/fmap_io.hpp"
#include "microvad/image.hpp"
#include "microvad/linalg.hpp"
#include "microvad/manifest.hpp"
#include "microvad/metrics.hpp"
#include "microvad/normality_bank.hpp"
#include "microvad/pgs.hpp"
#include "microvad/pipeline.hpp"
#include "microvad/render.hpp"
#include "microvad/roi.hpp"
#include "microvad/synth.hpp"

#endif  // MICROVAD_MICROVAD_HPP_
