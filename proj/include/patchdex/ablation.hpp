//==============================================================================
// Copyright (c) 2026 The patchdex Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//==============================================================================
#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "patchdex/eval.hpp"
#include "patchdex/feature_io.hpp"
#include "patchdex/matcher.hpp"
#include "patchdex/types.hpp"

namespace patchdex {

/// One ablation row: reference levels (MR), query levels (Jtr), pooling
/// grid (SP) and whether PCA whitening is applied.
struct PipelineConfig {
  std::string label;
  int levels_reference = 1;
  int levels_query = 1;
  int grid = 1;
  bool whiten = false;
};

/// Accepts "Baseline" or "+"-joined terms MR<n>, Jtr<n>, SP<n>, PCAw, with
/// optional spaces and the "_{n×n}" / "_{nxn}" subscript spellings.
PipelineConfig ParseConfig(std::string_view label);

/// The ten medium-footprint rows, Baseline through MR4+Jtr3+SP2+PCAw.
std::vector<PipelineConfig> StandardConfigs();

/// Stored numbers per reference image for `channels`-deep maps.
std::size_t DimsPerReference(const PipelineConfig& config,
                             std::size_t channels);

/// Stride used to infer image pixels from level-1 map cells when the
/// manifest omits the size.
inline constexpr int kDefaultCellStride = 16;

/// Encodes every image of `role` at `levels` and grid `grid`.
std::vector<PatchFeatureSet> EncodeRole(const DatasetManifest& manifest,
                                        const MapSource& source, Role role,
                                        int levels, int grid, bool per_patch);

struct PipelineOptions {
  MatchOptions match;
  bool per_patch = false;
};

struct PipelineResult {
  std::vector<RankedList> ranked;
  std::size_t dims_per_reference = 0;
};

PipelineResult RunPipeline(const DatasetManifest& manifest,
                           const MapSource& source,
                           const PipelineConfig& config,
                           const PipelineOptions& options = {});

/// One EvalReport per config, in order.
std::vector<EvalReport> RunAblation(const DatasetManifest& manifest,
                                    const MapSource& source,
                                    const std::vector<PipelineConfig>& configs,
                                    const PipelineOptions& options = {});

}  // namespace patchdex
