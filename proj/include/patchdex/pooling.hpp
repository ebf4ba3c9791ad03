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

#include <span>
#include <string>
#include <vector>

#include "patchdex/patch_geometry.hpp"
#include "patchdex/types.hpp"

namespace patchdex {

/// g x g max-pooling over `region` of `map`. Cell boundaries sit at
/// region.x0 + round(k * width / g); when the region is narrower than g,
/// neighbouring cells share columns (rows likewise). Output is cell-major,
/// out[(cy * g + cx) * C + c].
FeatureVector SpatialMaxPool(const ResponseMap& map, const CellRect& region,
                             int grid);
FeatureVector SpatialMaxPool(const ResponseMap& map, int grid);

/// v / ||v||. The zero vector is returned unchanged with `degenerate` set.
FeatureVector L2Normalize(FeatureVector v);

/// Crop-from-scale-maps encoding: `scale_maps[l-1]` is the whole image seen
/// at level l. Each patch rect is mapped into its level's map, pooled and
/// normalized. Throws on a missing level or a channel mismatch.
PatchFeatureSet EncodeImage(std::span<const ResponseMap> scale_maps,
                            const PatchLayout& layout, int grid);

/// Direct mode: one pre-cropped map per patch, in (l, i, j) order, each
/// pooled whole.
PatchFeatureSet EncodePatchMaps(std::span<const ResponseMap> patch_maps,
                                int levels, int grid);

/// One image's worth of encoder input.
struct EncodeJob {
  std::vector<ResponseMap> maps;
  PatchLayout layout;
  bool per_patch = false;
};

/// Encodes many images; OpenMP over images. Output order follows `jobs`.
std::vector<PatchFeatureSet> EncodeBatch(std::span<const EncodeJob> jobs,
                                         int grid);
/// Single-threaded reference for EncodeBatch.
std::vector<PatchFeatureSet> EncodeBatchSerial(std::span<const EncodeJob> jobs,
                                               int grid);

}  // namespace patchdex
