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
#include "patchdex/pooling.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <string>

#include "patchdex/error.hpp"

namespace patchdex {
namespace {

// [lo, hi) of cell k out of `grid` along an extent starting at `origin`.
std::pair<int, int> CellSpan(int origin, int extent, int grid, int k) {
  auto edge = [&](int n) {
    return static_cast<int>((2LL * n * extent + grid) / (2LL * grid));
  };
  int lo = origin + edge(k);
  int hi = origin + edge(k + 1);
  const int end = origin + extent;
  if (lo >= end) lo = end - 1;
  if (hi <= lo) hi = lo + 1;
  return {lo, hi};
}

void CheckRegion(const ResponseMap& map, const CellRect& region, int grid) {
  if (grid < 1) throw Error(ErrorKind::kInvariant, "pool grid must be >= 1");
  if (region.width() < 1 || region.height() < 1 || region.x0 < 0 ||
      region.y0 < 0 || region.x1 > int(map.width) ||
      region.y1 > int(map.height)) {
    throw Error(ErrorKind::kInvariant,
                "pool region outside map '" + map.image_id + "'");
  }
}

const ResponseMap* FindLevel(std::span<const ResponseMap> maps, int level) {
  for (const ResponseMap& m : maps) {
    if (int(m.scale_level) == level) return &m;
  }
  return nullptr;
}

}  // namespace

FeatureVector SpatialMaxPool(const ResponseMap& map, const CellRect& region,
                             int grid) {
  CheckRegion(map, region, grid);
  const std::size_t channels = map.channels;
  FeatureVector out;
  out.values.assign(std::size_t(grid) * grid * channels,
                    -std::numeric_limits<float>::infinity());
  for (int cy = 0; cy < grid; ++cy) {
    const auto [y0, y1] = CellSpan(region.y0, region.height(), grid, cy);
    for (int cx = 0; cx < grid; ++cx) {
      const auto [x0, x1] = CellSpan(region.x0, region.width(), grid, cx);
      float* cell = out.values.data() + (std::size_t(cy) * grid + cx) * channels;
      for (int y = y0; y < y1; ++y) {
        const float* row =
            map.values.data() + (std::size_t(y) * map.width + x0) * channels;
        for (int x = x0; x < x1; ++x, row += channels) {
          for (std::size_t c = 0; c < channels; ++c) {
            cell[c] = std::max(cell[c], row[c]);
          }
        }
      }
    }
  }
  return out;
}

FeatureVector SpatialMaxPool(const ResponseMap& map, int grid) {
  return SpatialMaxPool(
      map, CellRect{0, 0, int(map.width), int(map.height)}, grid);
}

FeatureVector L2Normalize(FeatureVector v) {
  double norm2 = 0.0;
  for (float x : v.values) norm2 += double(x) * x;
  v.normalized = true;
  if (norm2 == 0.0) {
    v.degenerate = true;
    return v;
  }
  v.degenerate = false;
  const double inv = 1.0 / std::sqrt(norm2);
  for (float& x : v.values) x = static_cast<float>(x * inv);
  return v;
}

PatchFeatureSet EncodeImage(std::span<const ResponseMap> scale_maps,
                            const PatchLayout& layout, int grid) {
  if (scale_maps.empty()) {
    throw Error(ErrorKind::kEmptyInput, "no scale maps");
  }
  PatchFeatureSet set;
  set.image_id = scale_maps.front().image_id;
  set.levels = layout.levels;
  set.grid = grid;
  set.channels = scale_maps.front().channels;

  std::vector<const ResponseMap*> by_level(layout.levels + 1, nullptr);
  for (int l = 1; l <= layout.levels; ++l) {
    by_level[l] = FindLevel(scale_maps, l);
    if (by_level[l] == nullptr) {
      throw Error(ErrorKind::kEmptyInput, "image '" + set.image_id +
                                              "' has no map for level " +
                                              std::to_string(l));
    }
    if (by_level[l]->channels != set.channels) {
      throw Error(ErrorKind::kDimensionMismatch,
                  "image '" + set.image_id + "': level " + std::to_string(l) +
                      " has " + std::to_string(by_level[l]->channels) +
                      " channels, level 1 has " +
                      std::to_string(set.channels));
    }
  }

  set.vectors.reserve(layout.patches.size());
  for (const PatchRect& rect : layout.patches) {
    const ResponseMap& map = *by_level[rect.id.level];
    const CellRect cells =
        MapToFeatureCoords(rect, layout.width, layout.height, int(map.width),
                           int(map.height));
    FeatureVector v = L2Normalize(SpatialMaxPool(map, cells, grid));
    v.patch = rect.id;
    set.vectors.push_back(std::move(v));
  }
  return set;
}

PatchFeatureSet EncodePatchMaps(std::span<const ResponseMap> patch_maps,
                                int levels, int grid) {
  if (levels < 1) throw Error(ErrorKind::kInvariant, "levels must be >= 1");
  if (patch_maps.size() != std::size_t(PatchCount(levels))) {
    throw Error(ErrorKind::kEmptyInput,
                "expected " + std::to_string(PatchCount(levels)) +
                    " patch maps, got " + std::to_string(patch_maps.size()));
  }
  PatchFeatureSet set;
  set.image_id = patch_maps.front().image_id;
  set.levels = levels;
  set.grid = grid;
  set.channels = patch_maps.front().channels;
  set.vectors.reserve(patch_maps.size());
  std::size_t k = 0;
  for (int l = 1; l <= levels; ++l) {
    for (int i = 1; i <= l; ++i) {
      for (int j = 1; j <= l; ++j, ++k) {
        const ResponseMap& map = patch_maps[k];
        if (map.channels != set.channels) {
          throw Error(ErrorKind::kDimensionMismatch,
                      "image '" + set.image_id + "': patch map " +
                          std::to_string(k) + " channel count differs");
        }
        FeatureVector v = L2Normalize(SpatialMaxPool(map, grid));
        v.patch = {l, i, j};
        set.vectors.push_back(std::move(v));
      }
    }
  }
  return set;
}

namespace {

PatchFeatureSet EncodeOne(const EncodeJob& job, int grid) {
  return job.per_patch ? EncodePatchMaps(job.maps, job.layout.levels, grid)
                       : EncodeImage(job.maps, job.layout, grid);
}

}  // namespace

std::vector<PatchFeatureSet> EncodeBatch(std::span<const EncodeJob> jobs,
                                         int grid) {
  std::vector<PatchFeatureSet> out(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  const long n = static_cast<long>(jobs.size());
#pragma omp parallel for schedule(dynamic)
  for (long k = 0; k < n; ++k) {
    try {
      out[k] = EncodeOne(jobs[k], grid);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  // Report the first failing job in input order, independent of scheduling.
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::vector<PatchFeatureSet> EncodeBatchSerial(std::span<const EncodeJob> jobs,
                                               int grid) {
  std::vector<PatchFeatureSet> out;
  out.reserve(jobs.size());
  for (const EncodeJob& job : jobs) out.push_back(EncodeOne(job, grid));
  return out;
}

}  // namespace patchdex
