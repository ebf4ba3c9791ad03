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

#include <vector>

#include "patchdex/types.hpp"

namespace patchdex {

/// Half-open rectangle in pixel coordinates.
struct PatchRect {
  PatchId id;
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool operator==(const PatchRect&) const = default;
};

/// Half-open rectangle in response-map cells.
struct CellRect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool operator==(const CellRect&) const = default;
};

struct PatchLayout {
  int width = 0;
  int height = 0;
  int levels = 0;
  std::vector<PatchRect> patches;  // (l, i, j) lexicographic
};

/// Nearest integer, ties toward +infinity.
int RoundHalfUp(double x);

/// Side of the square patch at each level: max(2w/(l+1), 2h/(l+1)), rounded.
std::vector<int> PatchSides(int width, int height, int levels);

/// Multi-resolution grid: at level l, l*l squares of side s_l centered at
/// (w_l/2 + (i-1) b_w, h_l/2 + (j-1) b_h) with b_w = (w - w_l)/(l - 1), and
/// clamped to the image. Level 1 is one patch centered on the image. Each
/// left/top edge is round(center - s_l/2).
PatchLayout MakePatchLayout(int width, int height, int levels);

/// Proportional pixel -> cell mapping, x' = round(x * map_w / image_w),
/// widened to at least one cell and kept inside the map.
CellRect MapToFeatureCoords(const PatchRect& rect, int image_width,
                            int image_height, int map_width, int map_height);

}  // namespace patchdex
