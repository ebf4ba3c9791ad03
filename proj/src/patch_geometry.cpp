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
#include "patchdex/patch_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "patchdex/error.hpp"

namespace patchdex {
namespace {

void CheckLayoutArgs(int width, int height, int levels) {
  if (width < 1 || height < 1) {
    throw Error(ErrorKind::kZeroDimension,
                "image size must be >= 1x1, got " + std::to_string(width) +
                    "x" + std::to_string(height));
  }
  if (levels < 1) {
    throw Error(ErrorKind::kInvariant, "levels must be >= 1");
  }
}

// round(a * b / c) for non-negative integers, ties up.
int ScaleRound(std::int64_t a, std::int64_t b, std::int64_t c) {
  return static_cast<int>((2 * a * b + c) / (2 * c));
}

}  // namespace

int RoundHalfUp(double x) { return static_cast<int>(std::floor(x + 0.5)); }

std::vector<int> PatchSides(int width, int height, int levels) {
  CheckLayoutArgs(width, height, levels);
  std::vector<int> sides;
  sides.reserve(levels);
  for (int l = 1; l <= levels; ++l) {
    const double w_l = 2.0 * width / (l + 1);
    const double h_l = 2.0 * height / (l + 1);
    sides.push_back(std::max(1, RoundHalfUp(std::max(w_l, h_l))));
  }
  return sides;
}

PatchLayout MakePatchLayout(int width, int height, int levels) {
  const std::vector<int> sides = PatchSides(width, height, levels);
  PatchLayout layout;
  layout.width = width;
  layout.height = height;
  layout.levels = levels;
  layout.patches.reserve(PatchCount(levels));

  for (int l = 1; l <= levels; ++l) {
    const double w_l = 2.0 * width / (l + 1);
    const double h_l = 2.0 * height / (l + 1);
    const double step_x = l == 1 ? 0.0 : (width - w_l) / (l - 1);
    const double step_y = l == 1 ? 0.0 : (height - h_l) / (l - 1);
    const int side = sides[l - 1];
    for (int i = 1; i <= l; ++i) {
      for (int j = 1; j <= l; ++j) {
        double cx = w_l / 2 + (i - 1) * step_x;
        double cy = h_l / 2 + (j - 1) * step_y;
        if (l == 1) {
          cx = width / 2.0;
          cy = height / 2.0;
        }
        const int x0 = RoundHalfUp(cx - side / 2.0);
        const int y0 = RoundHalfUp(cy - side / 2.0);
        PatchRect rect;
        rect.id = {l, i, j};
        rect.x0 = std::clamp(x0, 0, width - 1);
        rect.y0 = std::clamp(y0, 0, height - 1);
        rect.x1 = std::clamp(x0 + side, rect.x0 + 1, width);
        rect.y1 = std::clamp(y0 + side, rect.y0 + 1, height);
        layout.patches.push_back(rect);
      }
    }
  }
  return layout;
}

CellRect MapToFeatureCoords(const PatchRect& rect, int image_width,
                            int image_height, int map_width, int map_height) {
  if (image_width < 1 || image_height < 1 || map_width < 1 ||
      map_height < 1) {
    throw Error(ErrorKind::kZeroDimension, "image and map must be >= 1x1");
  }
  auto axis = [](int lo, int hi, int image_extent, int map_extent) {
    int a = ScaleRound(std::clamp(lo, 0, image_extent), map_extent,
                       image_extent);
    int b = ScaleRound(std::clamp(hi, 0, image_extent), map_extent,
                       image_extent);
    a = std::min(a, map_extent - 1);
    b = std::clamp(b, a + 1, map_extent);
    return std::pair{a, b};
  };
  const auto [x0, x1] = axis(rect.x0, rect.x1, image_width, map_width);
  const auto [y0, y1] = axis(rect.y0, rect.y1, image_height, map_height);
  return {x0, y0, x1, y1};
}

}  // namespace patchdex
