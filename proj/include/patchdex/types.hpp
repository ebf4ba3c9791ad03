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
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace patchdex {

/// Dense w x h x C activation tensor for one image at one scale.
/// Layout is row-major with channels fastest: index = (y * width + x) * C + c.
struct ResponseMap {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t channels = 0;
  std::uint32_t scale_level = 1;
  std::string image_id;
  std::vector<float> values;

  std::size_t size() const {
    return std::size_t{width} * height * channels;
  }
  float at(std::uint32_t x, std::uint32_t y, std::uint32_t c) const {
    return values[(std::size_t{y} * width + x) * channels + c];
  }
  float& at(std::uint32_t x, std::uint32_t y, std::uint32_t c) {
    return values[(std::size_t{y} * width + x) * channels + c];
  }

  bool operator==(const ResponseMap&) const = default;
};

/// Throws Error if the map violates its shape or finiteness invariants.
void Validate(const ResponseMap& map);

/// Grid position of a patch: level l >= 1; i (horizontal) and j (vertical)
/// in [1, l].
struct PatchId {
  int level = 1;
  int i = 1;
  int j = 1;

  auto operator<=>(const PatchId&) const = default;
};

struct FeatureVector {
  std::vector<float> values;
  PatchId patch;
  bool normalized = false;
  // Set when normalization met the zero vector.
  bool degenerate = false;

  std::span<const float> view() const { return values; }
  std::size_t size() const { return values.size(); }
};

/// Pooled, normalized vectors of one image in (l, i, j) order.
struct PatchFeatureSet {
  std::string image_id;
  int levels = 1;
  int grid = 1;
  std::uint32_t channels = 0;
  std::vector<FeatureVector> vectors;

  std::size_t dim() const {
    return vectors.empty() ? 0 : vectors.front().size();
  }
};

/// Sum of l^2 for l = 1..levels.
constexpr int PatchCount(int levels) {
  return levels * (levels + 1) * (2 * levels + 1) / 6;
}

}  // namespace patchdex
