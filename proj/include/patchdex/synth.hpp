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

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "patchdex/feature_io.hpp"
#include "patchdex/patch_geometry.hpp"
#include "patchdex/types.hpp"

namespace patchdex {

/// Where the instance sits in each reference image.
enum class Planting {
  kSmaller,     // exactly on a random layout patch of level >= 2
  kBigger,      // fills the whole reference; the query shows it small
  kTranslated,  // random size and position, off the patch grid
  kPartial,     // random block hanging over an image border
};

enum class QueryPlacement {
  kFull,       // signature over the whole query
  kOffCenter,  // signature over an off-center sub-block, clutter elsewhere
};

struct SynthSpec {
  std::uint64_t seed = 1;
  int n_instances = 20;
  int refs_per_instance = 5;
  int n_queries = 20;  // assigned to instances round-robin
  int n_distractors = 0;  // references holding no instance
  int n_train = 0;
  int channels = 64;
  double sigma = 0.1;
  int levels = 4;  // scale maps per image
  Planting planting = Planting::kSmaller;
  QueryPlacement query_placement = QueryPlacement::kFull;
  int image_width = 600;
  int image_height = 600;
  int base_cells = 8;    // cells across one patch side at its own level
  double gain = 4.0;     // amplitude of signature and clutter patterns
  int clutter_grid = 4;  // clutter tiles per image side; 0 disables clutter
  double pattern_density = 0.25;  // fraction of active channels per pattern
};

void Validate(const SynthSpec& spec);

/// A rectangle carrying one pattern. Later objects paint over earlier ones.
struct SceneObject {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  std::vector<float> pattern;
};

struct Scene {
  std::string image_id;
  int width = 0;
  int height = 0;
  std::uint64_t noise_seed = 0;
  std::vector<SceneObject> objects;
};

/// Level-l map of the whole scene, sized so the level-l patch side spans
/// `base_cells` cells. Cell value = pattern of the topmost object covering
/// the cell center (or 0) plus sigma * N(0, 1) noise.
ResponseMap RenderScaleMap(const Scene& scene, int level, int channels,
                           int base_cells, double sigma);

/// One map per patch of `layout`, each rescaled to about base_cells^2 cells.
/// Noise is seeded by the rectangle, so equal rectangles give equal maps.
std::vector<ResponseMap> RenderPatchMaps(const Scene& scene,
                                         const PatchLayout& layout,
                                         int channels, int base_cells,
                                         double sigma);

struct SynthDataset {
  SynthSpec spec;
  DatasetManifest manifest;
  std::vector<Scene> scenes;  // manifest order
  std::map<std::string, std::vector<ResponseMap>> scale_maps;
};

/// Deterministic for a fixed spec. Each instance gets a sparse non-negative
/// unit signature; references are cluttered scenes with the signature
/// planted per `planting`; queries carry it per `query_placement`.
SynthDataset GenerateSynthDataset(const SynthSpec& spec);

/// Writes manifest.json and every scale map under `dir`. With `per_patch`,
/// also writes one map per patch: references and train images at the
/// manifest's reference levels, queries at its query levels.
void WriteSynthDataset(const SynthDataset& dataset,
                       const std::filesystem::path& dir,
                       bool per_patch = false);

/// Serves the dataset's scale maps from memory; levels beyond the generated
/// ones and per-patch maps are rendered on demand.
MapSource InMemoryMapSource(const SynthDataset& dataset);

}  // namespace patchdex
