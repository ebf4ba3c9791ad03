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
#include "patchdex/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "patchdex/error.hpp"

namespace patchdex {
namespace {

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t Mix(std::uint64_t a, std::uint64_t b) {
  return SplitMix64(a ^ SplitMix64(b));
}

std::string Id(char prefix, int k) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%c%04d", prefix, k);
  return buf;
}

// Sparse non-negative pattern: a random subset of channels with |N(0,1)|
// magnitudes, scaled to unit norm and then by `gain`.
std::vector<float> RandomPattern(std::mt19937_64& rng, int channels,
                                 double density, double gain) {
  const int active = std::clamp(
      static_cast<int>(std::lround(channels * density)), 1, channels);
  std::vector<int> order(channels);
  std::iota(order.begin(), order.end(), 0);
  std::normal_distribution<double> normal;
  std::vector<double> v(channels, 0.0);
  for (int k = 0; k < active; ++k) {
    std::uniform_int_distribution<int> pick(k, channels - 1);
    std::swap(order[k], order[pick(rng)]);
    v[order[k]] = std::abs(normal(rng)) + 0.1;
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  std::vector<float> out(channels);
  for (int c = 0; c < channels; ++c) {
    out[c] = static_cast<float>(gain * v[c] / norm);
  }
  return out;
}

SceneObject Block(double x0, double y0, double x1, double y1,
                  std::vector<float> pattern) {
  return SceneObject{x0, y0, x1, y1, std::move(pattern)};
}

void AddClutter(Scene& scene, const SynthSpec& spec, std::mt19937_64& rng) {
  const int t = spec.clutter_grid;
  for (int ty = 0; ty < t; ++ty) {
    for (int tx = 0; tx < t; ++tx) {
      scene.objects.push_back(
          Block(double(tx) * scene.width / t, double(ty) * scene.height / t,
                double(tx + 1) * scene.width / t,
                double(ty + 1) * scene.height / t,
                RandomPattern(rng, spec.channels, spec.pattern_density,
                              spec.gain)));
    }
  }
}

// Renders the scene region [rx0, rx0 + rw) x [ry0, ry0 + rh) onto a
// cols x rows grid, sampling at cell centers.
ResponseMap Render(const Scene& scene, double rx0, double ry0, double rw,
                   double rh, int cols, int rows, int channels, double sigma,
                   std::uint64_t seed) {
  ResponseMap map;
  map.image_id = scene.image_id;
  map.width = static_cast<std::uint32_t>(cols);
  map.height = static_cast<std::uint32_t>(rows);
  map.channels = static_cast<std::uint32_t>(channels);
  map.values.assign(map.size(), 0.0f);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  for (int y = 0; y < rows; ++y) {
    const double cy = ry0 + (y + 0.5) * rh / rows;
    for (int x = 0; x < cols; ++x) {
      const double cx = rx0 + (x + 0.5) * rw / cols;
      const SceneObject* top = nullptr;
      for (auto it = scene.objects.rbegin(); it != scene.objects.rend(); ++it) {
        if (cx >= it->x0 && cx < it->x1 && cy >= it->y0 && cy < it->y1) {
          top = &*it;
          break;
        }
      }
      float* cell = &map.at(std::uint32_t(x), std::uint32_t(y), 0);
      for (int c = 0; c < channels; ++c) {
        const double base = top ? top->pattern[c] : 0.0;
        cell[c] = static_cast<float>(base + sigma * normal(rng));
      }
    }
  }
  return map;
}

}  // namespace

void Validate(const SynthSpec& spec) {
  if (spec.n_instances < 1 || spec.refs_per_instance < 1 ||
      spec.n_queries < 1 || spec.channels < 1 || spec.levels < 1 ||
      spec.image_width < 1 || spec.image_height < 1 || spec.base_cells < 1) {
    throw Error(ErrorKind::kInvariant, "synth counts and sizes must be >= 1");
  }
  if (spec.n_distractors < 0 || spec.n_train < 0 || spec.clutter_grid < 0) {
    throw Error(ErrorKind::kInvariant, "synth optional counts must be >= 0");
  }
  if (!(spec.sigma >= 0.0) || !(spec.gain >= 0.0)) {
    throw Error(ErrorKind::kInvariant, "sigma and gain must be >= 0");
  }
  if (!(spec.pattern_density > 0.0 && spec.pattern_density <= 1.0)) {
    throw Error(ErrorKind::kInvariant, "pattern density must be in (0, 1]");
  }
}

ResponseMap RenderScaleMap(const Scene& scene, int level, int channels,
                           int base_cells, double sigma) {
  const int side = PatchSides(scene.width, scene.height, level).back();
  const int cols = std::max(1, RoundHalfUp(double(scene.width) * base_cells / side));
  const int rows =
      std::max(1, RoundHalfUp(double(scene.height) * base_cells / side));
  ResponseMap map = Render(scene, 0, 0, scene.width, scene.height, cols, rows,
                           channels, sigma,
                           Mix(scene.noise_seed, std::uint64_t(level)));
  map.scale_level = static_cast<std::uint32_t>(level);
  return map;
}

std::vector<ResponseMap> RenderPatchMaps(const Scene& scene,
                                         const PatchLayout& layout,
                                         int channels, int base_cells,
                                         double sigma) {
  std::vector<ResponseMap> maps;
  maps.reserve(layout.patches.size());
  for (const PatchRect& rect : layout.patches) {
    const double aspect = double(rect.width()) / rect.height();
    const int cols = std::max(1, RoundHalfUp(base_cells * std::sqrt(aspect)));
    const int rows = std::max(1, RoundHalfUp(base_cells / std::sqrt(aspect)));
    std::uint64_t seed = scene.noise_seed;
    for (int v : {rect.x0, rect.y0, rect.x1, rect.y1}) {
      seed = Mix(seed, std::uint64_t(v) + 0x1000);
    }
    ResponseMap map = Render(scene, rect.x0, rect.y0, rect.width(),
                             rect.height(), cols, rows, channels, sigma, seed);
    map.scale_level = static_cast<std::uint32_t>(rect.id.level);
    maps.push_back(std::move(map));
  }
  return maps;
}

SynthDataset GenerateSynthDataset(const SynthSpec& spec) {
  Validate(spec);
  SynthDataset out;
  out.spec = spec;
  std::mt19937_64 rng(SplitMix64(spec.seed));
  const int w = spec.image_width;
  const int h = spec.image_height;

  std::vector<std::vector<float>> signatures;
  signatures.reserve(spec.n_instances);
  for (int k = 0; k < spec.n_instances; ++k) {
    signatures.push_back(
        RandomPattern(rng, spec.channels, spec.pattern_density, spec.gain));
  }

  DatasetManifest& m = out.manifest;
  m.dataset_name = "synth-" + std::to_string(spec.seed);
  m.levels_reference = spec.levels;
  m.levels_query = std::min(3, spec.levels);
  m.resize_area = w * h;

  auto new_scene = [&](const std::string& id) {
    Scene s;
    s.image_id = id;
    s.width = w;
    s.height = h;
    s.noise_seed = rng();
    return s;
  };
  auto add_entry = [&](const std::string& id, Role role) -> ImageEntry& {
    ImageEntry e;
    e.id = id;
    e.role = role;
    e.width = w;
    e.height = h;
    m.images.push_back(std::move(e));
    return m.images.back();
  };

  // Queries, instance q % n_instances.
  std::vector<std::vector<std::string>> queries_of(spec.n_instances);
  for (int q = 0; q < spec.n_queries; ++q) {
    const int inst = q % spec.n_instances;
    Scene s = new_scene(Id('q', q));
    if (spec.query_placement == QueryPlacement::kFull) {
      s.objects.push_back(Block(0, 0, w, h, signatures[inst]));
    } else {
      AddClutter(s, spec, rng);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      const double bw = 0.6 * w;
      const double bh = 0.6 * h;
      // Shift toward a random corner so the block is never centered.
      const double x0 = u(rng) < 0.5 ? 0.0 : w - bw;
      const double y0 = u(rng) < 0.5 ? 0.0 : h - bh;
      s.objects.push_back(Block(x0, y0, x0 + bw, y0 + bh, signatures[inst]));
    }
    queries_of[inst].push_back(s.image_id);
    add_entry(s.image_id, Role::kQuery);
    out.scenes.push_back(std::move(s));
  }

  const PatchLayout layout = MakePatchLayout(w, h, spec.levels);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int inst = 0; inst < spec.n_instances; ++inst) {
    for (int k = 0; k < spec.refs_per_instance; ++k) {
      Scene s = new_scene(Id('r', inst * spec.refs_per_instance + k));
      AddClutter(s, spec, rng);
      const double side_min = std::min(w, h);
      switch (spec.planting) {
        case Planting::kSmaller: {
          const int lo = std::min(2, spec.levels);
          std::uniform_int_distribution<int> pick_level(lo, spec.levels);
          const int l = pick_level(rng);
          std::uniform_int_distribution<int> pick(1, l);
          const int i = pick(rng);
          const int j = pick(rng);
          const PatchRect& rect =
              layout.patches[PatchCount(l - 1) + (i - 1) * l + (j - 1)];
          s.objects.push_back(
              Block(rect.x0, rect.y0, rect.x1, rect.y1, signatures[inst]));
          break;
        }
        case Planting::kBigger:
          s.objects.push_back(Block(0, 0, w, h, signatures[inst]));
          break;
        case Planting::kTranslated: {
          const double side = side_min * (0.25 + 0.25 * unit(rng));
          const double x0 = unit(rng) * (w - side);
          const double y0 = unit(rng) * (h - side);
          s.objects.push_back(
              Block(x0, y0, x0 + side, y0 + side, signatures[inst]));
          break;
        }
        case Planting::kPartial: {
          const double side = side_min * (0.3 + 0.3 * unit(rng));
          double x0 = unit(rng) * (w - side);
          double y0 = unit(rng) * (h - side);
          // A third of the block hangs over one random border.
          switch (static_cast<int>(unit(rng) * 4)) {
            case 0: x0 = -side / 3; break;
            case 1: x0 = w - 2 * side / 3; break;
            case 2: y0 = -side / 3; break;
            default: y0 = h - 2 * side / 3; break;
          }
          s.objects.push_back(
              Block(x0, y0, x0 + side, y0 + side, signatures[inst]));
          break;
        }
      }
      ImageEntry& e = add_entry(s.image_id, Role::kReference);
      for (const std::string& q : queries_of[inst]) {
        e.relevance[q] = Relevance::kGood;
      }
      out.scenes.push_back(std::move(s));
    }
  }
  for (int k = 0; k < spec.n_distractors; ++k) {
    Scene s = new_scene(Id('d', k));
    AddClutter(s, spec, rng);
    add_entry(s.image_id, Role::kReference);
    out.scenes.push_back(std::move(s));
  }
  for (int k = 0; k < spec.n_train; ++k) {
    Scene s = new_scene(Id('t', k));
    AddClutter(s, spec, rng);
    add_entry(s.image_id, Role::kTrain);
    out.scenes.push_back(std::move(s));
  }

  for (const Scene& s : out.scenes) {
    auto& maps = out.scale_maps[s.image_id];
    for (int l = 1; l <= spec.levels; ++l) {
      maps.push_back(
          RenderScaleMap(s, l, spec.channels, spec.base_cells, spec.sigma));
    }
  }
  return out;
}

void WriteSynthDataset(const SynthDataset& dataset,
                       const std::filesystem::path& dir, bool per_patch) {
  std::filesystem::create_directories(dir);
  SaveManifestFile(dataset.manifest, dir / "manifest.json");
  for (const auto& [id, maps] : dataset.scale_maps) {
    for (const ResponseMap& map : maps) {
      WriteResponseMapFile(map, dir / ResponseMapFileName(id, int(map.scale_level)));
    }
  }
  if (!per_patch) return;
  const SynthSpec& spec = dataset.spec;
  for (std::size_t k = 0; k < dataset.scenes.size(); ++k) {
    const Scene& s = dataset.scenes[k];
    const bool query = dataset.manifest.images[k].role == Role::kQuery;
    const int levels = query ? dataset.manifest.levels_query
                             : dataset.manifest.levels_reference;
    const auto maps =
        RenderPatchMaps(s, MakePatchLayout(s.width, s.height, levels),
                        spec.channels, spec.base_cells, spec.sigma);
    for (std::size_t p = 0; p < maps.size(); ++p) {
      WriteResponseMapFile(maps[p], dir / PatchMapFileName(s.image_id, int(p)));
    }
  }
}

MapSource InMemoryMapSource(const SynthDataset& dataset) {
  return [&dataset](const std::string& image_id, int levels, bool per_patch) {
    const auto it = std::find_if(
        dataset.scenes.begin(), dataset.scenes.end(),
        [&](const Scene& s) { return s.image_id == image_id; });
    if (it == dataset.scenes.end()) {
      throw Error(ErrorKind::kIo, "no synthetic image '" + image_id + "'");
    }
    const SynthSpec& spec = dataset.spec;
    if (per_patch) {
      return RenderPatchMaps(*it, MakePatchLayout(it->width, it->height, levels),
                             spec.channels, spec.base_cells, spec.sigma);
    }
    const auto& stored = dataset.scale_maps.at(image_id);
    std::vector<ResponseMap> maps;
    for (int l = 1; l <= levels; ++l) {
      maps.push_back(l <= int(stored.size())
                         ? stored[l - 1]
                         : RenderScaleMap(*it, l, spec.channels,
                                          spec.base_cells, spec.sigma));
    }
    return maps;
  };
}

}  // namespace patchdex
