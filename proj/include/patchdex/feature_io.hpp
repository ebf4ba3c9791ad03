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

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "patchdex/types.hpp"

namespace patchdex {

struct WhiteningModel;

// RMAP: "RMAP" | u32 version=1 | u32 width | u32 height | u32 channels |
// u32 scale_level | float32 payload[w*h*C]. Little-endian throughout.
inline constexpr std::size_t kRmapHeaderBytes = 24;
inline constexpr std::uint32_t kFormatVersion = 1;

/// Writes map as RMAP and returns the number of bytes emitted. The map is
/// validated first, so nothing is written for an invalid map.
std::uint64_t WriteResponseMap(const ResponseMap& map, std::ostream& out);

/// Reads one RMAP. The image id is not part of the format; pass it in.
ResponseMap ReadResponseMap(std::istream& in, std::string image_id = {});

/// "<image_id>.s<level>.rmap"
std::string ResponseMapFileName(std::string_view image_id, int scale_level);
/// "<image_id>.p<index>.rmap", one pre-cropped map per patch in (l,i,j) order.
std::string PatchMapFileName(std::string_view image_id, int patch_index);

void WriteResponseMapFile(const ResponseMap& map,
                          const std::filesystem::path& path);
/// Reads a file named per ResponseMapFileName and fills in image_id from the
/// name.
ResponseMap ReadResponseMapFile(const std::filesystem::path& path);

// FSET: "FSET" | u32 version | u32 id_len | id bytes | u32 L | u32 g | u32 C |
// u32 count | float32 vectors[count * g*g*C] in (l,i,j) order.
void WriteFeatureSet(const PatchFeatureSet& set, std::ostream& out);
PatchFeatureSet ReadFeatureSet(std::istream& in);
void WriteFeatureSetFile(const PatchFeatureSet& set,
                         const std::filesystem::path& path);
PatchFeatureSet ReadFeatureSetFile(const std::filesystem::path& path);

// WMDL: "WMDL" | u32 version | u32 input_dim | u32 kept_dim | f64 eps |
// f64 mean[input_dim] | f64 eigenvalues[kept_dim] |
// f64 projection[kept_dim * input_dim] row-major.
void WriteWhiteningModel(const WhiteningModel& model, std::ostream& out);
WhiteningModel ReadWhiteningModel(std::istream& in);
void WriteWhiteningModelFile(const WhiteningModel& model,
                             const std::filesystem::path& path);
WhiteningModel ReadWhiteningModelFile(const std::filesystem::path& path);

/// Supplies maps for an image: `levels` scale maps, or with per_patch the
/// PatchCount(levels) pre-cropped maps in (l, i, j) order.
using MapSource = std::function<std::vector<ResponseMap>(
    const std::string& image_id, int levels, bool per_patch)>;

/// Reads `<id>.s<l>.rmap` / `<id>.p<k>.rmap` from a directory.
MapSource DirectoryMapSource(std::filesystem::path dir);

enum class Role { kReference, kQuery, kTrain };
enum class Relevance { kGood, kOk, kJunk, kNegative };

std::string_view ToString(Role role);
std::string_view ToString(Relevance relevance);

struct PixelRect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool operator==(const PixelRect&) const = default;
};

struct ImageEntry {
  std::string id;
  Role role = Role::kReference;
  // Reference entries only: query id -> label. Absent queries are negative.
  std::map<std::string, Relevance> relevance;
  // Query entries only.
  std::optional<PixelRect> bbox;
  // Pixel size of the (resized) image the maps were computed from. When
  // absent, the size is inferred from the level-1 map.
  std::optional<int> width;
  std::optional<int> height;
};

struct DatasetManifest {
  std::string dataset_name;
  std::vector<ImageEntry> images;
  int resize_area = 360000;
  int levels_reference = 4;
  int levels_query = 3;
  int pool_grid = 1;

  std::vector<const ImageEntry*> WithRole(Role role) const;
  /// reference id -> label for one query; references not mentioning the
  /// query are negative.
  std::map<std::string, Relevance> LabelsFor(std::string_view query_id) const;
};

DatasetManifest ParseManifest(std::string_view json_text);
DatasetManifest LoadManifest(std::istream& in);
DatasetManifest LoadManifestFile(const std::filesystem::path& path);
std::string SerializeManifest(const DatasetManifest& manifest);
void SaveManifestFile(const DatasetManifest& manifest,
                      const std::filesystem::path& path);

}  // namespace patchdex
