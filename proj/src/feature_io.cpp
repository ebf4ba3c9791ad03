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
#include "patchdex/feature_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "patchdex/error.hpp"
#include "patchdex/whitening.hpp"

namespace patchdex {
namespace {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian platforms are not supported");

constexpr std::size_t kReadChunk = std::size_t{1} << 20;
// Refuse headers describing more than 2^31 values before allocating.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 31;

class ByteWriter {
 public:
  explicit ByteWriter(std::ostream& out) : out_(out) {}

  void Bytes(const void* data, std::size_t n) {
    out_.write(static_cast<const char*>(data),
               static_cast<std::streamsize>(n));
    if (!out_) throw Error(ErrorKind::kIo, "write failed");
    count_ += n;
  }
  void U32(std::uint32_t v) {
    unsigned char b[4];
    for (int k = 0; k < 4; ++k) b[k] = static_cast<unsigned char>(v >> (8 * k));
    Bytes(b, 4);
  }
  void U64(std::uint64_t v) {
    unsigned char b[8];
    for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(v >> (8 * k));
    Bytes(b, 8);
  }
  void F32(float v) { U32(std::bit_cast<std::uint32_t>(v)); }
  void F64(double v) { U64(std::bit_cast<std::uint64_t>(v)); }

  void F32s(const std::vector<float>& values) {
    if constexpr (std::endian::native == std::endian::little) {
      Bytes(values.data(), values.size() * sizeof(float));
    } else {
      for (float v : values) F32(v);
    }
  }
  void F64s(const std::vector<double>& values) {
    for (double v : values) F64(v);
  }

  std::uint64_t count() const { return count_; }

 private:
  std::ostream& out_;
  std::uint64_t count_ = 0;
};

class ByteReader {
 public:
  ByteReader(std::istream& in, std::string_view what) : in_(in), what_(what) {}

  void Bytes(void* data, std::size_t n) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw Error(ErrorKind::kTruncated, std::string(what_) + ": expected " +
                                             std::to_string(n) +
                                             " more bytes");
    }
  }
  void Magic(std::string_view magic) {
    char got[4] = {};
    in_.read(got, 4);
    if (in_.gcount() != 4 || std::memcmp(got, magic.data(), 4) != 0) {
      throw Error(ErrorKind::kBadMagic,
                  std::string(what_) + ": missing " + std::string(magic) +
                      " magic");
    }
  }
  std::uint32_t U32() {
    unsigned char b[4];
    Bytes(b, 4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= std::uint32_t{b[k]} << (8 * k);
    return v;
  }
  std::uint64_t U64() {
    unsigned char b[8];
    Bytes(b, 8);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= std::uint64_t{b[k]} << (8 * k);
    return v;
  }
  double F64() { return std::bit_cast<double>(U64()); }
  void Version() {
    const std::uint32_t version = U32();
    if (version != kFormatVersion) {
      throw Error(ErrorKind::kBadVersion,
                  std::string(what_) + ": version " + std::to_string(version));
    }
  }

  // Reads in chunks so a lying header fails on truncation instead of on a
  // giant allocation.
  std::vector<float> F32s(std::uint64_t n) {
    std::vector<float> out;
    std::uint64_t done = 0;
    while (done < n) {
      const std::size_t step =
          static_cast<std::size_t>(std::min<std::uint64_t>(n - done, kReadChunk));
      out.resize(static_cast<std::size_t>(done) + step);
      Bytes(out.data() + done, step * sizeof(float));
      done += step;
    }
    if constexpr (std::endian::native == std::endian::big) {
      for (float& v : out) {
        const auto u = std::bit_cast<std::uint32_t>(v);
        v = std::bit_cast<float>((u >> 24) | ((u >> 8) & 0xff00u) |
                                 ((u << 8) & 0xff0000u) | (u << 24));
      }
    }
    return out;
  }
  std::vector<double> F64s(std::uint64_t n) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(n, kReadChunk)));
    for (std::uint64_t k = 0; k < n; ++k) out.push_back(F64());
    return out;
  }

 private:
  std::istream& in_;
  std::string_view what_;
};

void CheckFinite(const std::vector<float>& values, std::string_view what) {
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!std::isfinite(values[k])) {
      throw Error(ErrorKind::kNonFinite, std::string(what) +
                                             ": non-finite value at index " +
                                             std::to_string(k));
    }
  }
}

std::uint64_t CheckedProduct(std::initializer_list<std::uint64_t> dims,
                             std::string_view what) {
  std::uint64_t product = 1;
  for (std::uint64_t d : dims) {
    if (d != 0 && product > kMaxElements / d) {
      throw Error(ErrorKind::kInvariant,
                  std::string(what) + ": dimensions too large");
    }
    product *= d;
  }
  return product;
}

std::ofstream OpenOut(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  return out;
}

std::ifstream OpenIn(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  return in;
}

// Writes to a sibling temp file and renames, so readers never observe a
// partial file.
template <typename WriteFn>
void AtomicWrite(const std::filesystem::path& path, WriteFn&& write) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out = OpenOut(tmp);
    write(out);
    out.flush();
    if (!out) throw Error(ErrorKind::kIo, "write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

void Validate(const ResponseMap& map) {
  if (map.width == 0 || map.height == 0 || map.channels == 0) {
    throw Error(ErrorKind::kZeroDimension,
                "response map '" + map.image_id + "' has a zero dimension");
  }
  if (map.scale_level == 0) {
    throw Error(ErrorKind::kInvariant, "scale level must be >= 1");
  }
  const std::uint64_t expected =
      CheckedProduct({map.width, map.height, map.channels}, "response map");
  if (map.values.size() != expected) {
    throw Error(ErrorKind::kInvariant,
                "response map '" + map.image_id + "' holds " +
                    std::to_string(map.values.size()) + " values, expected " +
                    std::to_string(expected));
  }
  CheckFinite(map.values, "response map '" + map.image_id + "'");
}

std::uint64_t WriteResponseMap(const ResponseMap& map, std::ostream& out) {
  Validate(map);
  ByteWriter w(out);
  w.Bytes("RMAP", 4);
  w.U32(kFormatVersion);
  w.U32(map.width);
  w.U32(map.height);
  w.U32(map.channels);
  w.U32(map.scale_level);
  w.F32s(map.values);
  return w.count();
}

ResponseMap ReadResponseMap(std::istream& in, std::string image_id) {
  ByteReader r(in, "RMAP");
  r.Magic("RMAP");
  r.Version();
  ResponseMap map;
  map.image_id = std::move(image_id);
  map.width = r.U32();
  map.height = r.U32();
  map.channels = r.U32();
  map.scale_level = r.U32();
  if (map.width == 0 || map.height == 0 || map.channels == 0) {
    throw Error(ErrorKind::kZeroDimension, "RMAP header has a zero dimension");
  }
  if (map.scale_level == 0) {
    throw Error(ErrorKind::kInvariant, "RMAP scale level must be >= 1");
  }
  map.values =
      r.F32s(CheckedProduct({map.width, map.height, map.channels}, "RMAP"));
  CheckFinite(map.values, "RMAP payload");
  return map;
}

std::string ResponseMapFileName(std::string_view image_id, int scale_level) {
  return std::string(image_id) + ".s" + std::to_string(scale_level) + ".rmap";
}

std::string PatchMapFileName(std::string_view image_id, int patch_index) {
  return std::string(image_id) + ".p" + std::to_string(patch_index) + ".rmap";
}

void WriteResponseMapFile(const ResponseMap& map,
                          const std::filesystem::path& path) {
  Validate(map);
  AtomicWrite(path, [&](std::ostream& out) { WriteResponseMap(map, out); });
}

ResponseMap ReadResponseMapFile(const std::filesystem::path& path) {
  std::ifstream in = OpenIn(path);
  // "<id>.s<l>.rmap" -> "<id>"; ids may themselves contain dots.
  std::string stem = path.filename().string();
  if (stem.ends_with(".rmap")) stem.resize(stem.size() - 5);
  if (const auto dot = stem.rfind('.'); dot != std::string::npos) {
    stem.resize(dot);
  }
  return ReadResponseMap(in, stem);
}

void WriteFeatureSet(const PatchFeatureSet& set, std::ostream& out) {
  const std::size_t dim = std::size_t(set.grid) * set.grid * set.channels;
  if (set.levels < 1 || set.grid < 1 || set.channels == 0) {
    throw Error(ErrorKind::kZeroDimension, "feature set '" + set.image_id +
                                               "' has a zero dimension");
  }
  if (set.vectors.size() != std::size_t(PatchCount(set.levels))) {
    throw Error(ErrorKind::kInvariant,
                "feature set '" + set.image_id + "' holds " +
                    std::to_string(set.vectors.size()) + " vectors for L=" +
                    std::to_string(set.levels));
  }
  ByteWriter w(out);
  w.Bytes("FSET", 4);
  w.U32(kFormatVersion);
  w.U32(static_cast<std::uint32_t>(set.image_id.size()));
  w.Bytes(set.image_id.data(), set.image_id.size());
  w.U32(static_cast<std::uint32_t>(set.levels));
  w.U32(static_cast<std::uint32_t>(set.grid));
  w.U32(set.channels);
  w.U32(static_cast<std::uint32_t>(set.vectors.size()));
  for (const FeatureVector& v : set.vectors) {
    if (v.size() != dim) {
      throw Error(ErrorKind::kDimensionMismatch,
                  "feature set '" + set.image_id + "': vector of length " +
                      std::to_string(v.size()) + ", expected " +
                      std::to_string(dim));
    }
    CheckFinite(v.values, "feature set '" + set.image_id + "'");
    w.F32s(v.values);
  }
}

PatchFeatureSet ReadFeatureSet(std::istream& in) {
  ByteReader r(in, "FSET");
  r.Magic("FSET");
  r.Version();
  PatchFeatureSet set;
  const std::uint32_t id_len = r.U32();
  if (id_len > 4096) throw Error(ErrorKind::kInvariant, "FSET id too long");
  set.image_id.resize(id_len);
  r.Bytes(set.image_id.data(), id_len);
  set.levels = static_cast<int>(r.U32());
  set.grid = static_cast<int>(r.U32());
  set.channels = r.U32();
  const std::uint32_t count = r.U32();
  if (set.levels == 0 || set.grid == 0 || set.channels == 0) {
    throw Error(ErrorKind::kZeroDimension, "FSET header has a zero dimension");
  }
  if (set.levels > 64 || count != std::uint32_t(PatchCount(set.levels))) {
    throw Error(ErrorKind::kInvariant, "FSET vector count " +
                                           std::to_string(count) +
                                           " does not match L");
  }
  const std::uint64_t dim =
      CheckedProduct({std::uint64_t(set.grid), std::uint64_t(set.grid),
                      set.channels}, "FSET");
  CheckedProduct({dim, count}, "FSET");
  set.vectors.reserve(count);
  for (int l = 1; l <= set.levels; ++l) {
    for (int i = 1; i <= l; ++i) {
      for (int j = 1; j <= l; ++j) {
        FeatureVector v;
        v.values = r.F32s(dim);
        CheckFinite(v.values, "FSET payload");
        v.patch = {l, i, j};
        double norm2 = 0.0;
        for (float x : v.values) norm2 += double(x) * x;
        v.normalized = true;
        v.degenerate = norm2 == 0.0;
        set.vectors.push_back(std::move(v));
      }
    }
  }
  return set;
}

void WriteFeatureSetFile(const PatchFeatureSet& set,
                         const std::filesystem::path& path) {
  AtomicWrite(path, [&](std::ostream& out) { WriteFeatureSet(set, out); });
}

PatchFeatureSet ReadFeatureSetFile(const std::filesystem::path& path) {
  std::ifstream in = OpenIn(path);
  return ReadFeatureSet(in);
}

void WriteWhiteningModel(const WhiteningModel& model, std::ostream& out) {
  if (model.mean.size() != model.input_dim ||
      model.eigenvalues.size() != model.kept_dim ||
      model.projection.size() !=
          std::size_t(model.kept_dim) * model.input_dim) {
    throw Error(ErrorKind::kInvariant, "whitening model arrays inconsistent");
  }
  ByteWriter w(out);
  w.Bytes("WMDL", 4);
  w.U32(kFormatVersion);
  w.U32(model.input_dim);
  w.U32(model.kept_dim);
  w.F64(model.eps);
  w.F64s(model.mean);
  w.F64s(model.eigenvalues);
  w.F64s(model.projection);
}

WhiteningModel ReadWhiteningModel(std::istream& in) {
  ByteReader r(in, "WMDL");
  r.Magic("WMDL");
  r.Version();
  WhiteningModel model;
  model.input_dim = r.U32();
  model.kept_dim = r.U32();
  if (model.input_dim == 0 || model.kept_dim == 0) {
    throw Error(ErrorKind::kZeroDimension, "WMDL header has a zero dimension");
  }
  if (model.kept_dim > model.input_dim) {
    throw Error(ErrorKind::kInvariant, "WMDL kept_dim exceeds input_dim");
  }
  CheckedProduct({model.input_dim, model.kept_dim}, "WMDL");
  model.eps = r.F64();
  model.mean = r.F64s(model.input_dim);
  model.eigenvalues = r.F64s(model.kept_dim);
  model.projection = r.F64s(std::uint64_t{model.kept_dim} * model.input_dim);
  return model;
}

void WriteWhiteningModelFile(const WhiteningModel& model,
                             const std::filesystem::path& path) {
  AtomicWrite(path, [&](std::ostream& out) { WriteWhiteningModel(model, out); });
}

WhiteningModel ReadWhiteningModelFile(const std::filesystem::path& path) {
  std::ifstream in = OpenIn(path);
  return ReadWhiteningModel(in);
}

MapSource DirectoryMapSource(std::filesystem::path dir) {
  return [dir = std::move(dir)](const std::string& image_id, int levels,
                                bool per_patch) {
    std::vector<ResponseMap> maps;
    const int count = per_patch ? PatchCount(levels) : levels;
    maps.reserve(count);
    for (int k = 0; k < count; ++k) {
      const std::string name = per_patch ? PatchMapFileName(image_id, k)
                                         : ResponseMapFileName(image_id, k + 1);
      maps.push_back(ReadResponseMapFile(dir / name));
      maps.back().image_id = image_id;
      if (!per_patch && int(maps.back().scale_level) != k + 1) {
        throw Error(ErrorKind::kInvariant,
                    name + " carries scale level " +
                        std::to_string(maps.back().scale_level));
      }
    }
    return maps;
  };
}

// ---------------------------------------------------------------------------
// Manifest

std::string_view ToString(Role role) {
  switch (role) {
    case Role::kReference: return "reference";
    case Role::kQuery: return "query";
    case Role::kTrain: return "train";
  }
  return "reference";
}

std::string_view ToString(Relevance relevance) {
  switch (relevance) {
    case Relevance::kGood: return "good";
    case Relevance::kOk: return "ok";
    case Relevance::kJunk: return "junk";
    case Relevance::kNegative: return "negative";
  }
  return "negative";
}

namespace {

Role ParseRole(const std::string& s) {
  if (s == "reference") return Role::kReference;
  if (s == "query") return Role::kQuery;
  if (s == "train") return Role::kTrain;
  throw Error(ErrorKind::kUnknownRole, "'" + s + "'");
}

Relevance ParseRelevance(const std::string& s) {
  if (s == "good") return Relevance::kGood;
  if (s == "ok") return Relevance::kOk;
  if (s == "junk") return Relevance::kJunk;
  if (s == "negative") return Relevance::kNegative;
  throw Error(ErrorKind::kBadRelevance, "unknown label '" + s + "'");
}

int PositiveInt(const nlohmann::json& doc, const char* key, int fallback) {
  if (!doc.contains(key)) return fallback;
  const int v = doc.at(key).get<int>();
  if (v < 1) {
    throw Error(ErrorKind::kInvariant, std::string(key) + " must be >= 1");
  }
  return v;
}

}  // namespace

std::vector<const ImageEntry*> DatasetManifest::WithRole(Role role) const {
  std::vector<const ImageEntry*> out;
  for (const ImageEntry& e : images) {
    if (e.role == role) out.push_back(&e);
  }
  return out;
}

std::map<std::string, Relevance> DatasetManifest::LabelsFor(
    std::string_view query_id) const {
  std::map<std::string, Relevance> labels;
  for (const ImageEntry& e : images) {
    if (e.role != Role::kReference) continue;
    const auto it = e.relevance.find(std::string(query_id));
    labels[e.id] = it == e.relevance.end() ? Relevance::kNegative : it->second;
  }
  return labels;
}

DatasetManifest ParseManifest(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, e.what());
  }
  DatasetManifest m;
  try {
    m.dataset_name = doc.value("dataset", std::string{});
    m.resize_area = PositiveInt(doc, "resize_area", m.resize_area);
    m.levels_reference =
        PositiveInt(doc, "levels_reference", m.levels_reference);
    m.levels_query = PositiveInt(doc, "levels_query", m.levels_query);
    m.pool_grid = PositiveInt(doc, "pool_grid", m.pool_grid);

    std::set<std::string> seen[3];
    for (const auto& item : doc.value("images", nlohmann::json::array())) {
      ImageEntry e;
      e.id = item.at("id").get<std::string>();
      e.role = ParseRole(item.at("role").get<std::string>());
      if (!seen[static_cast<int>(e.role)].insert(e.id).second) {
        throw Error(ErrorKind::kDuplicateId,
                    std::string(ToString(e.role)) + " id '" + e.id + "'");
      }
      if (item.contains("relevance")) {
        if (e.role != Role::kReference) {
          throw Error(ErrorKind::kBadRelevance,
                      "relevance labels on non-reference entry '" + e.id + "'");
        }
        for (const auto& [query, label] : item.at("relevance").items()) {
          e.relevance[query] = ParseRelevance(label.get<std::string>());
        }
      }
      if (item.contains("bbox")) {
        if (e.role != Role::kQuery) {
          throw Error(ErrorKind::kInvariant,
                      "bbox on non-query entry '" + e.id + "'");
        }
        const auto box = item.at("bbox").get<std::vector<int>>();
        if (box.size() != 4 || box[0] >= box[2] || box[1] >= box[3]) {
          throw Error(ErrorKind::kInvariant, "bad bbox on '" + e.id + "'");
        }
        e.bbox = PixelRect{box[0], box[1], box[2], box[3]};
      }
      if (item.contains("width")) e.width = item.at("width").get<int>();
      if (item.contains("height")) e.height = item.at("height").get<int>();
      if (e.width.has_value() != e.height.has_value() ||
          (e.width && (*e.width < 1 || *e.height < 1))) {
        throw Error(ErrorKind::kInvariant,
                    "width/height must be given together and be >= 1 on '" +
                        e.id + "'");
      }
      m.images.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, e.what());
  }
  return m;
}

DatasetManifest LoadManifest(std::istream& in) {
  std::stringstream buffer;
  buffer << in.rdbuf();
  return ParseManifest(buffer.str());
}

DatasetManifest LoadManifestFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  return LoadManifest(in);
}

std::string SerializeManifest(const DatasetManifest& m) {
  nlohmann::ordered_json doc;
  doc["dataset"] = m.dataset_name;
  doc["resize_area"] = m.resize_area;
  doc["levels_reference"] = m.levels_reference;
  doc["levels_query"] = m.levels_query;
  doc["pool_grid"] = m.pool_grid;
  auto images = nlohmann::ordered_json::array();
  for (const ImageEntry& e : m.images) {
    nlohmann::ordered_json item;
    item["id"] = e.id;
    item["role"] = std::string(ToString(e.role));
    if (!e.relevance.empty()) {
      nlohmann::ordered_json rel = nlohmann::ordered_json::object();
      for (const auto& [q, label] : e.relevance) {
        rel[q] = std::string(ToString(label));
      }
      item["relevance"] = rel;
    }
    if (e.bbox) {
      item["bbox"] = {e.bbox->x0, e.bbox->y0, e.bbox->x1, e.bbox->y1};
    }
    if (e.width) {
      item["width"] = *e.width;
      item["height"] = *e.height;
    }
    images.push_back(std::move(item));
  }
  doc["images"] = std::move(images);
  return doc.dump(2) + "\n";
}

void SaveManifestFile(const DatasetManifest& manifest,
                      const std::filesystem::path& path) {
  const std::string text = SerializeManifest(manifest);
  AtomicWrite(path, [&](std::ostream& out) { out << text; });
}

}  // namespace patchdex
