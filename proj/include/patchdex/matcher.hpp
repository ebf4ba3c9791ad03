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
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "patchdex/types.hpp"
#include "patchdex/whitening.hpp"

namespace patchdex {

/// How two patch sets are compared. kL2 takes per-query-patch minima of the
/// Euclidean distance and sums them; kSimilarity takes maxima of the inner
/// product instead; kHamming takes minima of code Hamming distances.
enum class Metric { kL2, kSimilarity, kHamming };

/// Euclidean distance between unit vectors. A degenerate (zero) vector is at
/// distance 2 from anything non-degenerate and 0 from another degenerate one.
double VectorDistance(const FeatureVector& a, const FeatureVector& b);
/// Inner product; -1 against a degenerate vector unless both are degenerate.
double VectorSimilarity(const FeatureVector& a, const FeatureVector& b);

/// min over reference patches of VectorDistance.
double PatchMinDistance(const FeatureVector& query_patch,
                        const PatchFeatureSet& reference);
double PatchMaxSimilarity(const FeatureVector& query_patch,
                          const PatchFeatureSet& reference);

/// Sum over query patches of PatchMinDistance. Not symmetric.
double ImageDistance(const PatchFeatureSet& query,
                     const PatchFeatureSet& reference);
double ImageSimilarity(const PatchFeatureSet& query,
                       const PatchFeatureSet& reference);

/// Patch set flattened to one contiguous block, the layout the kernels use.
struct PackedSet {
  std::string image_id;
  std::size_t count = 0;
  std::size_t dim = 0;
  std::vector<float> data;              // count x dim
  std::vector<std::uint8_t> degenerate;  // count
  // Quantized form, filled only for Metric::kHamming.
  std::size_t words_per_code = 0;
  std::vector<std::uint64_t> codes;  // count x words_per_code
};

PackedSet Pack(const PatchFeatureSet& set);
/// Packs sign codes of an already whitened set.
PackedSet PackQuantized(const PatchFeatureSet& whitened_set);

struct MatchOptions {
  Metric metric = Metric::kL2;
  int threads = 0;  // 0: OpenMP default
  // Working-set budget for one tile of reference sets.
  std::size_t memory_budget_bytes = std::size_t{64} << 20;
  // Drop a reference whose id equals the query id from that query's list.
  bool exclude_self = false;
};

/// Image-level score matrix, queries x references, row-major.
struct ScoreMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

/// OpenMP kernel: (query, reference-tile) blocks in parallel. Each entry is
/// computed by one thread in fixed patch order, so results are bit-identical
/// for any thread count.
ScoreMatrix ComputeScores(std::span<const PackedSet> queries,
                          std::span<const PackedSet> index,
                          const MatchOptions& options);
/// Plain nested-loop reference for ComputeScores.
ScoreMatrix ComputeScoresSerial(std::span<const PackedSet> queries,
                                std::span<const PackedSet> index,
                                Metric metric);

struct RankedEntry {
  std::string reference_id;
  double distance = 0.0;

  bool operator==(const RankedEntry&) const = default;
};

/// Best match first: ascending distance for kL2/kHamming, descending
/// similarity for kSimilarity; ties by reference id ascending.
struct RankedList {
  std::string query_id;
  std::vector<RankedEntry> entries;

  bool operator==(const RankedList&) const = default;
};

RankedList RankReferences(const PatchFeatureSet& query,
                          std::span<const PatchFeatureSet> index,
                          const MatchOptions& options = {});

/// Ranks every query against the index.
std::vector<RankedList> RankAll(std::span<const PackedSet> queries,
                                std::span<const PackedSet> index,
                                const MatchOptions& options);

/// Full sub-patch distance matrix (all query patches x all reference
/// patches) as "DMAT" | u32 rows | u32 cols | float32 row-major.
void WritePatchDistanceMatrix(std::span<const PackedSet> queries,
                              std::span<const PackedSet> index,
                              std::ostream& out);

/// TSV lines "query_id\treference_id\trank\tdistance", ranks 1-based.
void WriteRanksTsv(std::span<const RankedList> lists, std::ostream& out);
std::vector<RankedList> ReadRanksTsv(std::istream& in);

}  // namespace patchdex
