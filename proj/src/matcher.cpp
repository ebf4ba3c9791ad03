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
#include "patchdex/matcher.hpp"

#include <omp.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "patchdex/error.hpp"

namespace patchdex {
namespace {

constexpr double kDegenerateDistance = 2.0;
constexpr double kDegenerateSimilarity = -1.0;

double SquaredDistance(const float* a, const float* b, std::size_t dim) {
  double sum = 0.0;
  for (std::size_t k = 0; k < dim; ++k) {
    const double diff = double(a[k]) - double(b[k]);
    sum += diff * diff;
  }
  return sum;
}

double InnerProduct(const float* a, const float* b, std::size_t dim) {
  double sum = 0.0;
  for (std::size_t k = 0; k < dim; ++k) sum += double(a[k]) * double(b[k]);
  return sum;
}

void CheckSameLength(std::size_t a, std::size_t b) {
  if (a != b) {
    throw Error(ErrorKind::kDimensionMismatch,
                "vectors of length " + std::to_string(a) + " and " +
                    std::to_string(b));
  }
}

void CheckSets(const PatchFeatureSet& query, const PatchFeatureSet& reference) {
  if (query.vectors.empty()) {
    throw Error(ErrorKind::kEmptyInput,
                "query '" + query.image_id + "' has no patches");
  }
  if (reference.vectors.empty()) {
    throw Error(ErrorKind::kEmptyInput,
                "reference '" + reference.image_id + "' has no patches");
  }
}

// ---------------------------------------------------------------------------
// Pair kernels over packed sets. The "reference" variants are the literal
// min/sum; the "fast" variants compare squared distances with early exit and
// take one sqrt per query patch. sqrt is monotone and correctly rounded, and
// each distance is summed in the same order, so both give identical bits.

double PairL2Reference(const PackedSet& q, const PackedSet& r) {
  double total = 0.0;
  for (std::size_t a = 0; a < q.count; ++a) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < r.count; ++b) {
      double d;
      if (q.degenerate[a] || r.degenerate[b]) {
        d = q.degenerate[a] && r.degenerate[b] ? 0.0 : kDegenerateDistance;
      } else {
        d = std::sqrt(SquaredDistance(q.data.data() + a * q.dim,
                                      r.data.data() + b * r.dim, q.dim));
      }
      best = std::min(best, d);
    }
    total += best;
  }
  return total;
}

double PairL2Fast(const PackedSet& q, const PackedSet& r) {
  const std::size_t dim = q.dim;
  bool r_has_degenerate = false;
  for (auto flag : r.degenerate) r_has_degenerate |= flag != 0;

  double total = 0.0;
  for (std::size_t a = 0; a < q.count; ++a) {
    if (q.degenerate[a]) {
      total += r_has_degenerate ? 0.0 : kDegenerateDistance;
      continue;
    }
    const float* qa = q.data.data() + a * dim;
    double best2 = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < r.count; ++b) {
      if (r.degenerate[b]) continue;
      const float* rb = r.data.data() + b * dim;
      double sum = 0.0;
      std::size_t k = 0;
      // Partial sums only grow; stop once this patch cannot win. Same
      // left-to-right order as SquaredDistance, checked every 16 terms.
      while (k < dim) {
        const std::size_t end = std::min(dim, k + 16);
        for (; k < end; ++k) {
          const double diff = double(qa[k]) - double(rb[k]);
          sum += diff * diff;
        }
        if (sum > best2) break;
      }
      if (k == dim && sum < best2) best2 = sum;
    }
    double best = std::sqrt(best2);
    if (r_has_degenerate) best = std::min(best, kDegenerateDistance);
    total += best;
  }
  return total;
}

double PairSimilarity(const PackedSet& q, const PackedSet& r) {
  double total = 0.0;
  for (std::size_t a = 0; a < q.count; ++a) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < r.count; ++b) {
      double s;
      if (q.degenerate[a] || r.degenerate[b]) {
        s = q.degenerate[a] && r.degenerate[b] ? 1.0 : kDegenerateSimilarity;
      } else {
        s = InnerProduct(q.data.data() + a * q.dim, r.data.data() + b * r.dim,
                         q.dim);
      }
      best = std::max(best, s);
    }
    total += best;
  }
  return total;
}

double PairHamming(const PackedSet& q, const PackedSet& r) {
  const std::size_t words = q.words_per_code;
  std::uint64_t total = 0;
  for (std::size_t a = 0; a < q.count; ++a) {
    const std::uint64_t* qa = q.codes.data() + a * words;
    std::uint64_t best = std::numeric_limits<std::uint64_t>::max();
    for (std::size_t b = 0; b < r.count; ++b) {
      const std::uint64_t* rb = r.codes.data() + b * words;
      std::uint64_t d = 0;
      for (std::size_t w = 0; w < words; ++w) d += std::popcount(qa[w] ^ rb[w]);
      best = std::min(best, d);
    }
    total += best;
  }
  return double(total);
}

void CheckPacked(std::span<const PackedSet> queries,
                 std::span<const PackedSet> index, Metric metric) {
  if (index.empty()) throw Error(ErrorKind::kEmptyInput, "empty index");
  std::size_t dim = 0;
  std::size_t words = 0;
  auto check = [&](const PackedSet& s) {
    if (s.count == 0) {
      throw Error(ErrorKind::kEmptyInput,
                  "set '" + s.image_id + "' has no patches");
    }
    if (metric == Metric::kHamming) {
      if (s.codes.empty()) {
        throw Error(ErrorKind::kInvariant,
                    "set '" + s.image_id + "' carries no quantized codes");
      }
      if (words == 0) words = s.words_per_code;
      if (s.words_per_code != words) {
        throw Error(ErrorKind::kDimensionMismatch,
                    "code length differs for '" + s.image_id + "'");
      }
    }
    if (dim == 0) dim = s.dim;
    if (s.dim != dim) {
      throw Error(ErrorKind::kDimensionMismatch,
                  "set '" + s.image_id + "' has dimension " +
                      std::to_string(s.dim) + ", expected " +
                      std::to_string(dim));
    }
  };
  for (const PackedSet& s : queries) check(s);
  for (const PackedSet& s : index) check(s);
}

}  // namespace

double VectorDistance(const FeatureVector& a, const FeatureVector& b) {
  CheckSameLength(a.size(), b.size());
  if (a.degenerate || b.degenerate) {
    return a.degenerate && b.degenerate ? 0.0 : kDegenerateDistance;
  }
  return std::sqrt(SquaredDistance(a.values.data(), b.values.data(), a.size()));
}

double VectorSimilarity(const FeatureVector& a, const FeatureVector& b) {
  CheckSameLength(a.size(), b.size());
  if (a.degenerate || b.degenerate) {
    return a.degenerate && b.degenerate ? 1.0 : kDegenerateSimilarity;
  }
  return InnerProduct(a.values.data(), b.values.data(), a.size());
}

double PatchMinDistance(const FeatureVector& query_patch,
                        const PatchFeatureSet& reference) {
  if (reference.vectors.empty()) {
    throw Error(ErrorKind::kEmptyInput,
                "reference '" + reference.image_id + "' has no patches");
  }
  double best = std::numeric_limits<double>::infinity();
  for (const FeatureVector& r : reference.vectors) {
    best = std::min(best, VectorDistance(query_patch, r));
  }
  return best;
}

double PatchMaxSimilarity(const FeatureVector& query_patch,
                          const PatchFeatureSet& reference) {
  if (reference.vectors.empty()) {
    throw Error(ErrorKind::kEmptyInput,
                "reference '" + reference.image_id + "' has no patches");
  }
  double best = -std::numeric_limits<double>::infinity();
  for (const FeatureVector& r : reference.vectors) {
    best = std::max(best, VectorSimilarity(query_patch, r));
  }
  return best;
}

double ImageDistance(const PatchFeatureSet& query,
                     const PatchFeatureSet& reference) {
  CheckSets(query, reference);
  double total = 0.0;
  for (const FeatureVector& q : query.vectors) {
    total += PatchMinDistance(q, reference);
  }
  return total;
}

double ImageSimilarity(const PatchFeatureSet& query,
                       const PatchFeatureSet& reference) {
  CheckSets(query, reference);
  double total = 0.0;
  for (const FeatureVector& q : query.vectors) {
    total += PatchMaxSimilarity(q, reference);
  }
  return total;
}

PackedSet Pack(const PatchFeatureSet& set) {
  PackedSet p;
  p.image_id = set.image_id;
  p.count = set.vectors.size();
  p.dim = set.dim();
  p.data.reserve(p.count * p.dim);
  p.degenerate.reserve(p.count);
  for (const FeatureVector& v : set.vectors) {
    if (v.size() != p.dim) {
      throw Error(ErrorKind::kDimensionMismatch,
                  "set '" + set.image_id + "' mixes vector lengths");
    }
    p.data.insert(p.data.end(), v.values.begin(), v.values.end());
    p.degenerate.push_back(v.degenerate ? 1 : 0);
  }
  return p;
}

PackedSet PackQuantized(const PatchFeatureSet& whitened_set) {
  PackedSet p = Pack(whitened_set);
  p.words_per_code = (p.dim + 63) / 64;
  p.codes.assign(p.count * p.words_per_code, 0);
  for (std::size_t a = 0; a < p.count; ++a) {
    const QuantizedCode code = Quantize(whitened_set.vectors[a]);
    std::uint64_t* words = p.codes.data() + a * p.words_per_code;
    for (std::size_t k = 0; k < code.bytes.size(); ++k) {
      words[k / 8] |= std::uint64_t{code.bytes[k]} << (8 * (k % 8));
    }
  }
  return p;
}

ScoreMatrix ComputeScoresSerial(std::span<const PackedSet> queries,
                                std::span<const PackedSet> index,
                                Metric metric) {
  CheckPacked(queries, index, metric);
  ScoreMatrix m;
  m.rows = queries.size();
  m.cols = index.size();
  m.values.resize(m.rows * m.cols);
  for (std::size_t q = 0; q < m.rows; ++q) {
    for (std::size_t r = 0; r < m.cols; ++r) {
      double v = 0.0;
      switch (metric) {
        case Metric::kL2: v = PairL2Reference(queries[q], index[r]); break;
        case Metric::kSimilarity: v = PairSimilarity(queries[q], index[r]); break;
        case Metric::kHamming: v = PairHamming(queries[q], index[r]); break;
      }
      m.values[q * m.cols + r] = v;
    }
  }
  return m;
}

ScoreMatrix ComputeScores(std::span<const PackedSet> queries,
                          std::span<const PackedSet> index,
                          const MatchOptions& options) {
  CheckPacked(queries, index, options.metric);
  ScoreMatrix m;
  m.rows = queries.size();
  m.cols = index.size();
  m.values.resize(m.rows * m.cols);
  if (m.rows == 0) return m;

  // Split the index into tiles whose packed data fits the budget; every
  // query sweeps one tile before the next is touched.
  std::vector<std::size_t> tile_begin{0};
  std::size_t bytes = 0;
  for (std::size_t r = 0; r < index.size(); ++r) {
    const std::size_t size = index[r].data.size() * sizeof(float) +
                             index[r].codes.size() * sizeof(std::uint64_t);
    if (bytes > 0 && bytes + size > options.memory_budget_bytes) {
      tile_begin.push_back(r);
      bytes = 0;
    }
    bytes += size;
  }
  tile_begin.push_back(index.size());

  const int threads =
      options.threads > 0 ? options.threads : omp_get_max_threads();
  for (std::size_t t = 0; t + 1 < tile_begin.size(); ++t) {
    const std::size_t r0 = tile_begin[t];
    const std::size_t width = tile_begin[t + 1] - r0;
    const long pairs = static_cast<long>(m.rows * width);
#pragma omp parallel for schedule(dynamic, 8) num_threads(threads)
    for (long p = 0; p < pairs; ++p) {
      const std::size_t q = std::size_t(p) / width;
      const std::size_t r = r0 + std::size_t(p) % width;
      double v = 0.0;
      switch (options.metric) {
        case Metric::kL2: v = PairL2Fast(queries[q], index[r]); break;
        case Metric::kSimilarity: v = PairSimilarity(queries[q], index[r]); break;
        case Metric::kHamming: v = PairHamming(queries[q], index[r]); break;
      }
      m.values[q * m.cols + r] = v;
    }
  }
  return m;
}

std::vector<RankedList> RankAll(std::span<const PackedSet> queries,
                                std::span<const PackedSet> index,
                                const MatchOptions& options) {
  const ScoreMatrix scores = ComputeScores(queries, index, options);
  const bool descending = options.metric == Metric::kSimilarity;
  std::vector<RankedList> lists(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    RankedList& list = lists[q];
    list.query_id = queries[q].image_id;
    list.entries.reserve(index.size());
    for (std::size_t r = 0; r < index.size(); ++r) {
      if (options.exclude_self && index[r].image_id == list.query_id) continue;
      list.entries.push_back({index[r].image_id, scores.at(q, r)});
    }
    std::sort(list.entries.begin(), list.entries.end(),
              [descending](const RankedEntry& a, const RankedEntry& b) {
                if (a.distance != b.distance) {
                  return descending ? a.distance > b.distance
                                    : a.distance < b.distance;
                }
                return a.reference_id < b.reference_id;
              });
  }
  return lists;
}

RankedList RankReferences(const PatchFeatureSet& query,
                          std::span<const PatchFeatureSet> index,
                          const MatchOptions& options) {
  if (index.empty()) throw Error(ErrorKind::kEmptyInput, "empty index");
  std::vector<PackedSet> packed_index;
  packed_index.reserve(index.size());
  std::vector<PackedSet> packed_query;
  if (options.metric == Metric::kHamming) {
    packed_query.push_back(PackQuantized(query));
    for (const auto& s : index) packed_index.push_back(PackQuantized(s));
  } else {
    packed_query.push_back(Pack(query));
    for (const auto& s : index) packed_index.push_back(Pack(s));
  }
  return RankAll(packed_query, packed_index, options).front();
}

void WritePatchDistanceMatrix(std::span<const PackedSet> queries,
                              std::span<const PackedSet> index,
                              std::ostream& out) {
  CheckPacked(queries, index, Metric::kL2);
  std::size_t rows = 0;
  std::size_t cols = 0;
  for (const PackedSet& q : queries) rows += q.count;
  for (const PackedSet& r : index) cols += r.count;
  auto u32 = [&](std::uint32_t v) {
    char b[4];
    for (int k = 0; k < 4; ++k) b[k] = static_cast<char>(v >> (8 * k));
    out.write(b, 4);
  };
  out.write("DMAT", 4);
  u32(static_cast<std::uint32_t>(rows));
  u32(static_cast<std::uint32_t>(cols));
  std::vector<float> row(cols);
  for (const PackedSet& q : queries) {
    for (std::size_t a = 0; a < q.count; ++a) {
      std::size_t c = 0;
      for (const PackedSet& r : index) {
        for (std::size_t b = 0; b < r.count; ++b, ++c) {
          double d;
          if (q.degenerate[a] || r.degenerate[b]) {
            d = q.degenerate[a] && r.degenerate[b] ? 0.0 : kDegenerateDistance;
          } else {
            d = std::sqrt(SquaredDistance(q.data.data() + a * q.dim,
                                          r.data.data() + b * r.dim, q.dim));
          }
          row[c] = static_cast<float>(d);
        }
      }
      for (float v : row) u32(std::bit_cast<std::uint32_t>(v));
    }
  }
  if (!out) throw Error(ErrorKind::kIo, "distance matrix write failed");
}

void WriteRanksTsv(std::span<const RankedList> lists, std::ostream& out) {
  out << "query_id\treference_id\trank\tdistance\n";
  char buf[64];
  for (const RankedList& list : lists) {
    std::size_t rank = 1;
    for (const RankedEntry& e : list.entries) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), e.distance);
      out << list.query_id << '\t' << e.reference_id << '\t' << rank++ << '\t'
          << std::string_view(buf, res.ptr - buf) << '\n';
    }
  }
  if (!out) throw Error(ErrorKind::kIo, "ranks write failed");
}

std::vector<RankedList> ReadRanksTsv(std::istream& in) {
  std::vector<RankedList> lists;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.starts_with("query_id\t")) continue;
    std::istringstream fields(line);
    std::string query, reference, rank_text, distance_text;
    if (!std::getline(fields, query, '\t') ||
        !std::getline(fields, reference, '\t') ||
        !std::getline(fields, rank_text, '\t') ||
        !std::getline(fields, distance_text)) {
      throw Error(ErrorKind::kParse,
                  "ranks line " + std::to_string(line_no) + ": 4 fields expected");
    }
    double distance = 0.0;
    const auto res = std::from_chars(
        distance_text.data(), distance_text.data() + distance_text.size(),
        distance);
    std::size_t rank = 0;
    const auto rank_res = std::from_chars(
        rank_text.data(), rank_text.data() + rank_text.size(), rank);
    if (rank_res.ec != std::errc{} ||
        rank_res.ptr != rank_text.data() + rank_text.size()) {
      throw Error(ErrorKind::kParse,
                  "ranks line " + std::to_string(line_no) + ": bad rank");
    }
    if (res.ec != std::errc{} ||
        res.ptr != distance_text.data() + distance_text.size()) {
      throw Error(ErrorKind::kParse,
                  "ranks line " + std::to_string(line_no) + ": bad distance");
    }
    if (lists.empty() || lists.back().query_id != query) {
      lists.push_back({query, {}});
    }
    if (rank != lists.back().entries.size() + 1) {
      throw Error(ErrorKind::kParse, "ranks line " + std::to_string(line_no) +
                                         ": ranks out of sequence");
    }
    lists.back().entries.push_back({reference, distance});
  }
  return lists;
}

}  // namespace patchdex
