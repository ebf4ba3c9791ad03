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
// Brute-force oracles and random generators shared by the test suites. None
// of this calls into the code paths it is used to check.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "patchdex/types.hpp"

namespace patchdex::testing {

inline std::vector<float> RandomUnit(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> normal;
  std::vector<double> v(dim);
  double n2 = 0.0;
  for (double& x : v) {
    x = normal(rng);
    n2 += x * x;
  }
  std::vector<float> out(dim);
  for (std::size_t k = 0; k < dim; ++k) {
    out[k] = static_cast<float>(v[k] / std::sqrt(n2));
  }
  return out;
}

/// Random unit-vector patch set with `count` vectors (not tied to a level
/// count, the matcher does not care).
inline PatchFeatureSet RandomSet(std::mt19937_64& rng, std::string id,
                                 std::size_t count, std::size_t dim) {
  PatchFeatureSet set;
  set.image_id = std::move(id);
  for (std::size_t k = 0; k < count; ++k) {
    FeatureVector v;
    v.values = RandomUnit(rng, dim);
    v.normalized = true;
    set.vectors.push_back(std::move(v));
  }
  return set;
}

inline ResponseMap RandomMap(std::mt19937_64& rng, std::uint32_t w,
                             std::uint32_t h, std::uint32_t c,
                             std::uint32_t level = 1, std::string id = "img") {
  ResponseMap m;
  m.width = w;
  m.height = h;
  m.channels = c;
  m.scale_level = level;
  m.image_id = std::move(id);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  m.values.resize(m.size());
  for (float& v : m.values) v = u(rng);
  return m;
}

/// d(a, b) straight from the definition.
inline double OracleDistance(const FeatureVector& a, const FeatureVector& b) {
  if (a.degenerate || b.degenerate) {
    return a.degenerate && b.degenerate ? 0.0 : 2.0;
  }
  double s = 0.0;
  for (std::size_t k = 0; k < a.values.size(); ++k) {
    const double d = double(a.values[k]) - double(b.values[k]);
    s += d * d;
  }
  return std::sqrt(s);
}

/// Triple loop: sum over query patches of the min over reference patches.
inline double OracleImageDistance(const PatchFeatureSet& q,
                                  const PatchFeatureSet& r) {
  double total = 0.0;
  for (const FeatureVector& a : q.vectors) {
    double best = std::numeric_limits<double>::infinity();
    for (const FeatureVector& b : r.vectors) {
      best = std::min(best, OracleDistance(a, b));
    }
    total += best;
  }
  return total;
}

/// Per-bit Hamming distance over packed little-endian bytes.
inline std::uint32_t OracleHamming(const std::vector<std::uint8_t>& a,
                                   const std::vector<std::uint8_t>& b,
                                   std::uint32_t bits) {
  std::uint32_t d = 0;
  for (std::uint32_t k = 0; k < bits; ++k) {
    const int x = (a[k / 8] >> (k % 8)) & 1;
    const int y = (b[k / 8] >> (k % 8)) & 1;
    d += x != y;
  }
  return d;
}

inline std::vector<double> Ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t k = 0; k < idx.size();) {
    std::size_t e = k;
    while (e + 1 < idx.size() && v[idx[e + 1]] == v[idx[k]]) ++e;
    const double mean_rank = (double(k) + double(e)) / 2.0;
    for (std::size_t t = k; t <= e; ++t) r[idx[t]] = mean_rank;
    k = e + 1;
  }
  return r;
}

inline double Spearman(const std::vector<double>& a,
                       const std::vector<double>& b) {
  const auto ra = Ranks(a);
  const auto rb = Ranks(b);
  const double n = double(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t k = 0; k < ra.size(); ++k) {
    sab += (ra[k] - ma) * (rb[k] - mb);
    saa += (ra[k] - ma) * (ra[k] - ma);
    sbb += (rb[k] - mb) * (rb[k] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace patchdex::testing
