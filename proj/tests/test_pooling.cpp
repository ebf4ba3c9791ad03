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
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "patchdex/error.hpp"
#include "patchdex/pooling.hpp"

using namespace patchdex;

namespace {

std::vector<ResponseMap> ScaleMaps(std::mt19937_64& rng, int levels,
                                   std::uint32_t channels) {
  std::vector<ResponseMap> maps;
  for (int l = 1; l <= levels; ++l) {
    const std::uint32_t side = 4 * (l + 1);
    maps.push_back(testing::RandomMap(rng, side, side, channels, l, "im"));
  }
  return maps;
}

}  // namespace

TEST_CASE("pooled vector lengths") {
  std::mt19937_64 rng(1);
  const ResponseMap m = testing::RandomMap(rng, 10, 10, 512);
  CHECK(SpatialMaxPool(m, 1).size() == 512);
  CHECK(SpatialMaxPool(m, 2).size() == 2048);
}

TEST_CASE("1x1 pooling is the per-channel max") {
  ResponseMap m;
  m.width = m.height = 2;
  m.channels = 1;
  m.values = {1, 2, 3, 4};
  CHECK(SpatialMaxPool(m, 1).values == std::vector<float>{4});

  std::mt19937_64 rng(2);
  const ResponseMap r = testing::RandomMap(rng, 7, 5, 6);
  const FeatureVector v = SpatialMaxPool(r, 1);
  for (std::uint32_t c = 0; c < 6; ++c) {
    float best = -1e30f;
    for (std::uint32_t y = 0; y < 5; ++y)
      for (std::uint32_t x = 0; x < 7; ++x) best = std::max(best, r.at(x, y, c));
    CHECK(v.values[c] == best);
  }
}

TEST_CASE("2x2 cells split by rounded boundaries") {
  // 5 columns, g=2 -> columns [0,3) and [3,5).
  ResponseMap m;
  m.width = 5;
  m.height = 1;
  m.channels = 1;
  m.values = {1, 9, 2, 8, 3};
  CHECK(SpatialMaxPool(m, 2).values == std::vector<float>{9, 8, 9, 8});

  // Narrower than the grid: cells share the single column.
  ResponseMap thin;
  thin.width = 1;
  thin.height = 3;
  thin.channels = 2;
  thin.values = {1, -1, 5, -5, 2, 7};
  const FeatureVector v = SpatialMaxPool(thin, 2);
  // Rows [0,2) and [2,3); both columns are column 0.
  CHECK(v.values == std::vector<float>{5, -1, 5, -1, 2, 7, 2, 7});
}

TEST_CASE("L2 normalization") {
  FeatureVector v;
  v.values = {3, 4};
  const FeatureVector n = L2Normalize(v);
  CHECK(n.values[0] == doctest::Approx(0.6).epsilon(1e-7));
  CHECK(n.values[1] == doctest::Approx(0.8).epsilon(1e-7));
  CHECK_FALSE(n.degenerate);

  FeatureVector unit;
  unit.values = {0, 1, 0};
  CHECK(L2Normalize(unit).values == unit.values);

  FeatureVector zero;
  zero.values = {0, 0, 0, 0};
  const FeatureVector z = L2Normalize(zero);
  CHECK(z.values == zero.values);
  CHECK(z.degenerate);
  CHECK(z.normalized);
}

TEST_CASE("property: pooling monotone under region growth") {
  std::mt19937_64 rng(7);
  const ResponseMap m = testing::RandomMap(rng, 12, 9, 5);
  std::uniform_int_distribution<int> px(0, 11), py(0, 8);
  for (int trial = 0; trial < 300; ++trial) {
    int x0 = px(rng), x1 = px(rng), y0 = py(rng), y1 = py(rng);
    if (x0 > x1) std::swap(x0, x1);
    if (y0 > y1) std::swap(y0, y1);
    const CellRect inner{x0, y0, x1 + 1, y1 + 1};
    const CellRect outer{std::max(0, x0 - trial % 3), std::max(0, y0 - 1),
                         std::min(12, x1 + 1 + trial % 2),
                         std::min(9, y1 + 2)};
    const auto a = SpatialMaxPool(m, inner, 1).values;
    const auto b = SpatialMaxPool(m, outer, 1).values;
    for (std::size_t c = 0; c < a.size(); ++c) REQUIRE(b[c] >= a[c]);
  }
}

TEST_CASE("property: re-pooling a pooled grid is the identity") {
  std::mt19937_64 rng(8);
  for (int g : {1, 2, 3}) {
    const ResponseMap m = testing::RandomMap(rng, 11, 8, 4);
    const FeatureVector pooled = SpatialMaxPool(m, g);
    ResponseMap grid_map;
    grid_map.width = grid_map.height = std::uint32_t(g);
    grid_map.channels = 4;
    grid_map.values = pooled.values;
    CHECK(SpatialMaxPool(grid_map, g).values == pooled.values);
  }
}

TEST_CASE("property: channel permutation commutes with pooling") {
  std::mt19937_64 rng(9);
  const std::uint32_t channels = 16;
  const ResponseMap m = testing::RandomMap(rng, 9, 6, channels);
  std::vector<std::uint32_t> perm(channels);
  std::iota(perm.begin(), perm.end(), 0u);
  std::shuffle(perm.begin(), perm.end(), rng);
  ResponseMap p = m;
  for (std::uint32_t y = 0; y < m.height; ++y)
    for (std::uint32_t x = 0; x < m.width; ++x)
      for (std::uint32_t c = 0; c < channels; ++c)
        p.at(x, y, perm[c]) = m.at(x, y, c);
  for (int g : {1, 2}) {
    const auto a = SpatialMaxPool(m, g).values;
    const auto b = SpatialMaxPool(p, g).values;
    for (int cell = 0; cell < g * g; ++cell)
      for (std::uint32_t c = 0; c < channels; ++c)
        REQUIRE(b[cell * channels + perm[c]] == a[cell * channels + c]);
  }
}

TEST_CASE("encode_image shapes") {
  std::mt19937_64 rng(10);
  SUBCASE("single level") {
    const auto maps = std::vector{testing::RandomMap(rng, 4, 4, 8, 1, "a")};
    const PatchFeatureSet s = EncodeImage(maps, MakePatchLayout(64, 64, 1), 1);
    CHECK(s.vectors.size() == 1);
    CHECK(s.dim() == 8);
    CHECK(s.image_id == "a");
  }
  SUBCASE("four levels of 512 channels") {
    const auto maps = ScaleMaps(rng, 4, 512);
    const PatchFeatureSet s = EncodeImage(maps, MakePatchLayout(600, 600, 4), 1);
    CHECK(s.vectors.size() == 30);
    for (const auto& v : s.vectors) {
      CHECK(v.size() == 512);
      double n2 = 0;
      for (float x : v.values) n2 += double(x) * x;
      CHECK(std::sqrt(n2) == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
  SUBCASE("randomized L, g, C") {
    for (int trial = 0; trial < 24; ++trial) {
      const int levels = 1 + trial % 4;
      const int g = 1 + (trial / 4) % 2;
      const std::uint32_t c = std::array<std::uint32_t, 3>{4, 64, 512}[trial % 3];
      const auto maps = ScaleMaps(rng, levels, c);
      const auto s = EncodeImage(maps, MakePatchLayout(300, 200, levels), g);
      REQUIRE(s.vectors.size() == std::size_t(PatchCount(levels)));
      for (const auto& v : s.vectors) REQUIRE(v.size() == std::size_t(g * g) * c);
    }
  }
}

TEST_CASE("constant maps encode to identical vectors") {
  std::vector<ResponseMap> maps;
  for (int l = 1; l <= 4; ++l) {
    ResponseMap m;
    m.width = m.height = std::uint32_t(4 * (l + 1));
    m.channels = 6;
    m.scale_level = std::uint32_t(l);
    m.values.assign(m.size(), 0.25f);
    maps.push_back(m);
  }
  const auto s = EncodeImage(maps, MakePatchLayout(600, 600, 4), 1);
  REQUIRE(s.vectors.size() == 30);
  for (const auto& v : s.vectors) CHECK(v.values == s.vectors[0].values);
}

TEST_CASE("encode_image errors") {
  std::mt19937_64 rng(11);
  auto maps = ScaleMaps(rng, 3, 8);
  const PatchLayout layout = MakePatchLayout(100, 100, 4);
  CHECK_THROWS_AS(EncodeImage(maps, layout, 1), Error);

  maps.push_back(testing::RandomMap(rng, 20, 20, 9, 4, "im"));
  try {
    EncodeImage(maps, layout, 1);
    FAIL("channel mismatch accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDimensionMismatch);
  }
}

TEST_CASE("direct per-patch mode") {
  std::mt19937_64 rng(12);
  std::vector<ResponseMap> maps;
  for (int k = 0; k < PatchCount(3); ++k) {
    maps.push_back(testing::RandomMap(rng, 6, 5, 10, 1, "p"));
  }
  const auto s = EncodePatchMaps(maps, 3, 2);
  REQUIRE(s.vectors.size() == 14);
  CHECK(s.vectors[13].patch == PatchId{3, 3, 3});
  CHECK(s.dim() == 40);
  CHECK(s.vectors[5].values == L2Normalize(SpatialMaxPool(maps[5], 2)).values);
  maps.pop_back();
  CHECK_THROWS_AS(EncodePatchMaps(maps, 3, 2), Error);
}

TEST_CASE("parallel batch encode equals the serial reference") {
  std::mt19937_64 rng(13);
  std::vector<EncodeJob> jobs;
  for (int k = 0; k < 12; ++k) {
    EncodeJob job;
    job.maps = ScaleMaps(rng, 4, 32);
    job.layout = MakePatchLayout(480 + 10 * k, 360, 4);
    jobs.push_back(std::move(job));
  }
  const auto a = EncodeBatch(jobs, 2);
  const auto b = EncodeBatchSerial(jobs, 2);
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    for (std::size_t p = 0; p < a[k].vectors.size(); ++p) {
      REQUIRE(a[k].vectors[p].values == b[k].vectors[p].values);
    }
  }
  jobs[5].maps.pop_back();
  CHECK_THROWS_AS(EncodeBatch(jobs, 1), Error);
}
