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
#include <chrono>
#include <cstring>
#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "patchdex/error.hpp"
#include "patchdex/matcher.hpp"
#include "patchdex/whitening.hpp"

using namespace patchdex;

namespace {

FeatureVector Vec(std::vector<float> v) {
  FeatureVector f;
  f.values = std::move(v);
  f.normalized = true;
  return f;
}

FeatureVector Degenerate(std::size_t dim) {
  FeatureVector f = Vec(std::vector<float>(dim, 0.0f));
  f.degenerate = true;
  return f;
}

PatchFeatureSet Set(std::string id, std::vector<FeatureVector> v) {
  PatchFeatureSet s;
  s.image_id = std::move(id);
  s.vectors = std::move(v);
  return s;
}

std::vector<PackedSet> PackAll(const std::vector<PatchFeatureSet>& sets) {
  std::vector<PackedSet> out;
  for (const auto& s : sets) out.push_back(Pack(s));
  return out;
}

}  // namespace

TEST_CASE("vector distances of unit vectors") {
  const auto e1 = Vec({1, 0}), e2 = Vec({0, 1}), m1 = Vec({-1, 0});
  CHECK(VectorDistance(e1, e1) == 0.0);
  CHECK(VectorDistance(e1, e2) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(VectorDistance(e1, m1) == 2.0);
  CHECK(VectorDistance(e1, Degenerate(2)) == 2.0);
  CHECK(VectorDistance(Degenerate(2), Degenerate(2)) == 0.0);
  CHECK(VectorSimilarity(e1, m1) == -1.0);
  CHECK_THROWS_AS(VectorDistance(e1, Vec({1, 0, 0})), Error);
}

TEST_CASE("patch minimum picks the closest reference patch") {
  const auto ref = Set("r", {Vec({1, 0}), Vec({0, 1})});
  CHECK(PatchMinDistance(Vec({1, 0}), ref) == 0.0);
  CHECK(PatchMinDistance(Vec({-1, 0}), ref) == doctest::Approx(std::sqrt(2.0)));
  CHECK(PatchMaxSimilarity(Vec({0.6f, 0.8f}), ref) == doctest::Approx(0.8));
  CHECK_THROWS_AS(PatchMinDistance(Vec({1, 0}), Set("e", {})), Error);
}

TEST_CASE("image distance sums per-query-patch minima") {
  const auto q = Set("q", {Vec({1, 0}), Vec({0, 1}), Vec({-1, 0})});
  const auto r = Set("r", {Vec({1, 0}), Vec({0, 1})});
  CHECK(ImageDistance(q, r) == doctest::Approx(std::sqrt(2.0)));
  // Not symmetric.
  CHECK(ImageDistance(r, q) == 0.0);
  CHECK(ImageDistance(Set("one", {Vec({0, 1})}), r) == 0.0);
  CHECK_THROWS_AS(ImageDistance(Set("e", {}), r), Error);
}

TEST_CASE("property: image distance equals the triple-loop oracle") {
  std::mt19937_64 rng(100);
  const auto start = std::chrono::steady_clock::now();
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t mq = 1 + rng() % 14, mr = 1 + rng() % 30, dim = 1 + rng() % 64;
    auto q = testing::RandomSet(rng, "q", mq, dim);
    auto r = testing::RandomSet(rng, "r", mr, dim);
    if (trial % 7 == 0) r.vectors[rng() % mr] = Degenerate(dim);
    if (trial % 11 == 0) q.vectors[rng() % mq] = Degenerate(dim);
    const double oracle = testing::OracleImageDistance(q, r);
    REQUIRE(std::abs(ImageDistance(q, r) - oracle) <= 1e-12);
    const std::vector<PackedSet> pq{Pack(q)}, pr{Pack(r)};
    REQUIRE(std::abs(ComputeScores(pq, pr, {}).at(0, 0) - oracle) <= 1e-12);
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(seconds < 10.0);
}

TEST_CASE("property: subset and growth laws") {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t dim = 2 + rng() % 30;
    const auto r = testing::RandomSet(rng, "r", 1 + rng() % 30, dim);
    // Query built from reference patches: distance 0.
    PatchFeatureSet q;
    for (std::size_t k = 0; k < 1 + rng() % 14; ++k) q.vectors.push_back(r.vectors[rng() % r.vectors.size()]);
    REQUIRE(ImageDistance(q, r) == 0.0);

    const auto q2 = testing::RandomSet(rng, "q", 1 + rng() % 14, dim);
    const double d = ImageDistance(q2, r);
    REQUIRE(d <= 2.0 * double(q2.vectors.size()));
    PatchFeatureSet grown = r;
    for (const auto& v : testing::RandomSet(rng, "x", 5, dim).vectors) grown.vectors.push_back(v);
    REQUIRE(ImageDistance(q2, grown) <= d);
  }
}

TEST_CASE("ranking") {
  std::mt19937_64 rng(102);
  std::vector<PatchFeatureSet> index;
  for (int k = 0; k < 20; ++k) index.push_back(testing::RandomSet(rng, "r" + std::to_string(k), 30, 16));

  SUBCASE("self ranks first with distance zero") {
    PatchFeatureSet q = index[7];
    q.vectors.resize(14);
    const RankedList list = RankReferences(q, index);
    CHECK(list.entries.size() == 20);
    CHECK(list.entries[0].reference_id == "r7");
    CHECK(list.entries[0].distance == 0.0);
    MatchOptions opt;
    opt.exclude_self = true;
    q.image_id = "r7";
    const RankedList without = RankReferences(q, index, opt);
    CHECK(without.entries.size() == 19);
    CHECK(without.entries[0].reference_id != "r7");
  }
  SUBCASE("a planted patch wins") {
    auto q = testing::RandomSet(rng, "q", 1, 16);
    index[13].vectors[21] = q.vectors[0];
    CHECK(RankReferences(q, index).entries[0].reference_id == "r13");
  }
  SUBCASE("ties break by reference id") {
    std::vector<PatchFeatureSet> same;
    for (const char* id : {"c", "a", "b"}) same.push_back(Set(id, {Vec({1, 0})}));
    const RankedList list = RankReferences(Set("q", {Vec({0, 1})}), same);
    CHECK(list.entries[0].reference_id == "a");
    CHECK(list.entries[1].reference_id == "b");
    CHECK(list.entries[2].reference_id == "c");
  }
  SUBCASE("similarity ranks descending") {
    PatchFeatureSet q = index[3];
    MatchOptions opt;
    opt.metric = Metric::kSimilarity;
    const RankedList list = RankReferences(q, index, opt);
    CHECK(list.entries[0].reference_id == "r3");
    CHECK(list.entries[0].distance == doctest::Approx(30.0));
    for (std::size_t k = 1; k < list.entries.size(); ++k)
      CHECK(list.entries[k - 1].distance >= list.entries[k].distance);
  }
}

TEST_CASE("parallel kernel is bit-identical to the serial reference") {
  std::mt19937_64 rng(103);
  std::vector<PatchFeatureSet> qs, rs;
  for (int k = 0; k < 9; ++k) qs.push_back(testing::RandomSet(rng, "q" + std::to_string(k), 14, 48));
  for (int k = 0; k < 40; ++k) rs.push_back(testing::RandomSet(rng, "r" + std::to_string(k), 30, 48));
  rs[5].vectors[2] = Degenerate(48);
  qs[1].vectors[0] = Degenerate(48);
  const auto pq = PackAll(qs), pr = PackAll(rs);
  for (Metric metric : {Metric::kL2, Metric::kSimilarity}) {
    const ScoreMatrix serial = ComputeScoresSerial(pq, pr, metric);
    for (int threads : {1, 2, 4, 7}) {
      for (std::size_t budget : {std::size_t{1}, std::size_t{20000}, std::size_t{64} << 20}) {
        MatchOptions opt;
        opt.metric = metric;
        opt.threads = threads;
        opt.memory_budget_bytes = budget;
        REQUIRE(ComputeScores(pq, pr, opt).values == serial.values);
      }
    }
  }
  MatchOptions one, many;
  one.threads = 1;
  many.threads = 5;
  CHECK(RankAll(pq, pr, one) == RankAll(pq, pr, many));
}

TEST_CASE("quantized matching") {
  std::mt19937_64 rng(104);
  std::vector<PatchFeatureSet> rs;
  for (int k = 0; k < 12; ++k) rs.push_back(testing::RandomSet(rng, "r" + std::to_string(k), 30, 96));
  std::vector<PackedSet> pr;
  for (const auto& s : rs) pr.push_back(PackQuantized(s));
  PatchFeatureSet q = rs[4];
  q.image_id = "q";
  q.vectors.resize(14);
  const std::vector<PackedSet> pq{PackQuantized(q)};

  // Summed per-patch minimum Hamming distance, from the code oracle.
  std::vector<std::vector<QuantizedCode>> codes(rs.size());
  for (std::size_t r = 0; r < rs.size(); ++r)
    for (const auto& v : rs[r].vectors) codes[r].push_back(Quantize(v));
  MatchOptions opt;
  opt.metric = Metric::kHamming;
  const ScoreMatrix m = ComputeScores(pq, pr, opt);
  for (std::size_t r = 0; r < rs.size(); ++r) {
    double expected = 0;
    for (const auto& v : q.vectors) {
      const QuantizedCode c = Quantize(v);
      std::uint32_t best = ~0u;
      for (const auto& rc : codes[r]) best = std::min(best, testing::OracleHamming(c.bytes, rc.bytes, c.bits));
      expected += best;
    }
    CHECK(m.at(0, r) == expected);
  }
  CHECK(ComputeScoresSerial(pq, pr, Metric::kHamming).values == m.values);
  CHECK(RankAll(pq, pr, opt)[0].entries[0].reference_id == "r4");
  // Unquantized sets cannot be compared by code.
  CHECK_THROWS_AS(ComputeScores(PackAll({q}), pr, opt), Error);
}

TEST_CASE("kernel input errors") {
  std::mt19937_64 rng(105);
  const auto a = Pack(testing::RandomSet(rng, "a", 3, 8));
  const auto b = Pack(testing::RandomSet(rng, "b", 3, 9));
  const std::vector<PackedSet> qa{a}, rb{b}, none;
  auto kind = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::kIo;
  };
  CHECK(kind([&] { ComputeScores(qa, none, {}); }) == ErrorKind::kEmptyInput);
  CHECK(kind([&] { ComputeScores(qa, rb, {}); }) == ErrorKind::kDimensionMismatch);
  CHECK(kind([&] { RankReferences(Set("q", {}), {}); }) == ErrorKind::kEmptyInput);
}

TEST_CASE("ranks TSV round trip") {
  std::vector<RankedList> lists(2);
  lists[0].query_id = "q0";
  lists[0].entries = {{"r1", 0.0}, {"r0", 1.0 / 3.0}, {"r2", 7.25}};
  lists[1].query_id = "q1";
  lists[1].entries = {{"r2", 1e-300}, {"r0", 12.5}};
  std::stringstream ss;
  WriteRanksTsv(lists, ss);
  const std::string text = ss.str();
  CHECK(text.find("q0\tr0\t2\t") != std::string::npos);
  CHECK(ReadRanksTsv(ss) == lists);

  std::istringstream bad("query_id\treference_id\trank\tdistance\nq0\tr1\tx\t1\n");
  CHECK_THROWS_AS(ReadRanksTsv(bad), Error);
}

TEST_CASE("patch distance matrix dump") {
  std::mt19937_64 rng(106);
  const auto q = testing::RandomSet(rng, "q", 3, 8);
  const auto r1 = testing::RandomSet(rng, "r1", 5, 8);
  const auto r2 = testing::RandomSet(rng, "r2", 2, 8);
  const std::vector<PackedSet> pq{Pack(q)}, pr{Pack(r1), Pack(r2)};
  std::ostringstream out;
  WritePatchDistanceMatrix(pq, pr, out);
  const std::string bytes = out.str();
  REQUIRE(bytes.size() == 12 + 3 * 7 * 4);
  CHECK(bytes.substr(0, 4) == "DMAT");
  std::uint32_t rows, cols;
  std::memcpy(&rows, bytes.data() + 4, 4);
  std::memcpy(&cols, bytes.data() + 8, 4);
  CHECK(rows == 3);
  CHECK(cols == 7);
  float v;
  std::memcpy(&v, bytes.data() + 12 + (1 * 7 + 6) * 4, 4);
  CHECK(v == doctest::Approx(testing::OracleDistance(q.vectors[1], r2.vectors[1])).epsilon(1e-6));
}
