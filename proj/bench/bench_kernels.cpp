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
// Parallel kernels against their serial references. Run with
// --benchmark_filter=... to pick one; thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <random>

#include "oracles.hpp"
#include "patchdex/matcher.hpp"
#include "patchdex/pooling.hpp"
#include "patchdex/whitening.hpp"

using namespace patchdex;

namespace {

struct ScoreInputs {
  std::vector<PackedSet> queries, index;
};

const ScoreInputs& Scores() {
  static const ScoreInputs in = [] {
    std::mt19937_64 rng(1);
    ScoreInputs s;
    for (int k = 0; k < 8; ++k)
      s.queries.push_back(Pack(testing::RandomSet(rng, "q" + std::to_string(k), 14, 256)));
    for (int k = 0; k < 200; ++k)
      s.index.push_back(Pack(testing::RandomSet(rng, "r" + std::to_string(k), 30, 256)));
    return s;
  }();
  return in;
}

const TrainingMatrix& Training() {
  static const TrainingMatrix x = [] {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> normal;
    TrainingMatrix t;
    t.rows = 6000;
    t.cols = 256;
    for (std::size_t k = 0; k < t.rows * t.cols; ++k) t.values.push_back(normal(rng));
    return t;
  }();
  return x;
}

const std::vector<EncodeJob>& Jobs() {
  static const std::vector<EncodeJob> jobs = [] {
    std::mt19937_64 rng(3);
    std::vector<EncodeJob> out;
    for (int k = 0; k < 16; ++k) {
      EncodeJob job;
      for (int l = 1; l <= 4; ++l)
        job.maps.push_back(testing::RandomMap(rng, 8 * (l + 1), 8 * (l + 1), 128, l));
      job.layout = MakePatchLayout(600, 600, 4);
      out.push_back(std::move(job));
    }
    return out;
  }();
  return jobs;
}

void BM_ComputeScores(benchmark::State& state) {
  const auto& in = Scores();
  MatchOptions opt;
  opt.threads = int(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(ComputeScores(in.queries, in.index, opt));
}
BENCHMARK(BM_ComputeScores)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_ComputeScoresSerial(benchmark::State& state) {
  const auto& in = Scores();
  for (auto _ : state)
    benchmark::DoNotOptimize(ComputeScoresSerial(in.queries, in.index, Metric::kL2));
}
BENCHMARK(BM_ComputeScoresSerial)->Unit(benchmark::kMillisecond);

void BM_Covariance(benchmark::State& state) {
  std::vector<double> mean, cov;
  for (auto _ : state) {
    MeanAndCovariance(Training(), mean, cov);
    benchmark::DoNotOptimize(cov.data());
  }
}
BENCHMARK(BM_Covariance)->Unit(benchmark::kMillisecond);

void BM_CovarianceSerial(benchmark::State& state) {
  std::vector<double> mean, cov;
  for (auto _ : state) {
    MeanAndCovarianceSerial(Training(), mean, cov);
    benchmark::DoNotOptimize(cov.data());
  }
}
BENCHMARK(BM_CovarianceSerial)->Unit(benchmark::kMillisecond);

void BM_EncodeBatch(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(EncodeBatch(Jobs(), 1));
}
BENCHMARK(BM_EncodeBatch)->Unit(benchmark::kMillisecond);

void BM_EncodeBatchSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(EncodeBatchSerial(Jobs(), 1));
}
BENCHMARK(BM_EncodeBatchSerial)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
