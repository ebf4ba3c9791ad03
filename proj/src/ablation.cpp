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
#include "patchdex/ablation.hpp"

#include <cctype>
#include <chrono>
#include <string>

#include "patchdex/error.hpp"
#include "patchdex/pooling.hpp"
#include "patchdex/whitening.hpp"

namespace patchdex {
namespace {

// "4", "_{4x4}", "_{4×4}" -> 4.
int ParseSize(std::string_view term, std::string_view whole) {
  std::string digits;
  std::string rest;
  bool first = true;
  for (std::size_t k = 0; k < term.size(); ++k) {
    const char c = term[k];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      (first ? digits : rest) += c;
    } else if (!digits.empty()) {
      first = false;
    }
  }
  if (digits.empty() || (!rest.empty() && rest != digits)) {
    throw Error(ErrorKind::kUnknownConfig, "'" + std::string(whole) + "'");
  }
  const int n = std::stoi(digits);
  if (n < 1 || n > 16) {
    throw Error(ErrorKind::kUnknownConfig, "'" + std::string(whole) + "'");
  }
  return n;
}

}  // namespace

PipelineConfig ParseConfig(std::string_view label) {
  std::string compact;
  for (char c : label) {
    if (!std::isspace(static_cast<unsigned char>(c))) compact += c;
  }
  PipelineConfig config;
  if (compact == "Baseline") {
    config.label = "Baseline";
    return config;
  }
  if (compact.empty()) {
    throw Error(ErrorKind::kUnknownConfig, "empty config label");
  }
  bool seen_mr = false, seen_jtr = false, seen_sp = false;
  std::size_t start = 0;
  while (start <= compact.size()) {
    std::size_t end = compact.find('+', start);
    if (end == std::string::npos) end = compact.size();
    const std::string_view term(compact.data() + start, end - start);
    auto once = [&](bool& seen) {
      if (seen) {
        throw Error(ErrorKind::kUnknownConfig,
                    "repeated term in '" + std::string(label) + "'");
      }
      seen = true;
    };
    if (term.starts_with("MR")) {
      once(seen_mr);
      config.levels_reference = ParseSize(term.substr(2), label);
    } else if (term.starts_with("Jtr")) {
      once(seen_jtr);
      config.levels_query = ParseSize(term.substr(3), label);
    } else if (term.starts_with("SP")) {
      once(seen_sp);
      config.grid = ParseSize(term.substr(2), label);
    } else if (term == "PCAw") {
      if (config.whiten) {
        throw Error(ErrorKind::kUnknownConfig,
                    "repeated term in '" + std::string(label) + "'");
      }
      config.whiten = true;
    } else {
      throw Error(ErrorKind::kUnknownConfig, "'" + std::string(label) + "'");
    }
    start = end + 1;
  }
  std::string canonical;
  auto append = [&](const std::string& t) {
    canonical += canonical.empty() ? t : "+" + t;
  };
  if (seen_mr) append("MR" + std::to_string(config.levels_reference));
  if (seen_jtr) append("Jtr" + std::to_string(config.levels_query));
  if (seen_sp) append("SP" + std::to_string(config.grid));
  if (config.whiten) append("PCAw");
  config.label = canonical;
  return config;
}

std::vector<PipelineConfig> StandardConfigs() {
  std::vector<PipelineConfig> out;
  for (const char* label :
       {"Baseline", "MR2", "MR3", "MR4", "MR4+Jtr2", "MR4+Jtr3", "MR4+PCAw",
        "MR4+Jtr2+PCAw", "MR4+Jtr3+PCAw", "MR4+Jtr3+SP2+PCAw"}) {
    out.push_back(ParseConfig(label));
  }
  return out;
}

std::size_t DimsPerReference(const PipelineConfig& config,
                             std::size_t channels) {
  const std::size_t per_patch =
      std::size_t(config.grid) * config.grid * channels;
  const std::size_t kept = config.whiten ? per_patch / 2 : per_patch;
  return std::size_t(PatchCount(config.levels_reference)) * kept;
}

std::vector<PatchFeatureSet> EncodeRole(const DatasetManifest& manifest,
                                        const MapSource& source, Role role,
                                        int levels, int grid, bool per_patch) {
  std::vector<EncodeJob> jobs;
  for (const ImageEntry* e : manifest.WithRole(role)) {
    EncodeJob job;
    job.maps = source(e->id, levels, per_patch);
    job.per_patch = per_patch;
    if (job.maps.empty()) {
      throw Error(ErrorKind::kEmptyInput, "no maps for '" + e->id + "'");
    }
    int width = 0;
    int height = 0;
    if (e->width) {
      width = *e->width;
      height = *e->height;
    } else {
      const ResponseMap& first = job.maps.front();
      width = int(first.width) * kDefaultCellStride;
      height = int(first.height) * kDefaultCellStride;
    }
    if (per_patch) {
      job.layout.levels = levels;
      job.layout.width = width;
      job.layout.height = height;
    } else {
      job.layout = MakePatchLayout(width, height, levels);
    }
    jobs.push_back(std::move(job));
  }
  return EncodeBatch(jobs, grid);
}

PipelineResult RunPipeline(const DatasetManifest& manifest,
                           const MapSource& source,
                           const PipelineConfig& config,
                           const PipelineOptions& options) {
  std::vector<PatchFeatureSet> refs =
      EncodeRole(manifest, source, Role::kReference, config.levels_reference,
                 config.grid, options.per_patch);
  std::vector<PatchFeatureSet> queries =
      EncodeRole(manifest, source, Role::kQuery, config.levels_query,
                 config.grid, options.per_patch);
  if (refs.empty()) throw Error(ErrorKind::kEmptyInput, "no references");

  const bool hamming = options.match.metric == Metric::kHamming;
  if (config.whiten || hamming) {
    std::vector<PatchFeatureSet> train =
        EncodeRole(manifest, source, Role::kTrain, config.levels_reference,
                   config.grid, options.per_patch);
    const WhiteningModel model = FitWhitening(
        CollectPatchVectors(train.empty() ? refs : train),
        config.whiten ? 0.5 : 1.0);
    for (auto& s : refs) s = ApplyWhitening(model, s);
    for (auto& s : queries) s = ApplyWhitening(model, s);
  }

  std::vector<PackedSet> packed_refs;
  std::vector<PackedSet> packed_queries;
  for (const auto& s : refs) {
    packed_refs.push_back(hamming ? PackQuantized(s) : Pack(s));
  }
  for (const auto& s : queries) {
    packed_queries.push_back(hamming ? PackQuantized(s) : Pack(s));
  }
  MatchOptions match = options.match;
  match.exclude_self = true;

  PipelineResult result;
  result.ranked = RankAll(packed_queries, packed_refs, match);
  result.dims_per_reference = refs.front().vectors.size() * refs.front().dim();
  return result;
}

std::vector<EvalReport> RunAblation(const DatasetManifest& manifest,
                                    const MapSource& source,
                                    const std::vector<PipelineConfig>& configs,
                                    const PipelineOptions& options) {
  std::vector<EvalReport> reports;
  reports.reserve(configs.size());
  for (const PipelineConfig& config : configs) {
    const auto start = std::chrono::steady_clock::now();
    const PipelineResult result = RunPipeline(manifest, source, config, options);
    EvalReport report = Evaluate(manifest, result.ranked, config.label);
    report.dims_per_reference = result.dims_per_reference;
    report.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    reports.push_back(std::move(report));
  }
  return reports;
}

}  // namespace patchdex
