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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "patchdex/feature_io.hpp"
#include "patchdex/matcher.hpp"

namespace patchdex {

using Labels = std::map<std::string, Relevance>;

/// Oxford-style AP. Junk entries are dropped from the list first; good and
/// ok count as relevant; AP is the mean of precision@r over the ranks r of
/// relevant items. Returns nullopt when the labels hold no relevant item.
/// Throws kMissingLabel if a ranked id has no label.
std::optional<double> AveragePrecision(const RankedList& ranked,
                                       const Labels& labels);

struct UkbScore {
  double recall4 = 0.0;  // in [0, 1]
  double ns_score = 0.0; // recall4 * 4, the usual [0, 4] convention
};

/// Mean fraction of the 4 relevant references found in each top-4.
/// `labels[q]` are the labels of ranked[q]; each must hold exactly 4
/// relevant references.
UkbScore ComputeUkbScore(std::span<const RankedList> ranked,
                         std::span<const Labels> labels);

struct EvalReport {
  std::string dataset_name;
  std::string config;
  std::map<std::string, double> per_query_ap;
  std::vector<std::string> excluded_queries;  // no relevant reference
  double mean_ap = 0.0;
  std::optional<double> ukb_recall4;
  std::optional<double> ukb_ns;
  std::size_t dims_per_reference = 0;
  double wall_time_seconds = 0.0;
};

/// Scores ranked lists against the manifest's labels. UKB fields are filled
/// when every scored query has exactly four relevant references.
EvalReport Evaluate(const DatasetManifest& manifest,
                    std::span<const RankedList> ranked,
                    const std::string& config_label);

std::string ToJson(const EvalReport& report);
EvalReport EvalReportFromJson(const std::string& text);

/// One line in the style of an ablation table: label, dims, mAP (x100), UKB.
std::string FormatTableHeader();
std::string FormatTableRow(const EvalReport& report);

}  // namespace patchdex
