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
#include "patchdex/eval.hpp"

#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "json.hpp"
#include "patchdex/error.hpp"

namespace patchdex {
namespace {

bool IsRelevant(Relevance r) {
  return r == Relevance::kGood || r == Relevance::kOk;
}

Relevance LabelOf(const Labels& labels, const std::string& query_id,
                  const std::string& reference_id) {
  const auto it = labels.find(reference_id);
  if (it == labels.end()) {
    throw Error(ErrorKind::kMissingLabel, "query '" + query_id +
                                              "': no label for reference '" +
                                              reference_id + "'");
  }
  return it->second;
}

}  // namespace

std::optional<double> AveragePrecision(const RankedList& ranked,
                                       const Labels& labels) {
  std::size_t total_relevant = 0;
  for (const auto& [id, label] : labels) total_relevant += IsRelevant(label);

  double precision_sum = 0.0;
  std::size_t effective_rank = 0;
  std::size_t hits = 0;
  for (const RankedEntry& e : ranked.entries) {
    const Relevance label = LabelOf(labels, ranked.query_id, e.reference_id);
    if (label == Relevance::kJunk) continue;
    ++effective_rank;
    if (IsRelevant(label)) {
      ++hits;
      precision_sum += double(hits) / double(effective_rank);
    }
  }
  if (total_relevant == 0) return std::nullopt;
  return precision_sum / double(total_relevant);
}

UkbScore ComputeUkbScore(std::span<const RankedList> ranked,
                         std::span<const Labels> labels) {
  if (ranked.size() != labels.size()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "UKB needs one label map per ranked list");
  }
  if (ranked.empty()) throw Error(ErrorKind::kEmptyInput, "no queries");
  std::size_t hits = 0;
  for (std::size_t q = 0; q < ranked.size(); ++q) {
    std::size_t relevant = 0;
    for (const auto& [id, label] : labels[q]) relevant += IsRelevant(label);
    if (relevant != 4) {
      throw Error(ErrorKind::kInvariant,
                  "UKB query '" + ranked[q].query_id + "' has " +
                      std::to_string(relevant) + " relevant references, not 4");
    }
    const std::size_t top = std::min<std::size_t>(4, ranked[q].entries.size());
    for (std::size_t k = 0; k < top; ++k) {
      hits += IsRelevant(
          LabelOf(labels[q], ranked[q].query_id, ranked[q].entries[k].reference_id));
    }
  }
  UkbScore score;
  score.recall4 = double(hits) / double(4 * ranked.size());
  score.ns_score = score.recall4 * 4.0;
  return score;
}

EvalReport Evaluate(const DatasetManifest& manifest,
                    std::span<const RankedList> ranked,
                    const std::string& config_label) {
  EvalReport report;
  report.dataset_name = manifest.dataset_name;
  report.config = config_label;

  std::vector<RankedList> scored;
  std::vector<Labels> scored_labels;
  bool ukb_shaped = true;
  for (RankedList list : ranked) {
    Labels labels = manifest.LabelsFor(list.query_id);
    // A query never counts as its own match.
    labels.erase(list.query_id);
    std::erase_if(list.entries, [&](const RankedEntry& e) {
      return e.reference_id == list.query_id;
    });
    const std::optional<double> ap = AveragePrecision(list, labels);
    if (!ap) {
      report.excluded_queries.push_back(list.query_id);
      continue;
    }
    if (!report.per_query_ap.emplace(list.query_id, *ap).second) {
      throw Error(ErrorKind::kDuplicateId,
                  "query '" + list.query_id + "' ranked twice");
    }
    std::size_t relevant = 0;
    for (const auto& [id, label] : labels) relevant += IsRelevant(label);
    ukb_shaped = ukb_shaped && relevant == 4;
    scored.push_back(list);
    scored_labels.push_back(std::move(labels));
  }
  if (!report.per_query_ap.empty()) {
    double sum = 0.0;
    for (const auto& [id, ap] : report.per_query_ap) sum += ap;
    report.mean_ap = sum / double(report.per_query_ap.size());
  }
  if (ukb_shaped && !scored.empty()) {
    const UkbScore ukb = ComputeUkbScore(scored, scored_labels);
    report.ukb_recall4 = ukb.recall4;
    report.ukb_ns = ukb.ns_score;
  }
  for (const auto& [id, ap] : report.per_query_ap) {
    if (!(ap >= 0.0 && ap <= 1.0)) {
      throw Error(ErrorKind::kInvariant, "AP out of [0, 1] for '" + id + "'");
    }
  }
  return report;
}

std::string ToJson(const EvalReport& report) {
  nlohmann::ordered_json doc;
  doc["dataset"] = report.dataset_name;
  doc["config"] = report.config;
  doc["mean_ap"] = report.mean_ap;
  doc["queries_scored"] = report.per_query_ap.size();
  doc["ukb_recall4"] = report.ukb_recall4 ? nlohmann::ordered_json(*report.ukb_recall4)
                                          : nlohmann::ordered_json(nullptr);
  doc["ukb_ns"] = report.ukb_ns ? nlohmann::ordered_json(*report.ukb_ns)
                                : nlohmann::ordered_json(nullptr);
  doc["dims_per_reference"] = report.dims_per_reference;
  doc["wall_time_seconds"] = report.wall_time_seconds;
  nlohmann::ordered_json per_query = nlohmann::ordered_json::object();
  for (const auto& [id, ap] : report.per_query_ap) per_query[id] = ap;
  doc["per_query_ap"] = std::move(per_query);
  doc["excluded_queries"] = report.excluded_queries;
  return doc.dump(2) + "\n";
}

EvalReport EvalReportFromJson(const std::string& text) {
  try {
    const auto doc = nlohmann::json::parse(text);
    EvalReport r;
    r.dataset_name = doc.at("dataset").get<std::string>();
    r.config = doc.at("config").get<std::string>();
    r.mean_ap = doc.at("mean_ap").get<double>();
    if (!doc.at("ukb_recall4").is_null()) {
      r.ukb_recall4 = doc.at("ukb_recall4").get<double>();
    }
    if (!doc.at("ukb_ns").is_null()) r.ukb_ns = doc.at("ukb_ns").get<double>();
    r.dims_per_reference = doc.at("dims_per_reference").get<std::size_t>();
    r.wall_time_seconds = doc.at("wall_time_seconds").get<double>();
    for (const auto& [id, ap] : doc.at("per_query_ap").items()) {
      r.per_query_ap[id] = ap.get<double>();
    }
    r.excluded_queries =
        doc.at("excluded_queries").get<std::vector<std::string>>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, e.what());
  }
}

std::string FormatTableHeader() {
  std::ostringstream out;
  out << std::left << std::setw(28) << "Method" << std::right << std::setw(8)
      << "#dim" << std::setw(9) << "mAP" << std::setw(9) << "UKB"
      << std::setw(8) << "N-S";
  return out.str();
}

std::string FormatTableRow(const EvalReport& report) {
  std::ostringstream out;
  out << std::left << std::setw(28) << report.config << std::right
      << std::setw(8) << report.dims_per_reference << std::fixed
      << std::setprecision(1) << std::setw(9) << report.mean_ap * 100.0;
  if (report.ukb_recall4) {
    out << std::setw(9) << *report.ukb_recall4 * 100.0 << std::setprecision(2)
        << std::setw(8) << *report.ukb_ns;
  } else {
    out << std::setw(9) << "-" << std::setw(8) << "-";
  }
  return out.str();
}

}  // namespace patchdex
