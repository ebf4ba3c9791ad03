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
// patchdex command-line interface:
//   synth | encode | whiten-fit | query | eval | ablate | layout

#include <omp.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "patchdex/ablation.hpp"
#include "patchdex/error.hpp"
#include "patchdex/eval.hpp"
#include "patchdex/feature_io.hpp"
#include "patchdex/matcher.hpp"
#include "patchdex/patch_geometry.hpp"
#include "patchdex/pooling.hpp"
#include "patchdex/synth.hpp"
#include "patchdex/whitening.hpp"

namespace fs = std::filesystem;
using namespace patchdex;

namespace {

std::vector<fs::path> FilesWithExtension(const fs::path& dir,
                                         const std::string& ext) {
  if (!fs::is_directory(dir)) {
    throw Error(ErrorKind::kIo, "not a directory: " + dir.string());
  }
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ext) {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<PatchFeatureSet> LoadFeatureDir(const fs::path& dir) {
  std::vector<PatchFeatureSet> sets;
  for (const fs::path& p : FilesWithExtension(dir, ".fset")) {
    sets.push_back(ReadFeatureSetFile(p));
  }
  return sets;
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::kIo, "write failed: " + path.string());
}

void SetThreads(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

struct SynthArgs {
  SynthSpec spec;
  std::string out;
  std::string planting = "smaller";
  std::string placement = "full";
  bool per_patch = false;
};

int RunSynth(const SynthArgs& a) {
  SynthSpec spec = a.spec;
  static const std::map<std::string, Planting> plantings = {
      {"smaller", Planting::kSmaller},
      {"bigger", Planting::kBigger},
      {"translated", Planting::kTranslated},
      {"partial", Planting::kPartial}};
  static const std::map<std::string, QueryPlacement> placements = {
      {"full", QueryPlacement::kFull}, {"offcenter", QueryPlacement::kOffCenter}};
  spec.planting = plantings.at(a.planting);
  spec.query_placement = placements.at(a.placement);
  const SynthDataset ds = GenerateSynthDataset(spec);
  WriteSynthDataset(ds, a.out, a.per_patch);
  std::cout << "wrote " << ds.scenes.size() << " images to " << a.out << "\n";
  return 0;
}

struct EncodeArgs {
  std::string manifest;
  std::string in;
  std::string out;
  int grid = 0;
  bool per_patch = false;
};

int RunEncode(const EncodeArgs& a) {
  const DatasetManifest m = LoadManifestFile(a.manifest);
  const int grid = a.grid > 0 ? a.grid : m.pool_grid;
  const MapSource source = DirectoryMapSource(a.in);
  const struct {
    Role role;
    const char* dir;
    int levels;
  } groups[] = {{Role::kReference, "index", m.levels_reference},
                {Role::kQuery, "queries", m.levels_query},
                {Role::kTrain, "train", m.levels_reference}};
  for (const auto& g : groups) {
    const auto sets = EncodeRole(m, source, g.role, g.levels, grid, a.per_patch);
    if (sets.empty()) continue;
    const fs::path dir = fs::path(a.out) / g.dir;
    fs::create_directories(dir);
    for (const auto& s : sets) WriteFeatureSetFile(s, dir / (s.image_id + ".fset"));
    std::cout << "encoded " << sets.size() << " " << ToString(g.role)
              << " images into " << dir.string() << "\n";
  }
  return 0;
}

int RunWhitenFit(const std::string& features, const std::string& out,
                 double keep) {
  const auto sets = LoadFeatureDir(features);
  const WhiteningModel model = FitWhitening(CollectPatchVectors(sets), keep);
  WriteWhiteningModelFile(model, out);
  std::cout << "whitening " << model.input_dim << " -> " << model.kept_dim
            << " dims from " << sets.size() << " images\n";
  return 0;
}

struct QueryArgs {
  std::string index;
  std::string queries;
  std::string model;
  std::string out;
  std::string dump;
  bool similarity = false;
  bool quantized = false;
  double budget_mb = 64;
  int threads = 0;
};

int RunQuery(const QueryArgs& a) {
  if (a.quantized && a.similarity) {
    throw Error(ErrorKind::kInvariant,
                "--quantized and --similarity are exclusive");
  }
  if (a.quantized && a.model.empty()) {
    throw Error(ErrorKind::kInvariant, "--quantized needs --model");
  }
  std::vector<PatchFeatureSet> index = LoadFeatureDir(a.index);
  std::vector<PatchFeatureSet> queries = LoadFeatureDir(a.queries);
  if (!a.model.empty()) {
    const WhiteningModel model = ReadWhiteningModelFile(a.model);
    for (auto& s : index) s = ApplyWhitening(model, s);
    for (auto& s : queries) s = ApplyWhitening(model, s);
  }
  std::vector<PackedSet> packed_index, packed_queries;
  for (const auto& s : index) {
    packed_index.push_back(a.quantized ? PackQuantized(s) : Pack(s));
  }
  for (const auto& s : queries) {
    packed_queries.push_back(a.quantized ? PackQuantized(s) : Pack(s));
  }
  MatchOptions options;
  options.metric = a.quantized    ? Metric::kHamming
                   : a.similarity ? Metric::kSimilarity
                                  : Metric::kL2;
  options.threads = a.threads;
  options.memory_budget_bytes =
      static_cast<std::size_t>(std::max(1.0, a.budget_mb * 1024 * 1024));
  options.exclude_self = true;
  const auto lists = RankAll(packed_queries, packed_index, options);
  {
    std::ofstream out(a.out, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::kIo, "cannot open " + a.out);
    WriteRanksTsv(lists, out);
  }
  if (!a.dump.empty()) {
    std::ofstream out(a.dump, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::kIo, "cannot open " + a.dump);
    WritePatchDistanceMatrix(packed_queries, packed_index, out);
  }
  std::cout << "ranked " << lists.size() << " queries against "
            << index.size() << " references\n";
  return 0;
}

int RunEval(const std::string& manifest_path, const std::string& ranks_path,
            const std::string& out, const std::string& label,
            std::size_t dims) {
  const DatasetManifest m = LoadManifestFile(manifest_path);
  std::ifstream in(ranks_path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + ranks_path);
  const auto lists = ReadRanksTsv(in);
  EvalReport report = Evaluate(m, lists, label);
  report.dims_per_reference = dims;
  if (!out.empty()) WriteText(out, ToJson(report));
  std::cout << FormatTableHeader() << "\n" << FormatTableRow(report) << "\n";
  if (!report.excluded_queries.empty()) {
    std::cout << report.excluded_queries.size()
              << " queries without relevant references were excluded\n";
  }
  return 0;
}

int RunAblate(const std::string& manifest_path, const std::string& in,
              const std::string& configs_text, const std::string& out,
              bool per_patch, int threads) {
  const DatasetManifest m = LoadManifestFile(manifest_path);
  std::vector<PipelineConfig> configs;
  if (configs_text.empty()) {
    configs = StandardConfigs();
  } else {
    std::size_t start = 0;
    while (start <= configs_text.size()) {
      std::size_t end = configs_text.find(',', start);
      if (end == std::string::npos) end = configs_text.size();
      configs.push_back(ParseConfig(configs_text.substr(start, end - start)));
      start = end + 1;
    }
  }
  PipelineOptions options;
  options.per_patch = per_patch;
  options.match.threads = threads;
  const auto reports = RunAblation(m, DirectoryMapSource(in), configs, options);
  std::cout << FormatTableHeader() << "\n";
  std::string json = "[\n";
  for (std::size_t k = 0; k < reports.size(); ++k) {
    std::cout << FormatTableRow(reports[k]) << "\n";
    json += ToJson(reports[k]);
    if (k + 1 < reports.size()) json += ",\n";
  }
  json += "]\n";
  if (!out.empty()) WriteText(out, json);
  return 0;
}

int RunLayout(int w, int h, int levels) {
  const PatchLayout layout = MakePatchLayout(w, h, levels);
  nlohmann::ordered_json doc;
  doc["width"] = layout.width;
  doc["height"] = layout.height;
  doc["levels"] = layout.levels;
  doc["sides"] = PatchSides(w, h, levels);
  auto patches = nlohmann::ordered_json::array();
  for (const PatchRect& r : layout.patches) {
    patches.push_back({{"l", r.id.level},
                       {"i", r.id.i},
                       {"j", r.id.j},
                       {"rect", {r.x0, r.y0, r.x1, r.y1}}});
  }
  doc["patches"] = std::move(patches);
  std::cout << doc.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"patchdex: multi-resolution patch retrieval engine"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (0: OpenMP default)");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
  synth_cmd->add_option("--out", synth.out, "output directory")->required();
  synth_cmd->add_option("--seed", synth.spec.seed);
  synth_cmd->add_option("--instances", synth.spec.n_instances);
  synth_cmd->add_option("--refs-per-instance", synth.spec.refs_per_instance);
  synth_cmd->add_option("--queries", synth.spec.n_queries);
  synth_cmd->add_option("--distractors", synth.spec.n_distractors);
  synth_cmd->add_option("--train", synth.spec.n_train);
  synth_cmd->add_option("--channels", synth.spec.channels);
  synth_cmd->add_option("--sigma", synth.spec.sigma);
  synth_cmd->add_option("--levels", synth.spec.levels);
  synth_cmd->add_option("--gain", synth.spec.gain);
  synth_cmd->add_option("--clutter", synth.spec.clutter_grid,
                        "clutter tiles per side, 0 for none");
  synth_cmd->add_option("--planting", synth.planting)
      ->check(CLI::IsMember({"smaller", "bigger", "translated", "partial"}));
  synth_cmd->add_option("--query-placement", synth.placement)
      ->check(CLI::IsMember({"full", "offcenter"}));
  synth_cmd->add_flag("--per-patch", synth.per_patch,
                      "also write one map per patch");

  EncodeArgs encode;
  auto* encode_cmd = app.add_subcommand("encode", "pool response maps into FSET files");
  encode_cmd->add_option("--manifest", encode.manifest)->required();
  encode_cmd->add_option("--in", encode.in, "directory of RMAP files")->required();
  encode_cmd->add_option("--out", encode.out)->required();
  encode_cmd->add_option("--grid", encode.grid, "pooling grid (default: manifest)");
  encode_cmd->add_flag("--per-patch", encode.per_patch);

  std::string wf_features, wf_out;
  double wf_keep = 0.5;
  auto* wf_cmd = app.add_subcommand("whiten-fit", "fit a PCA whitening model");
  wf_cmd->add_option("--features", wf_features, "directory of FSET files")->required();
  wf_cmd->add_option("--out", wf_out)->required();
  wf_cmd->add_option("--keep", wf_keep, "fraction of dimensions kept");

  QueryArgs query;
  auto* query_cmd = app.add_subcommand("query", "rank references for each query");
  query_cmd->add_option("--index", query.index)->required();
  query_cmd->add_option("--queries", query.queries)->required();
  query_cmd->add_option("--model", query.model);
  query_cmd->add_option("--out", query.out)->required();
  query_cmd->add_flag("--similarity", query.similarity);
  query_cmd->add_flag("--quantized", query.quantized);
  query_cmd->add_option("--memory-budget-mb", query.budget_mb);
  query_cmd->add_option("--dump-dmatrix", query.dump);

  std::string ev_manifest, ev_ranks, ev_out, ev_label = "custom";
  std::size_t ev_dims = 0;
  auto* eval_cmd = app.add_subcommand("eval", "score a ranks TSV");
  eval_cmd->add_option("--manifest", ev_manifest)->required();
  eval_cmd->add_option("--ranks", ev_ranks)->required();
  eval_cmd->add_option("--out", ev_out, "JSON report path");
  eval_cmd->add_option("--label", ev_label);
  eval_cmd->add_option("--dims", ev_dims, "dims per reference to record");

  std::string ab_manifest, ab_in, ab_configs, ab_out;
  bool ab_per_patch = false;
  auto* ablate_cmd = app.add_subcommand("ablate", "run ablation configs end to end");
  ablate_cmd->add_option("--manifest", ab_manifest)->required();
  ablate_cmd->add_option("--in", ab_in, "directory of RMAP files")->required();
  ablate_cmd->add_option("--configs", ab_configs,
                         "comma-separated labels, default: all standard rows");
  ablate_cmd->add_option("--out", ab_out, "JSON report path");
  ablate_cmd->add_flag("--per-patch", ab_per_patch);

  int lw = 0, lh = 0, ll = 0;
  auto* layout_cmd = app.add_subcommand("layout", "print the patch layout as JSON");
  layout_cmd->set_help_flag("--help", "print this help message and exit");
  layout_cmd->add_option("--w", lw)->required();
  layout_cmd->add_option("--h", lh)->required();
  layout_cmd->add_option("--L", ll)->required();

  CLI11_PARSE(app, argc, argv);
  try {
    SetThreads(threads);
    query.threads = threads;
    if (*synth_cmd) return RunSynth(synth);
    if (*encode_cmd) return RunEncode(encode);
    if (*wf_cmd) return RunWhitenFit(wf_features, wf_out, wf_keep);
    if (*query_cmd) return RunQuery(query);
    if (*eval_cmd) return RunEval(ev_manifest, ev_ranks, ev_out, ev_label, ev_dims);
    if (*ablate_cmd) {
      return RunAblate(ab_manifest, ab_in, ab_configs, ab_out, ab_per_patch,
                       threads);
    }
    if (*layout_cmd) return RunLayout(lw, lh, ll);
  } catch (const Error& e) {
    std::cerr << "patchdex: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "patchdex: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
