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
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "doctest.h"
#include "json.hpp"
#include "patchdex/feature_io.hpp"
#include "patchdex/matcher.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "patchdex_test_cli";

int Run(const std::string& args, const fs::path& stdout_file = kWork / "log.txt") {
  const std::string cmd = std::string("\"") + PATCHDEX_CLI + "\" " + args +
                          " 2>>\"" + (kWork / "log.txt").string() + "\" >>\"" +
                          stdout_file.string() + "\"";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string P(const std::string& rel) { return "\"" + (kWork / rel).string() + "\""; }

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("end-to-end pipeline through the command line") {
  fs::remove_all(kWork);
  fs::create_directories(kWork);
  REQUIRE(Run("synth --out " + P("ds") +
              " --seed 3 --instances 4 --refs-per-instance 2 --queries 4"
              " --channels 16 --train 6") == 0);
  REQUIRE(Run("encode --manifest " + P("ds/manifest.json") + " --in " + P("ds") +
              " --out " + P("enc")) == 0);
  CHECK(fs::exists(kWork / "enc/index/r0000.fset"));
  CHECK(fs::exists(kWork / "enc/queries/q0000.fset"));
  REQUIRE(Run("whiten-fit --features " + P("enc/train") + " --out " + P("model.wmdl")) == 0);

  for (int threads : {1, 3}) {
    const std::string t = std::to_string(threads);
    REQUIRE(Run("--threads " + t + " query --index " + P("enc/index") + " --queries " +
                P("enc/queries") + " --model " + P("model.wmdl") + " --out " +
                P("ranks" + t + ".tsv")) == 0);
    REQUIRE(Run("--threads " + t + " eval --manifest " + P("ds/manifest.json") +
                " --ranks " + P("ranks" + t + ".tsv") + " --out " +
                P("report" + t + ".json") + " --label MR4+Jtr3+PCAw") == 0);
  }
  CHECK(Slurp(kWork / "ranks1.tsv") == Slurp(kWork / "ranks3.tsv"));
  CHECK(Slurp(kWork / "report1.json") == Slurp(kWork / "report3.json"));

  std::ifstream tsv(kWork / "ranks1.tsv");
  const auto lists = patchdex::ReadRanksTsv(tsv);
  REQUIRE(lists.size() == 4);
  for (const auto& l : lists) CHECK(l.entries.size() == 8);

  const auto report = nlohmann::json::parse(Slurp(kWork / "report1.json"));
  CHECK(report.at("config") == "MR4+Jtr3+PCAw");
  CHECK(report.at("mean_ap").get<double>() >= 0.0);

  REQUIRE(Run("query --index " + P("enc/index") + " --queries " + P("enc/queries") +
              " --model " + P("model.wmdl") + " --quantized --out " + P("ranks_q.tsv")) == 0);
  REQUIRE(Run("query --index " + P("enc/index") + " --queries " + P("enc/queries") +
              " --similarity --out " + P("ranks_s.tsv") + " --dump-dmatrix " +
              P("d.dmat")) == 0);
  CHECK(Slurp(kWork / "d.dmat").substr(0, 4) == "DMAT");
}

TEST_CASE("layout subcommand") {
  fs::create_directories(kWork);
  fs::remove(kWork / "layout.json");
  REQUIRE(Run("layout --w 600 --h 600 --L 4", kWork / "layout.json") == 0);
  const auto doc = nlohmann::json::parse(Slurp(kWork / "layout.json"));
  CHECK(doc.at("patches").size() == 30);
  CHECK(doc.at("sides") == nlohmann::json({600, 400, 300, 240}));
}

TEST_CASE("error exit codes") {
  fs::create_directories(kWork);
  CHECK(Run("eval --manifest " + P("missing.json") + " --ranks " + P("r.tsv") +
            " --out " + P("o.json")) == 2);
  CHECK(Run("layout --w 0 --h 600 --L 4") == 2);
  CHECK(Run("") != 0);
  CHECK(Run("no-such-command") != 0);
}
