// Copyright 2026 The Refgame Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "refgame/checkpoint.h"
#include "refgame/run.h"

using namespace refgame;
namespace fs = std::filesystem;

namespace {

const fs::path kWork = REFGAME_WORK_DIR;

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json SmokeConfig() { return nlohmann::json::parse(Slurp(REFGAME_SMOKE_CONFIG)); }

fs::path WriteConfig(const std::string& name, const nlohmann::json& j) {
  fs::create_directories(kWork);
  const fs::path p = kWork / (name + ".json");
  std::ofstream(p) << j.dump(2);
  return p;
}

int Run(const std::string& args) {
  const std::string cmd = std::string(REFGAME_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

int RunCmd(const std::string& cmd, const fs::path& config, const fs::path& out,
           const std::string& extra = "") {
  return Run(cmd + " --config " + config.string() + " --out " + out.string() + " " + extra);
}

std::string LastLine(const fs::path& p) {
  std::ifstream in(p);
  std::string line, last;
  while (std::getline(in, line))
    if (!line.empty()) last = line;
  return last;
}

// One smoke run shared by the tests below.
const fs::path& SmokeRun() {
  static const fs::path out = [] {
    const fs::path o = kWork / "smoke_a";
    fs::remove_all(o);
    const fs::path cfg = WriteConfig("smoke", SmokeConfig());
    for (const char* cmd : {"gen-data", "train", "eval", "analyze", "probe", "seeds"})
      REQUIRE(RunCmd(cmd, cfg, o) == 0);
    return o / "smoke";
  }();
  return out;
}

}  // namespace

TEST_CASE("seed summary rows") {
  std::vector<double> flat{0.5, 0.5, 0.5};
  SeedSummaryRow a = Summarize("acc", flat);
  CHECK(a.avg == 0.5);
  CHECK(a.sd == 0.0);
  CHECK(a.min == 0.5);
  CHECK(a.max == 0.5);
  std::vector<double> two{0.0, 1.0};
  SeedSummaryRow b = Summarize("acc", two);
  CHECK(b.avg == 0.5);
  CHECK(b.sd == 0.5);
  CHECK(b.min == 0.0);
  CHECK(b.max == 1.0);
  std::vector<SeedSummaryRow> rows{a, b};
  const std::string table = FormatSeedTable(rows);
  CHECK(std::count(table.begin(), table.end(), '\n') == 3);
}

TEST_CASE("config errors exit with 2") {
  CHECK(Run("train --config " + (kWork / "missing.json").string()) == 2);
  nlohmann::json bad = SmokeConfig();
  bad["train"]["epoch"] = 3;
  CHECK(RunCmd("train", WriteConfig("bad_key", bad), kWork / "bad") == 2);
  nlohmann::json bad_seeds = SmokeConfig();
  bad_seeds["seeds"]["seeds"] = {1};
  CHECK(RunCmd("seeds", WriteConfig("bad_seeds", bad_seeds), kWork / "bad") == 2);
  CHECK(Run("frobnicate --config x.json") == 2);
  // Eval before any training: missing checkpoint.
  CHECK(RunCmd("eval", WriteConfig("smoke", SmokeConfig()), kWork / "empty") == 2);
  CHECK_THROWS_AS(LoadRunConfig((kWork / "missing.json").string()), InputError);
}

TEST_CASE("divergence exits with 3 and failing seeds with 4") {
  nlohmann::json c = SmokeConfig();
  c["train"]["learning_rate"] = 1e200;
  c["variants"] = {"+aug-shared"};
  const fs::path cfg = WriteConfig("diverge", c);
  CHECK(RunCmd("train", cfg, kWork / "diverge") == 3);
  CHECK(RunCmd("seeds", cfg, kWork / "diverge") == 4);
  nlohmann::json seeds = nlohmann::json::parse(Slurp(kWork / "diverge/smoke/seeds.json"));
  CHECK(seeds["failures"].size() == 2);
}

TEST_CASE("gen-data is idempotent and lists the split categories") {
  const fs::path cfg = WriteConfig("smoke", SmokeConfig());
  REQUIRE(RunCmd("gen-data", cfg, kWork / "gen1") == 0);
  REQUIRE(RunCmd("gen-data", cfg, kWork / "gen2") == 0);
  const std::string a = Slurp(kWork / "gen1/smoke/manifest.json");
  CHECK(a == Slurp(kWork / "gen2/smoke/manifest.json"));
  nlohmann::json m = nlohmann::json::parse(a);
  CHECK(m["splits"]["train"]["categories"].size() == 24);
  CHECK(m["splits"]["ood"]["categories"].size() == 8);
}

TEST_CASE("train writes checkpoints whose sidecars echo the variant") {
  const fs::path run = SmokeRun();
  nlohmann::json plain = nlohmann::json::parse(Slurp(run / "checkpoints/game+aug-shared.ckpt.json"));
  CHECK(plain["variant"]["augmentations"] == true);
  CHECK(plain["variant"]["shared"] == false);
  nlohmann::json degenerate = nlohmann::json::parse(Slurp(run / "checkpoints/game-aug+shared.ckpt.json"));
  CHECK(degenerate["variant"]["augmentations"] == false);
  CHECK(degenerate["variant"]["shared"] == true);
  for (const auto& t : ReadCheckpoint((run / "checkpoints/simclr+aug.ckpt").string())) {
    CHECK(t.name.find("receiver") == std::string::npos);
    CHECK(t.name.find("sender") == std::string::npos);
  }
  int shared_encoder = 0;
  for (const auto& t : ReadCheckpoint((run / "checkpoints/game-aug+shared.ckpt").string()))
    shared_encoder += t.name.rfind("encoder.", 0) == 0;
  CHECK(shared_encoder > 0);
  CHECK(Slurp(run / "metrics.jsonl").find("seconds") == std::string::npos);
  CHECK(fs::exists(run / "metrics_timing.jsonl"));
}

TEST_CASE("eval and analysis reports") {
  const fs::path run = SmokeRun();
  nlohmann::json e = nlohmann::json::parse(Slurp(run / "eval.json"));
  CHECK(e["chance"] == 1.0 / 16);
  for (const auto& [variant, r] : e["results"].items()) {
    for (const char* split : {"val", "ood", "blob"}) {
      CHECK(r.contains(split));
      CHECK(r[split].get<double>() >= 0.0);
      CHECK(r[split].get<double>() <= 1.0);
    }
  }
  RunConfig echoed = LoadRunConfig(REFGAME_SMOKE_CONFIG);
  ApplyOverrides(echoed, {.out_dir = (kWork / "smoke_a").string()});
  CHECK(e["config"] == echoed.ToJson());

  nlohmann::json a = nlohmann::json::parse(Slurp(run / "analysis.json"));
  for (const char* key : {"game+aug-shared", "game-aug+shared", "simclr-disc", "simclr-kmeans"}) {
    CAPTURE(key);
    REQUIRE(a["reports"].contains(key));
    const auto& val = a["reports"][key]["val"];
    CHECK(val["nmi"].get<double>() >= 0.0);
    CHECK(val["nmi"].get<double>() <= 1.0);
    CHECK(val["p_nmi"].get<double>() > 0.0);
    CHECK(val["protocol_size"].get<int>() >= 1);
  }
}

TEST_CASE("analyze from records and features") {
  const fs::path cfg = WriteConfig("smoke", SmokeConfig());
  const fs::path out = kWork / "records";
  fs::create_directories(out);
  Taxonomy t = BuildTaxonomy({});
  const auto leaves = t.Leaves();
  std::vector<ProtocolRecord> bij, constant;
  for (std::size_t i = 0; i < 96; ++i) {
    bij.push_back({i, leaves[i % 24], i % 24});
    constant.push_back({i, leaves[i % 24], 0});
  }
  WriteProtocolCsv((out / "bij.csv").string(), bij);
  WriteProtocolCsv((out / "const.csv").string(), constant);

  REQUIRE(RunCmd("analyze", cfg, out, "--records " + (out / "bij.csv").string()) == 0);
  nlohmann::json a = nlohmann::json::parse(Slurp(out / "smoke/analysis.json"));
  const nlohmann::json* rep = nullptr;
  for (const auto& [k, v] : a["reports"].items()) rep = &v;
  REQUIRE(rep);
  CHECK(rep->dump().find("\"nmi\":1.0") != std::string::npos);

  REQUIRE(RunCmd("analyze", cfg, out, "--records " + (out / "const.csv").string()) == 0);
  const std::string c = Slurp(out / "smoke/analysis.json");
  CHECK(c.find("\"nmi\": 0.0") != std::string::npos);
  CHECK(c.find("\"significant\": false") != std::string::npos);
  CHECK(c.find("\"significant\": true") == std::string::npos);

  Rng rng(3);
  Tensor features(Shape{60, 4}), labels(Shape{60});
  for (std::size_t i = 0; i < 60; ++i) {
    labels.mutable_data()[i] = leaves[i % 3];
    for (std::size_t j = 0; j < 4; ++j) features.mutable_data()[i * 4 + j] = rng.Normal() + 10.0 * (i % 3);
  }
  WriteCheckpoint((out / "feat.bin").string(), {{"features", features}, {"labels", labels}});
  REQUIRE(RunCmd("analyze", cfg, out, "--features " + (out / "feat.bin").string() + " --k 3") == 0);
  CHECK(Slurp(out / "smoke/analysis.json").find("simclr-kmeans") != std::string::npos);
}

TEST_CASE("probe report") {
  nlohmann::json p = nlohmann::json::parse(Slurp(SmokeRun() / "probe.json"));
  for (const auto& [variant, r] : p["results"].items()) {
    CAPTURE(variant);
    CHECK(r["checkpoint_unchanged"] == true);
    for (const char* side : {"trained", "random_init"}) {
      const auto& res = r["in_distribution"][side];
      std::size_t correct = 0, total = 0;
      for (const auto& c : res["per_class"]) {
        correct += c["correct"].get<std::size_t>();
        total += c["total"].get<std::size_t>();
      }
      CHECK(res["top1"].get<double>() == doctest::Approx(double(correct) / total));
    }
    CHECK(r.contains("transfer"));
  }
}

TEST_CASE("seeds table") {
  nlohmann::json s = nlohmann::json::parse(Slurp(SmokeRun() / "seeds.json"));
  CHECK(s["completed"].size() == 2);
  CHECK(s["failures"].empty());
  const std::string table = s["table"];
  CHECK(static_cast<std::size_t>(std::count(table.begin(), table.end(), '\n')) == s["rows"].size() + 1);
  for (const auto& r : s["rows"]) {
    CHECK(r["min"].get<double>() <= r["avg"].get<double>() + 1e-12);
    CHECK(r["avg"].get<double>() <= r["max"].get<double>() + 1e-12);
    CHECK(r["sd"].get<double>() >= 0.0);
  }
}

TEST_CASE("every report is byte-identical on rerun") {
  const fs::path run = SmokeRun();
  const std::vector<std::string> files{"manifest.json", "eval.json", "analysis.json",
                                       "probe.json", "seeds.json", "metrics.jsonl",
                                       "checkpoints/game+aug-shared.ckpt",
                                       "checkpoints/simclr+aug.ckpt.json"};
  std::vector<std::string> before;
  for (const auto& f : files) before.push_back(Slurp(run / f));
  const std::string last = LastLine(run / "metrics.jsonl");
  const fs::path cfg = WriteConfig("smoke", SmokeConfig());
  for (const char* cmd : {"gen-data", "train", "eval", "analyze", "probe", "seeds", "report"})
    REQUIRE(RunCmd(cmd, cfg, kWork / "smoke_a") == 0);
  for (std::size_t i = 0; i < files.size(); ++i) {
    CAPTURE(files[i]);
    CHECK(Slurp(run / files[i]) == before[i]);
  }
  CHECK(LastLine(run / "metrics.jsonl") == last);
  CHECK(fs::exists(run / "plots/game_accuracy.svg"));
}

TEST_CASE("flags override the config and are echoed") {
  const fs::path cfg = WriteConfig("smoke", SmokeConfig());
  const fs::path out = kWork / "override";
  REQUIRE(RunCmd("train", cfg, out, "--seed 11 --variant=-aug-shared --run-id other") == 0);
  CHECK(fs::exists(out / "other/checkpoints/game-aug-shared.ckpt"));
  CHECK_FALSE(fs::exists(out / "other/checkpoints/game+aug-shared.ckpt"));
  nlohmann::json side =
      nlohmann::json::parse(Slurp(out / "other/checkpoints/game-aug-shared.ckpt.json"));
  CHECK(side["train_config"]["seed"] == 11);
  CHECK(side["variant"]["augmentations"] == false);
}
