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

#ifndef REFGAME_RUN_H_
#define REFGAME_RUN_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "refgame/dataset.h"
#include "refgame/errors.h"
#include "refgame/game.h"
#include "refgame/probe.h"
#include "refgame/protocol.h"

namespace refgame {

struct EvalSettings {
  std::size_t n = 32;
  std::size_t games = 2048;
  std::size_t blob_games = 1024;
  std::vector<std::string> splits{"val", "ood", "blob"};

  nlohmann::json ToJson() const;
  static EvalSettings FromJson(const nlohmann::json& j);
};

struct AnalysisSettings {
  AnalysisConfig config;
  std::vector<std::string> splits{"val"};
  // "simclr-disc" and/or "simclr-kmeans"; both need a trained simclr variant.
  std::vector<std::string> baselines{"simclr-disc", "simclr-kmeans"};

  nlohmann::json ToJson() const;
  static AnalysisSettings FromJson(const nlohmann::json& j);
};

struct ProbeSettings {
  ProbeConfig config;
  // Render offsets of the transfer world.
  double transfer_hue_shift = 30.0;
  double transfer_background_shift = 0.1;
  bool transfer = true;

  nlohmann::json ToJson() const;
  static ProbeSettings FromJson(const nlohmann::json& j);
};

struct SeedSettings {
  std::vector<std::uint64_t> seeds{1, 2, 3};
  Variant variant;  // the representative model
  // Per-seed training length; 0 keeps train.epochs.
  int epochs = 0;

  nlohmann::json ToJson() const;
  static SeedSettings FromJson(const nlohmann::json& j);
};

// Union of every module config. All effective values are echoed into each
// output document.
struct RunConfig {
  std::string run_id = "default";
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  DataConfig data;
  TrainConfig train;  // variant and seed are filled per job
  std::vector<Variant> variants;
  EvalSettings eval;
  AnalysisSettings analysis;
  ProbeSettings probe;
  SeedSettings seeds;

  RunConfig();
  void Validate() const;
  nlohmann::json ToJson() const;
  static RunConfig FromJson(const nlohmann::json& j);

  std::filesystem::path RunDir() const;
  std::filesystem::path CheckpointPath(const Variant& variant) const;
  TrainConfig TrainFor(const Variant& variant) const;
};

// Reads and validates a JSON config file; ConfigError/InputError on failure.
RunConfig LoadRunConfig(const std::string& path);

// Command-line overrides applied after the file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant;
  std::optional<std::string> out_dir;
  std::optional<std::string> run_id;
};
void ApplyOverrides(RunConfig& config, const Overrides& overrides);

// Writes `payload` with a trailing newline; byte-stable for equal payloads.
void WriteJson(const std::filesystem::path& path, const nlohmann::json& payload);
nlohmann::json ReadJson(const std::filesystem::path& path);

// Each command writes its documents under RunDir() and returns the main one.
nlohmann::json CmdGenData(const RunConfig& config, bool materialize = false);
nlohmann::json CmdTrain(const RunConfig& config);
nlohmann::json CmdEval(const RunConfig& config);
nlohmann::json CmdAnalyze(const RunConfig& config);
// Records from a CSV instead of a checkpoint. The taxonomy comes from the
// data config when every category is one of its leaves.
nlohmann::json CmdAnalyzeRecords(const RunConfig& config, const std::string& csv_path);
// k-means on a feature file (checkpoint container with "features" [N x D]
// and "labels" [N]).
nlohmann::json CmdAnalyzeFeatures(const RunConfig& config, const std::string& path,
                                  std::size_t k);
nlohmann::json CmdProbe(const RunConfig& config);
// Throws PartialFailure after writing the partial summary.
// Config of one seed's run under <run>/seeds/seed-N.
RunConfig SeedRunConfig(const RunConfig& config, std::uint64_t seed);
nlohmann::json CmdSeeds(const RunConfig& config);
nlohmann::json CmdReport(const RunConfig& config);

class PartialFailure : public Error {
 public:
  using Error::Error;
};

struct SeedSummaryRow {
  std::string metric;
  double avg = 0.0;
  double sd = 0.0;  // population
  double min = 0.0;
  double max = 0.0;
  std::vector<double> values;

  nlohmann::json ToJson() const;
};

SeedSummaryRow Summarize(const std::string& metric, std::span<const double> values);
// Plain-text table mirroring the avg/sd/min/max layout.
std::string FormatSeedTable(std::span<const SeedSummaryRow> rows);

}  // namespace refgame

#endif  // REFGAME_RUN_H_
