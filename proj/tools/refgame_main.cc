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

// refgame: data generation, training, evaluation, protocol analysis,
// probing and multi-seed aggregation for the referential game.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "refgame/errors.h"
#include "refgame/run.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitPartial = 4;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant;
  std::optional<std::string> out;
  std::optional<std::string> run_id;
};

void AddCommon(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config, "JSON run config")->required();
  cmd->add_option("--seed", flags.seed, "master seed override");
  cmd->add_option("--variant", flags.variant,
                  "restrict to one variant, e.g. \"+aug-shared\", \"-aug+shared\", \"simclr\"");
  cmd->add_option("--out", flags.out, "output directory override");
  cmd->add_option("--run-id", flags.run_id, "run id override");
}

refgame::RunConfig Resolve(const CommonFlags& flags) {
  refgame::RunConfig config = refgame::LoadRunConfig(flags.config);
  refgame::ApplyOverrides(config, {flags.seed, flags.variant, flags.out, flags.run_id});
  return config;
}

void Print(const nlohmann::json& doc) { std::cout << doc.dump(2) << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"referential game with emergent single-symbol communication"};
  app.require_subcommand(1);

  CommonFlags gen_flags, train_flags, eval_flags, analyze_flags, probe_flags, seeds_flags,
      report_flags;
  bool materialize = false;
  std::optional<std::string> records_csv, features_path;
  std::optional<std::size_t> kmeans_k;

  auto* gen = app.add_subcommand("gen-data", "write the dataset manifest");
  AddCommon(gen, gen_flags);
  gen->add_flag("--materialize", materialize, "also write every split as tensors");
  auto* train = app.add_subcommand("train", "train every variant of the matrix");
  AddCommon(train, train_flags);
  auto* eval = app.add_subcommand("eval", "game accuracy on val, OOD and blob splits");
  AddCommon(eval, eval_flags);
  auto* analyze = app.add_subcommand("analyze", "protocol size, nMI, WNsim and p-values");
  AddCommon(analyze, analyze_flags);
  auto* records_opt = analyze->add_option("--records", records_csv,
                                          "CSV of sample_id,category_id,symbol");
  auto* features_opt = analyze->add_option("--features", features_path,
                                           "tensor file with 'features' and 'labels'");
  analyze->add_option("--k", kmeans_k, "k-means cluster count for --features");
  records_opt->excludes(features_opt);
  auto* probe = app.add_subcommand("probe", "linear probes on frozen Sender features");
  AddCommon(probe, probe_flags);
  auto* seeds = app.add_subcommand("seeds", "repeat the pipeline over seeds and aggregate");
  AddCommon(seeds, seeds_flags);
  auto* report = app.add_subcommand("report", "SVG plots from existing outputs");
  AddCommon(report, report_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (gen->parsed()) {
      Print(refgame::CmdGenData(Resolve(gen_flags), materialize));
    } else if (train->parsed()) {
      Print(refgame::CmdTrain(Resolve(train_flags)));
    } else if (eval->parsed()) {
      Print(refgame::CmdEval(Resolve(eval_flags)));
    } else if (analyze->parsed()) {
      refgame::RunConfig config = Resolve(analyze_flags);
      if (records_csv) {
        Print(refgame::CmdAnalyzeRecords(config, *records_csv));
      } else if (features_path) {
        Print(refgame::CmdAnalyzeFeatures(
            config, *features_path, kmeans_k.value_or(config.train.channel.vocab_size)));
      } else {
        Print(refgame::CmdAnalyze(config));
      }
    } else if (probe->parsed()) {
      Print(refgame::CmdProbe(Resolve(probe_flags)));
    } else if (seeds->parsed()) {
      Print(refgame::CmdSeeds(Resolve(seeds_flags)));
    } else if (report->parsed()) {
      Print(refgame::CmdReport(Resolve(report_flags)));
    }
  } catch (const refgame::NumericalError& e) {
    std::cerr << "refgame: divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const refgame::PartialFailure& e) {
    std::cerr << "refgame: " << e.what() << "\n";
    return kExitPartial;
  } catch (const refgame::Error& e) {
    std::cerr << "refgame: " << e.what() << "\n";
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "refgame: bad JSON: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "refgame: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}
