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

#ifndef REFGAME_PROTOCOL_H_
#define REFGAME_PROTOCOL_H_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "refgame/agents.h"
#include "refgame/dataset.h"
#include "refgame/taxonomy.h"

namespace refgame {

struct ProtocolRecord {
  std::uint64_t sample_id = 0;
  int category = 0;
  std::size_t symbol = 0;
};

std::vector<ProtocolRecord> MakeRecords(std::span<const ImageSample> samples,
                                        std::span<const std::size_t> symbols);
// Eval-mode argmax symbol for every image of the dataset.
std::vector<ProtocolRecord> CollectProtocol(Sender& sender, const Dataset& dataset);
// Argmax of the s layer.
std::vector<ProtocolRecord> SimClrDiscSymbols(SimClr& model, const Dataset& dataset);

std::size_t ProtocolSize(std::span<const ProtocolRecord> records);

// Rows are categories and columns symbols, both in ascending id order.
struct ContingencyTable {
  std::vector<int> categories;
  std::vector<std::size_t> symbols;
  std::vector<std::vector<std::int64_t>> counts;
  std::vector<std::int64_t> category_totals;
  std::vector<std::int64_t> symbol_totals;
  std::int64_t total = 0;

  static ContingencyTable FromRecords(std::span<const ProtocolRecord> records);
  // Natural-log entropies and mutual information.
  double CategoryEntropy() const;
  double SymbolEntropy() const;
  double JointEntropy() const;
  double MutualInformation() const;
};

struct NmiResult {
  double value = 0.0;
  double mutual_information = 0.0;
  double category_entropy = 0.0;
  double symbol_entropy = 0.0;
  // "", "both-entropies-zero" (value 1) or "one-entropy-zero" (value 0).
  std::string edge_case;
};

NmiResult NormalizedMutualInformationDetail(std::span<const ProtocolRecord> records);
double NormalizedMutualInformation(std::span<const ProtocolRecord> records);

inline constexpr std::uint64_t kDefaultPairCap = 2000000;

struct WnSimResult {
  bool has_pairs = false;  // false: undefined, no two records share a symbol
  double value = 0.0;
  std::uint64_t pairs = 0;       // pooled same-symbol pairs
  std::uint64_t pairs_used = 0;  // equals pairs unless subsampled
  bool subsampled = false;

  nlohmann::json ToJson() const;
};

// Mean path similarity over every unordered pair of records sharing a
// symbol, pooled across symbols. Above pair_cap pairs, pair_cap pairs are
// drawn uniformly (with replacement) using `seed`.
WnSimResult WnSim(std::span<const ProtocolRecord> records, const Taxonomy& taxonomy,
                  std::uint64_t pair_cap = kDefaultPairCap, std::uint64_t seed = 0);

// nullopt marks an untestable statistic.
using Statistic = std::function<std::optional<double>(std::span<const ProtocolRecord>)>;

struct PermutationResult {
  bool testable = false;
  double observed = 0.0;
  double p_value = 1.0;
  int permutations = 0;
  int at_least_observed = 0;
  double alpha = 0.01;
  bool significant = false;

  nlohmann::json ToJson() const;
};

// One-sided test with add-one smoothing. Permutation i shuffles the symbol
// column with its own stream derived from `seed`, so the result does not
// depend on scheduling.
PermutationResult PermutationTest(std::span<const ProtocolRecord> records,
                                  const Statistic& statistic, int permutations,
                                  std::uint64_t seed, double alpha = 0.01);

Statistic NmiStatistic();
Statistic WnSimStatistic(const Taxonomy& taxonomy,
                         std::uint64_t pair_cap = kDefaultPairCap);

struct KMeansConfig {
  int max_iters = 300;
  double tol = 1e-6;  // on the largest centroid displacement
};

struct KMeansResult {
  std::vector<std::size_t> assignments;
  std::vector<double> centroids;  // [k x D]
  std::vector<double> objective;  // after each assignment step
  int iterations = 0;
  int reseeded = 0;
};

// k-means++ seeding then Lloyd iterations over rows of features [N x D].
KMeansResult KMeans(const Tensor& features, std::size_t k, Rng& rng,
                    const KMeansConfig& config = {});

struct AnalysisConfig {
  int permutations = 999;
  double alpha = 0.01;
  std::uint64_t pair_cap = kDefaultPairCap;
  std::uint64_t seed = 1;

  void Validate() const;
  nlohmann::json ToJson() const;
  static AnalysisConfig FromJson(const nlohmann::json& j);
};

struct AnalysisReport {
  std::size_t records = 0;
  std::size_t protocol_size = 0;
  NmiResult nmi;
  std::optional<WnSimResult> wnsim;  // absent without a taxonomy
  PermutationResult nmi_test;
  std::optional<PermutationResult> wnsim_test;
  AnalysisConfig config;

  nlohmann::json ToJson() const;
};

AnalysisReport Analyze(std::span<const ProtocolRecord> records, const Taxonomy* taxonomy,
                       const AnalysisConfig& config);

void WriteProtocolCsv(const std::string& path, std::span<const ProtocolRecord> records);
std::vector<ProtocolRecord> ReadProtocolCsv(const std::string& path);

}  // namespace refgame

#endif  // REFGAME_PROTOCOL_H_
