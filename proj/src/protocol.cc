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

#include "refgame/protocol.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "refgame/errors.h"
#include "refgame/parallel.h"

namespace refgame {

std::vector<ProtocolRecord> MakeRecords(std::span<const ImageSample> samples,
                                        std::span<const std::size_t> symbols) {
  if (samples.size() != symbols.size()) {
    throw DimensionError("MakeRecords: " + std::to_string(samples.size()) + " samples, " +
                         std::to_string(symbols.size()) + " symbols");
  }
  std::vector<ProtocolRecord> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    out[i] = {samples[i].sample_id, samples[i].category, symbols[i]};
  return out;
}

namespace {

constexpr std::size_t kChunk = 256;

std::vector<std::size_t> ChunkedSymbols(
    const Dataset& dataset, const std::function<std::vector<std::size_t>(const Tensor&)>& fn) {
  const std::size_t n = dataset.size();
  std::vector<std::size_t> symbols(n);
  ParallelFor((n + kChunk - 1) / kChunk, [&](std::size_t c) {
    NoGradGuard guard;
    const std::size_t lo = c * kChunk, hi = std::min(n, lo + kChunk);
    std::vector<const Image*> images;
    for (std::size_t i = lo; i < hi; ++i) images.push_back(&dataset.samples[i].image);
    std::vector<std::size_t> s = fn(StackImages(images));
    std::copy(s.begin(), s.end(), symbols.begin() + lo);
  });
  return symbols;
}

}  // namespace

std::vector<ProtocolRecord> CollectProtocol(Sender& sender, const Dataset& dataset) {
  if (dataset.size() == 0) return {};
  return MakeRecords(dataset.samples, ChunkedSymbols(dataset, [&](const Tensor& batch) {
                       return sender.Symbols(batch);
                     }));
}

std::vector<ProtocolRecord> SimClrDiscSymbols(SimClr& model, const Dataset& dataset) {
  if (dataset.size() == 0) return {};
  const std::size_t v = model.channel().vocab_size;
  return MakeRecords(dataset.samples, ChunkedSymbols(dataset, [&](const Tensor& batch) {
                       Tensor s = model.Forward(batch, Mode::kEval).s;
                       std::vector<std::size_t> out(s.dim(0));
                       for (std::size_t r = 0; r < out.size(); ++r)
                         out[r] = Argmax(s.data().subspan(r * v, v));
                       return out;
                     }));
}

std::size_t ProtocolSize(std::span<const ProtocolRecord> records) {
  if (records.empty()) throw InputError("protocol size of an empty record set");
  std::set<std::size_t> symbols;
  for (const auto& r : records) symbols.insert(r.symbol);
  return symbols.size();
}

ContingencyTable ContingencyTable::FromRecords(std::span<const ProtocolRecord> records) {
  if (records.empty()) throw InputError("contingency table of an empty record set");
  ContingencyTable t;
  std::map<int, std::size_t> rows;
  std::map<std::size_t, std::size_t> cols;
  for (const auto& r : records) {
    rows.emplace(r.category, 0);
    cols.emplace(r.symbol, 0);
  }
  for (auto& [id, index] : rows) {
    index = t.categories.size();
    t.categories.push_back(id);
  }
  for (auto& [id, index] : cols) {
    index = t.symbols.size();
    t.symbols.push_back(id);
  }
  t.counts.assign(rows.size(), std::vector<std::int64_t>(cols.size(), 0));
  t.category_totals.assign(rows.size(), 0);
  t.symbol_totals.assign(cols.size(), 0);
  for (const auto& r : records) {
    const std::size_t i = rows[r.category], j = cols[r.symbol];
    ++t.counts[i][j];
    ++t.category_totals[i];
    ++t.symbol_totals[j];
  }
  t.total = static_cast<std::int64_t>(records.size());
  return t;
}

namespace {

double Entropy(std::span<const std::int64_t> counts, double total) {
  double h = 0.0;
  for (std::int64_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / total;
    h -= p * std::log(p);
  }
  return h;
}

}  // namespace

double ContingencyTable::CategoryEntropy() const {
  return Entropy(category_totals, static_cast<double>(total));
}

double ContingencyTable::SymbolEntropy() const {
  return Entropy(symbol_totals, static_cast<double>(total));
}

double ContingencyTable::JointEntropy() const {
  double h = 0.0;
  for (const auto& row : counts) h += Entropy(row, static_cast<double>(total));
  return h;
}

double ContingencyTable::MutualInformation() const {
  const double n = static_cast<double>(total);
  double mi = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    for (std::size_t j = 0; j < counts[i].size(); ++j) {
      const std::int64_t c = counts[i][j];
      if (c == 0) continue;
      const double joint = static_cast<double>(c) / n;
      mi += joint * std::log(static_cast<double>(c) * n /
                             (static_cast<double>(category_totals[i]) *
                              static_cast<double>(symbol_totals[j])));
    }
  }
  return mi;
}

NmiResult NormalizedMutualInformationDetail(std::span<const ProtocolRecord> records) {
  const ContingencyTable t = ContingencyTable::FromRecords(records);
  NmiResult r;
  r.category_entropy = t.CategoryEntropy();
  r.symbol_entropy = t.SymbolEntropy();
  r.mutual_information = t.MutualInformation();
  // A single row or column means exactly zero entropy.
  const bool c_zero = t.categories.size() == 1, s_zero = t.symbols.size() == 1;
  if (c_zero && s_zero) {
    r.value = 1.0;
    r.edge_case = "both-entropies-zero";
  } else if (c_zero || s_zero) {
    r.value = 0.0;
    r.edge_case = "one-entropy-zero";
  } else {
    r.value = r.mutual_information / ((r.category_entropy + r.symbol_entropy) / 2.0);
    r.value = std::clamp(r.value, 0.0, 1.0);
  }
  return r;
}

double NormalizedMutualInformation(std::span<const ProtocolRecord> records) {
  return NormalizedMutualInformationDetail(records).value;
}

nlohmann::json WnSimResult::ToJson() const {
  nlohmann::json j = {{"pairs", pairs}, {"pairs_used", pairs_used}, {"subsampled", subsampled}};
  if (has_pairs) {
    j["value"] = value;
  } else {
    j["value"] = nullptr;
    j["status"] = "no-pairs";
  }
  return j;
}

WnSimResult WnSim(std::span<const ProtocolRecord> records, const Taxonomy& taxonomy,
                  std::uint64_t pair_cap, std::uint64_t seed) {
  if (records.empty()) throw InputError("WNsim of an empty record set");
  if (pair_cap == 0) throw ConfigError("pair cap must be positive");
  // symbol -> category -> count
  std::map<std::size_t, std::map<int, std::uint64_t>> groups;
  for (const auto& r : records) {
    if (r.category < 0 || static_cast<std::size_t>(r.category) >= taxonomy.nodes().size() ||
        !taxonomy.IsLeaf(r.category)) {
      throw LookupError("record category " + std::to_string(r.category) +
                        " is not a taxonomy leaf");
    }
    ++groups[r.symbol][r.category];
  }
  std::map<std::pair<int, int>, double> sim_cache;
  auto sim = [&](int a, int b) {
    if (a == b) return 1.0;
    auto key = std::minmax(a, b);
    auto it = sim_cache.find(key);
    if (it != sim_cache.end()) return it->second;
    return sim_cache[key] = PathSimilarity(taxonomy, a, b);
  };

  WnSimResult result;
  for (const auto& [symbol, cats] : groups) {
    std::uint64_t n = 0;
    for (const auto& [c, count] : cats) n += count;
    result.pairs += n * (n - 1) / 2;
  }
  if (result.pairs == 0) return result;
  result.has_pairs = true;

  if (result.pairs <= pair_cap) {
    double total = 0.0;
    for (const auto& [symbol, cats] : groups) {
      for (auto a = cats.begin(); a != cats.end(); ++a) {
        total += static_cast<double>(a->second * (a->second - 1) / 2);
        for (auto b = std::next(a); b != cats.end(); ++b)
          total += static_cast<double>(a->second * b->second) * sim(a->first, b->first);
      }
    }
    result.pairs_used = result.pairs;
    result.value = total / static_cast<double>(result.pairs);
    return result;
  }

  // Uniform pair draws: pick a pair index over the pooled set, then two
  // distinct members of the owning group.
  std::vector<std::vector<int>> members;
  std::vector<std::uint64_t> cumulative;
  std::uint64_t running = 0;
  for (const auto& [symbol, cats] : groups) {
    std::vector<int> list;
    for (const auto& [c, count] : cats) list.insert(list.end(), count, c);
    const std::uint64_t n = list.size();
    if (n < 2) continue;
    running += n * (n - 1) / 2;
    cumulative.push_back(running);
    members.push_back(std::move(list));
  }
  Rng rng(DeriveSeed(seed, 0x574e53696dULL));
  double total = 0.0;
  for (std::uint64_t s = 0; s < pair_cap; ++s) {
    const std::uint64_t pick = rng.UniformInt(result.pairs);
    const std::size_t g =
        std::upper_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin();
    const auto& list = members[g];
    const std::size_t i = rng.UniformInt(list.size());
    std::size_t j = rng.UniformInt(list.size() - 1);
    if (j >= i) ++j;
    total += sim(list[i], list[j]);
  }
  result.subsampled = true;
  result.pairs_used = pair_cap;
  result.value = total / static_cast<double>(pair_cap);
  return result;
}

nlohmann::json PermutationResult::ToJson() const {
  nlohmann::json j = {{"testable", testable},
                      {"permutations", permutations},
                      {"alpha", alpha},
                      {"significant", significant}};
  if (testable) {
    j["observed"] = observed;
    j["p_value"] = p_value;
    j["at_least_observed"] = at_least_observed;
  } else {
    j["observed"] = nullptr;
    j["p_value"] = nullptr;
  }
  j["marker"] = significant ? "" : "NS";
  return j;
}

PermutationResult PermutationTest(std::span<const ProtocolRecord> records,
                                  const Statistic& statistic, int permutations,
                                  std::uint64_t seed, double alpha) {
  if (permutations < 99) throw ConfigError("permutation test needs at least 99 permutations");
  if (!(alpha > 0 && alpha < 1)) throw ConfigError("alpha must lie in (0, 1)");
  if (records.empty()) throw InputError("permutation test on an empty record set");
  PermutationResult result;
  result.permutations = permutations;
  result.alpha = alpha;
  const std::optional<double> observed = statistic(records);
  if (!observed) return result;
  result.testable = true;
  result.observed = *observed;
  // Values equal up to summation-order rounding count as ties.
  const double threshold = *observed - 1e-12 * std::max(1.0, std::abs(*observed));

  std::vector<char> exceeds(permutations, 0);
  ParallelFor(static_cast<std::size_t>(permutations), [&](std::size_t p) {
    std::vector<ProtocolRecord> shuffled(records.begin(), records.end());
    std::vector<std::size_t> symbols(shuffled.size());
    for (std::size_t i = 0; i < shuffled.size(); ++i) symbols[i] = shuffled[i].symbol;
    Rng rng(DeriveSeed(seed, p + 1));
    rng.Shuffle(symbols);
    for (std::size_t i = 0; i < shuffled.size(); ++i) shuffled[i].symbol = symbols[i];
    const std::optional<double> value = statistic(shuffled);
    exceeds[p] = value && *value >= threshold;
  });
  for (char e : exceeds) result.at_least_observed += e;
  result.p_value = (1.0 + result.at_least_observed) / (1.0 + permutations);
  result.significant = result.p_value < alpha;
  return result;
}

Statistic NmiStatistic() {
  return [](std::span<const ProtocolRecord> records) -> std::optional<double> {
    return NormalizedMutualInformation(records);
  };
}

Statistic WnSimStatistic(const Taxonomy& taxonomy, std::uint64_t pair_cap) {
  return [&taxonomy, pair_cap](std::span<const ProtocolRecord> records) -> std::optional<double> {
    WnSimResult r = WnSim(records, taxonomy, pair_cap);
    if (!r.has_pairs) return std::nullopt;
    return r.value;
  };
}

namespace {

double SquaredDistance(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double diff = a[i] - b[i];
    s += diff * diff;
  }
  return s;
}

}  // namespace

KMeansResult KMeans(const Tensor& features, std::size_t k, Rng& rng,
                    const KMeansConfig& config) {
  if (features.rank() != 2) throw DimensionError("kmeans expects features [N x D]");
  const std::size_t n = features.dim(0), d = features.dim(1);
  if (k == 0) throw ConfigError("kmeans needs k >= 1");
  if (k > n) {
    throw ConfigError("kmeans with k = " + std::to_string(k) + " > N = " + std::to_string(n));
  }
  if (config.max_iters < 1 || !(config.tol >= 0)) throw ConfigError("bad kmeans settings");
  const double* x = features.data().data();
  KMeansResult result;
  auto& centroids = result.centroids;
  centroids.assign(k * d, 0.0);

  // k-means++ seeding.
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::size_t pick = rng.UniformInt(n);
  for (std::size_t c = 0; c < k; ++c) {
    std::copy_n(x + pick * d, d, centroids.begin() + c * d);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], SquaredDistance(x + i * d, &centroids[c * d], d));
      total += nearest[i];
    }
    if (c + 1 == k) break;
    if (total > 0.0) {
      const double u = rng.Uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += nearest[i];
        if (u < acc && nearest[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.UniformInt(n);
    }
  }

  auto& assign = result.assignments;
  assign.assign(n, 0);
  std::vector<double> dist(n);
  auto assign_step = [&] {
    constexpr std::size_t kBlock = 128;
    ParallelFor((n + kBlock - 1) / kBlock, [&](std::size_t b) {
      for (std::size_t i = b * kBlock; i < std::min(n, (b + 1) * kBlock); ++i) {
        std::size_t best = 0;
        double best_d = SquaredDistance(x + i * d, &centroids[0], d);
        for (std::size_t c = 1; c < k; ++c) {
          const double dd = SquaredDistance(x + i * d, &centroids[c * d], d);
          if (dd < best_d) {
            best_d = dd;
            best = c;
          }
        }
        assign[i] = best;
        dist[i] = best_d;
      }
    });
    double objective = 0.0;
    for (double v : dist) objective += v;
    result.objective.push_back(objective);
  };

  assign_step();
  for (int iter = 0; iter < config.max_iters; ++iter) {
    result.iterations = iter + 1;
    std::vector<double> next(k * d, 0.0);
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++sizes[assign[i]];
      for (std::size_t j = 0; j < d; ++j) next[assign[i] * d + j] += x[i * d + j];
    }
    std::vector<char> taken(n, 0);
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] > 0) {
        for (std::size_t j = 0; j < d; ++j) next[c * d + j] /= static_cast<double>(sizes[c]);
        continue;
      }
      // Empty cluster: move it onto the point farthest from its centroid.
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!taken[i] && dist[i] > far_d) {
          far_d = dist[i];
          far = i;
        }
      }
      taken[far] = 1;
      std::copy_n(x + far * d, d, next.begin() + c * d);
      ++result.reseeded;
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c)
      shift = std::max(shift, std::sqrt(SquaredDistance(&next[c * d], &centroids[c * d], d)));
    centroids = std::move(next);
    assign_step();
    if (shift < config.tol) break;
  }
  return result;
}

void AnalysisConfig::Validate() const {
  if (permutations < 99) throw ConfigError("permutations must be at least 99");
  if (!(alpha > 0 && alpha < 1)) throw ConfigError("alpha must lie in (0, 1)");
  if (pair_cap == 0) throw ConfigError("pair cap must be positive");
}

nlohmann::json AnalysisConfig::ToJson() const {
  return {{"permutations", permutations},
          {"alpha", alpha},
          {"pair_cap", pair_cap},
          {"seed", seed}};
}

AnalysisConfig AnalysisConfig::FromJson(const nlohmann::json& j) {
  AnalysisConfig c;
  c.permutations = j.value("permutations", c.permutations);
  c.alpha = j.value("alpha", c.alpha);
  c.pair_cap = j.value("pair_cap", c.pair_cap);
  c.seed = j.value("seed", c.seed);
  c.Validate();
  return c;
}

nlohmann::json AnalysisReport::ToJson() const {
  nlohmann::json j;
  j["records"] = records;
  j["protocol_size"] = protocol_size;
  j["nmi"] = nmi.value;
  j["nmi_detail"] = {{"mutual_information", nmi.mutual_information},
                     {"category_entropy", nmi.category_entropy},
                     {"symbol_entropy", nmi.symbol_entropy},
                     {"edge_case", nmi.edge_case}};
  j["nmi_test"] = nmi_test.ToJson();
  j["p_nmi"] = nmi_test.testable ? nlohmann::json(nmi_test.p_value) : nlohmann::json();
  if (wnsim) {
    j["wnsim"] = wnsim->has_pairs ? nlohmann::json(wnsim->value) : nlohmann::json();
    j["wnsim_detail"] = wnsim->ToJson();
  } else {
    j["wnsim"] = nullptr;
  }
  if (wnsim_test) {
    j["wnsim_test"] = wnsim_test->ToJson();
    j["p_wnsim"] = wnsim_test->testable ? nlohmann::json(wnsim_test->p_value)
                                        : nlohmann::json();
  }
  j["config"] = config.ToJson();
  return j;
}

AnalysisReport Analyze(std::span<const ProtocolRecord> records, const Taxonomy* taxonomy,
                       const AnalysisConfig& config) {
  config.Validate();
  AnalysisReport r;
  r.config = config;
  r.records = records.size();
  r.protocol_size = ProtocolSize(records);
  r.nmi = NormalizedMutualInformationDetail(records);
  r.nmi_test = PermutationTest(records, NmiStatistic(), config.permutations,
                               DeriveSeed(config.seed, 1), config.alpha);
  if (taxonomy) {
    r.wnsim = WnSim(records, *taxonomy, config.pair_cap);
    r.wnsim_test = PermutationTest(records, WnSimStatistic(*taxonomy, config.pair_cap),
                                   config.permutations, DeriveSeed(config.seed, 2),
                                   config.alpha);
  }
  return r;
}

void WriteProtocolCsv(const std::string& path, std::span<const ProtocolRecord> records) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << "sample_id,category_id,symbol\n";
  for (const auto& r : records) out << r.sample_id << ',' << r.category << ',' << r.symbol << '\n';
}

std::vector<ProtocolRecord> ReadProtocolCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw InputError(path + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "sample_id,category_id,symbol") {
    throw InputError(path + ": expected header 'sample_id,category_id,symbol'");
  }
  std::vector<ProtocolRecord> records;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string a, b, c;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c)) {
      throw InputError(path + ":" + std::to_string(line_no) + ": expected 3 fields");
    }
    try {
      std::size_t used = 0;
      ProtocolRecord r;
      r.sample_id = std::stoull(a, &used);
      if (used != a.size()) throw std::invalid_argument(a);
      r.category = std::stoi(b, &used);
      if (used != b.size()) throw std::invalid_argument(b);
      if (c.find('-') != std::string::npos) throw std::invalid_argument(c);
      r.symbol = std::stoull(c, &used);
      if (used != c.size()) throw std::invalid_argument(c);
      records.push_back(r);
    } catch (const std::exception&) {
      throw InputError(path + ":" + std::to_string(line_no) + ": malformed record '" + line +
                       "'");
    }
  }
  return records;
}

}  // namespace refgame
