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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "doctest.h"
#include "refgame/errors.h"
#include "refgame/protocol.h"

using namespace refgame;

namespace {

std::vector<ProtocolRecord> Records(std::vector<int> categories, std::vector<std::size_t> symbols) {
  std::vector<ProtocolRecord> out;
  for (std::size_t i = 0; i < categories.size(); ++i)
    out.push_back({i, categories[i], symbols[i]});
  return out;
}

// Entropy straight from a multiset of keys.
template <typename K>
double Entropy(const std::vector<K>& keys) {
  std::map<K, double> counts;
  for (const K& k : keys) counts[k] += 1;
  double h = 0;
  for (const auto& [k, c] : counts) h -= c / keys.size() * std::log(c / keys.size());
  return h;
}

std::vector<ProtocolRecord> RandomProtocol(const std::vector<int>& leaves, std::size_t n,
                                           std::size_t vocab, Rng& rng) {
  std::vector<ProtocolRecord> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back({i, leaves[i % leaves.size()], rng.UniformInt(vocab)});
  return out;
}

Statistic Constant(double v) {
  return [v](std::span<const ProtocolRecord>) -> std::optional<double> { return v; };
}

}  // namespace

TEST_CASE("protocol size") {
  CHECK(ProtocolSize(Records({1, 2, 3}, {4, 4, 4})) == 1);
  CHECK(ProtocolSize(Records({1, 2, 3, 4}, {0, 1, 1, 5})) == 3);
  CHECK_THROWS_AS(ProtocolSize({}), InputError);
}

TEST_CASE("nmi worked example") {
  auto r = Records({0, 0, 1, 1}, {0, 0, 0, 1});
  NmiResult d = NormalizedMutualInformationDetail(r);
  CHECK(std::abs(d.value - 0.3437110184854507) < 1e-9);
  CHECK(d.category_entropy == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(d.symbol_entropy ==
        doctest::Approx(-(0.75 * std::log(0.75) + 0.25 * std::log(0.25))).epsilon(1e-14));
  CHECK(d.edge_case.empty());
}

TEST_CASE("nmi special cases") {
  CHECK(NormalizedMutualInformation(Records({3, 4, 5, 3, 4, 5}, {9, 1, 2, 9, 1, 2})) ==
        doctest::Approx(1.0).epsilon(1e-14));
  NmiResult constant = NormalizedMutualInformationDetail(Records({1, 2, 3, 1}, {0, 0, 0, 0}));
  CHECK(constant.value == 0.0);
  CHECK(constant.edge_case == "one-entropy-zero");
  NmiResult one_cat = NormalizedMutualInformationDetail(Records({7, 7, 7}, {0, 1, 2}));
  CHECK(one_cat.value == 0.0);
  CHECK(one_cat.edge_case == "one-entropy-zero");
  NmiResult both = NormalizedMutualInformationDetail(Records({7, 7}, {3, 3}));
  CHECK(both.value == 1.0);
  CHECK(both.edge_case == "both-entropies-zero");
  CHECK_THROWS_AS(NormalizedMutualInformation({}), InputError);
}

TEST_CASE("nmi properties on random protocols") {
  Rng rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 20 + rng.UniformInt(200);
    const std::size_t cats = 2 + rng.UniformInt(10), vocab = 1 + rng.UniformInt(15);
    std::vector<int> c(n);
    std::vector<std::size_t> s(n);
    for (std::size_t i = 0; i < n; ++i) {
      c[i] = static_cast<int>(rng.UniformInt(cats));
      s[i] = trial % 2 ? rng.UniformInt(vocab) : (c[i] * 3 + rng.UniformInt(2)) % (vocab + 1);
    }
    auto r = Records(c, s);
    ContingencyTable t = ContingencyTable::FromRecords(r);
    std::vector<std::pair<int, std::size_t>> joint;
    for (std::size_t i = 0; i < n; ++i) joint.push_back({c[i], s[i]});
    CHECK(std::abs(t.MutualInformation() - (Entropy(c) + Entropy(s) - Entropy(joint))) < 1e-12);
    CHECK(t.total == static_cast<std::int64_t>(n));

    const double v = NormalizedMutualInformation(r);
    CHECK(v >= -1e-12);
    CHECK(v <= 1.0 + 1e-12);

    // Relabel symbols and categories.
    auto relabeled = r;
    for (auto& rec : relabeled) {
      rec.symbol = (rec.symbol * 7 + 3) % 101;
      rec.category = 1000 - rec.category;
    }
    CHECK(NormalizedMutualInformation(relabeled) == doctest::Approx(v).epsilon(1e-12));
    rng.Shuffle(relabeled);
    CHECK(NormalizedMutualInformation(relabeled) == doctest::Approx(v).epsilon(1e-12));
  }
}

TEST_CASE("wnsim examples") {
  Taxonomy t = BuildTaxonomy({});
  const auto leaves = t.Leaves();
  const int x = leaves[0];
  int sib = -1;
  for (int b : leaves)
    if (b != x && t.node(b).parent == t.node(x).parent) sib = b;
  REQUIRE(sib >= 0);

  WnSimResult three = WnSim(Records({x, x, sib}, {2, 2, 2}), t);
  REQUIRE(three.has_pairs);
  CHECK(three.pairs == 3);
  CHECK(std::abs(three.value - 5.0 / 9.0) < 1e-12);
  CHECK(std::abs(WnSim(Records({x, sib}, {1, 1}), t).value - 1.0 / 3.0) < 1e-12);
  CHECK(WnSim(Records({x, x, sib, sib}, {0, 0, 1, 1}), t).value == 1.0);
  // Singleton symbols contribute no pairs.
  WnSimResult none = WnSim(Records({x, sib, x}, {0, 1, 2}), t);
  CHECK_FALSE(none.has_pairs);
  CHECK(none.ToJson().dump().find("no-pairs") != std::string::npos);
  CHECK_THROWS_AS(WnSim(Records({t.root(), x}, {0, 0}), t), LookupError);
}

TEST_CASE("wnsim pooling, order invariance and subsampling") {
  Taxonomy t = BuildTaxonomy({});
  const auto leaves = t.Leaves();
  Rng rng(6);
  auto r = RandomProtocol(leaves, 300, 7, rng);
  WnSimResult full = WnSim(r, t);
  // Brute-force pooled average.
  double sum = 0;
  std::uint64_t pairs = 0;
  for (std::size_t i = 0; i < r.size(); ++i)
    for (std::size_t j = i + 1; j < r.size(); ++j)
      if (r[i].symbol == r[j].symbol) {
        sum += PathSimilarity(t, r[i].category, r[j].category);
        ++pairs;
      }
  CHECK(full.pairs == pairs);
  CHECK(full.value == doctest::Approx(sum / pairs).epsilon(1e-12));
  CHECK_FALSE(full.subsampled);
  auto shuffled = r;
  rng.Shuffle(shuffled);
  CHECK(WnSim(shuffled, t).value == doctest::Approx(full.value).epsilon(1e-12));

  WnSimResult capped = WnSim(r, t, 500, 3);
  CHECK(capped.subsampled);
  CHECK(capped.pairs_used == 500);
  CHECK(capped.pairs == pairs);
  CHECK(std::abs(capped.value - full.value) < 0.1);
  CHECK(WnSim(r, t, 500, 3).value == capped.value);
}

TEST_CASE("permutation test counting") {
  auto r = Records({0, 0, 1, 1, 2, 2}, {0, 0, 1, 1, 2, 2});
  int calls = 0;
  Statistic rising = [&calls](std::span<const ProtocolRecord>) -> std::optional<double> {
    return calls++ == 0 ? 10.0 : 1.0;
  };
  PermutationResult top = PermutationTest(r, rising, 999, 1);
  CHECK(top.p_value == 0.001);
  CHECK(top.significant);
  CHECK(top.at_least_observed == 0);

  PermutationResult flat = PermutationTest(r, Constant(0.5), 999, 1);
  CHECK(flat.p_value == 1.0);
  CHECK_FALSE(flat.significant);

  Statistic undefined = [](std::span<const ProtocolRecord>) -> std::optional<double> {
    return std::nullopt;
  };
  PermutationResult untestable = PermutationTest(r, undefined, 999, 1);
  CHECK_FALSE(untestable.testable);
  CHECK_FALSE(untestable.significant);
  CHECK(untestable.ToJson().dump().find("NS") != std::string::npos);
  CHECK_THROWS_AS(PermutationTest(r, Constant(1), 98, 1), ConfigError);
}

TEST_CASE("permutation test is deterministic and bounded") {
  Taxonomy t = BuildTaxonomy({});
  Rng rng(7);
  auto r = RandomProtocol(t.Leaves(), 120, 10, rng);
  PermutationResult a = PermutationTest(r, NmiStatistic(), 199, 42);
  PermutationResult b = PermutationTest(r, NmiStatistic(), 199, 42);
  CHECK(a.p_value == b.p_value);
  CHECK(a.p_value > 0.0);
  CHECK(a.p_value <= 1.0);
  CHECK(a.ToJson() == b.ToJson());
}

TEST_CASE("aligned protocol is significant") {
  Taxonomy t = BuildTaxonomy({});
  const auto leaves = t.Leaves();
  std::vector<ProtocolRecord> r;
  for (std::size_t i = 0; i < 240; ++i) r.push_back({i, leaves[i % 24], (i % 24) / 2});
  AnalysisConfig cfg;
  AnalysisReport rep = Analyze(r, &t, cfg);
  CHECK(rep.protocol_size == 12);
  CHECK(rep.nmi_test.significant);
  REQUIRE(rep.wnsim_test);
  CHECK(rep.wnsim_test->significant);
  CHECK(rep.nmi_test.p_value == 0.001);
  nlohmann::json j = rep.ToJson();
  CHECK(j.contains("p_nmi"));
  CHECK(j.contains("p_wnsim"));
}

TEST_CASE("random protocols are rarely significant") {
  Taxonomy t = BuildTaxonomy({});
  const auto leaves = t.Leaves();
  const std::vector<int> train(leaves.begin(), leaves.begin() + 24);
  Rng rng(8);
  int significant = 0;
  for (int trial = 0; trial < 100; ++trial) {
    auto r = RandomProtocol(train, 240, 64, rng);
    significant += PermutationTest(r, NmiStatistic(), 999, 100 + trial).significant;
  }
  CHECK(significant < 5);
}

TEST_CASE("kmeans separates two clouds") {
  Rng rng(9);
  const std::size_t n = 60, d = 4;
  Tensor x(Shape{n, d});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      x.mutable_data()[i * d + j] = (i < n / 2 ? -50.0 : 50.0) + rng.Normal();
  KMeansResult r = KMeans(x, 2, rng);
  for (std::size_t i = 0; i < n; ++i)
    CHECK((r.assignments[i] == r.assignments[0]) == (i < n / 2));
  for (std::size_t i = 1; i < r.objective.size(); ++i) CHECK(r.objective[i] <= r.objective[i - 1] + 1e-9);

  // Translation invariance.
  Tensor shifted(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) shifted.mutable_data()[i] = x[i] + 1234.5;
  Rng a(10), b(10);
  CHECK(KMeans(x, 2, a).assignments == KMeans(shifted, 2, b).assignments);
  CHECK_THROWS_AS(KMeans(x, n + 1, rng), ConfigError);
}

TEST_CASE("kmeans degenerate and general cases") {
  Rng rng(11);
  Tensor x(Shape{12, 3});
  for (double& v : x.mutable_data()) v = rng.Normal();
  KMeansResult every = KMeans(x, 12, rng);
  CHECK(std::set<std::size_t>(every.assignments.begin(), every.assignments.end()).size() == 12);
  CHECK(every.objective.back() == doctest::Approx(0.0));

  Tensor y(Shape{300, 5});
  for (double& v : y.mutable_data()) v = rng.Normal();
  KMeansResult r = KMeans(y, 16, rng);
  CHECK(r.objective.size() >= 2);
  for (std::size_t i = 1; i < r.objective.size(); ++i) CHECK(r.objective[i] <= r.objective[i - 1] + 1e-9);
  for (std::size_t a : r.assignments) CHECK(a < 16);
}

TEST_CASE("protocol csv round trip") {
  auto r = Records({5, 6, 7}, {1, 0, 63});
  const auto path = (std::filesystem::temp_directory_path() / "refgame_protocol.csv").string();
  WriteProtocolCsv(path, r);
  auto back = ReadProtocolCsv(path);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].sample_id == r[i].sample_id);
    CHECK(back[i].category == r[i].category);
    CHECK(back[i].symbol == r[i].symbol);
  }
  std::filesystem::remove(path);
  CHECK_THROWS(ReadProtocolCsv(path));
}

TEST_CASE("collected protocols are deterministic and in range") {
  DataConfig c;
  c.counts = {1, 3, 1, 1};
  ShapeWorld w = MakeShapeWorld(c);
  Rng rng(12);
  GameAgents agents(EncoderConfig{}, ChannelConfig{}, false, rng);
  auto a = CollectProtocol(agents.sender(), w.val);
  auto b = CollectProtocol(agents.sender(), w.val);
  REQUIRE(a.size() == w.val.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].symbol == b[i].symbol);
    CHECK(a[i].symbol < 64);
    CHECK(a[i].sample_id == w.val.samples[i].sample_id);
    CHECK(a[i].category == w.val.samples[i].category);
  }
  CHECK(ProtocolSize(a) <= std::min<std::size_t>(64, a.size()));

  SimClr model(EncoderConfig{}, ChannelConfig{}, rng);
  auto d1 = SimClrDiscSymbols(model, w.val), d2 = SimClrDiscSymbols(model, w.val);
  REQUIRE(d1.size() == w.val.size());
  for (std::size_t i = 0; i < d1.size(); ++i) {
    CHECK(d1[i].symbol == d2[i].symbol);
    CHECK(d1[i].symbol < 64);
  }
}
