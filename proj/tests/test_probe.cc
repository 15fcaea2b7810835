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

#include <cmath>

#include "doctest.h"
#include "refgame/errors.h"
#include "refgame/probe.h"
#include "refgame/rng.h"

using namespace refgame;

namespace {

struct Data {
  Tensor x;
  std::vector<int> y;
};

// Gaussian clusters around class-specific means; spread 0 gives pure noise.
Data Clusters(std::size_t n, std::size_t d, int k, double gap, Rng& rng, double shift = 0.0) {
  Data out{Tensor(Shape{n, d}), std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const int c = static_cast<int>(i % k);
    out.y[i] = c;
    for (std::size_t j = 0; j < d; ++j)
      out.x.mutable_data()[i * d + j] = rng.Normal() + shift + (j % k == static_cast<std::size_t>(c) ? gap : 0.0);
  }
  return out;
}

Tensor Map(const Tensor& x, double scale, double shift) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out.mutable_data()[i] = x[i] * scale + shift;
  return out;
}

}  // namespace

TEST_CASE("one-hot features are learned perfectly") {
  const std::size_t n = 200, k = 5;
  Tensor x(Shape{n, k});
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<int>(10 + i % k);
    x.mutable_data()[i * k + i % k] = 1.0;
  }
  LinearProbe p = TrainLinearProbe(x, y, {});
  ProbeResult r = EvaluateProbe(p, x, y);
  CHECK(r.top1 == 1.0);
  CHECK(r.per_class.size() == k);
  CHECK(r.per_class.at(12).accuracy() == 1.0);
  CHECK(p.classes == std::vector<int>{10, 11, 12, 13, 14});
  CHECK(r.training_curve.size() == 100);
}

TEST_CASE("noise features give chance accuracy") {
  Rng rng(1);
  Data train = Clusters(400, 16, 4, 0.0, rng), test = Clusters(4000, 16, 4, 0.0, rng);
  LinearProbe p = TrainLinearProbe(train.x, train.y, {});
  CHECK(std::abs(EvaluateProbe(p, test.x, test.y).top1 - 0.25) <= 0.05);
}

TEST_CASE("per-class accuracies are consistent with top-1") {
  Rng rng(2);
  Data train = Clusters(300, 6, 3, 1.0, rng), test = Clusters(300, 6, 3, 1.0, rng);
  LinearProbe p = TrainLinearProbe(train.x, train.y, {});
  ProbeResult r = EvaluateProbe(p, test.x, test.y);
  std::size_t correct = 0, total = 0;
  for (const auto& [c, a] : r.per_class) {
    correct += a.correct;
    total += a.total;
  }
  CHECK(total == 300);
  CHECK(r.top1 == doctest::Approx(correct / 300.0).epsilon(1e-15));
  CHECK(r.top1 > 0.6);
  nlohmann::json j = r.ToJson();
  CHECK(j.contains("top1"));
  CHECK(j.contains("per_class"));
}

TEST_CASE("uniform predictor scores chance on balanced labels") {
  Rng rng(3);
  Data d = Clusters(400, 4, 4, 0.0, rng);
  LinearProbe zero = ZeroProbe(d.x, d.y, {});
  CHECK(EvaluateProbe(zero, d.x, d.y).top1 == 0.25);
}

TEST_CASE("training loss does not exceed the zero-initialised loss") {
  Rng rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    Data d = Clusters(200, 8, 3, 0.5 * trial, rng);
    for (bool standardize : {true, false}) {
      ProbeConfig cfg;
      cfg.standardize = standardize;
      cfg.epochs = 20;
      LinearProbe p = TrainLinearProbe(d.x, d.y, cfg);
      CHECK(p.Loss(d.x, d.y) <= ZeroProbe(d.x, d.y, cfg).Loss(d.x, d.y));
      CHECK(ZeroProbe(d.x, d.y, cfg).Loss(d.x, d.y) == doctest::Approx(std::log(3.0)));
    }
  }
}

TEST_CASE("scaling features does not change converged predictions") {
  Rng rng(5);
  Data train = Clusters(300, 6, 3, 4.0, rng), test = Clusters(300, 6, 3, 4.0, rng);
  ProbeConfig cfg;
  cfg.standardize = false;
  cfg.epochs = 300;
  ProbeConfig scaled = cfg;
  scaled.learning_rate = cfg.learning_rate / 4;
  LinearProbe a = TrainLinearProbe(train.x, train.y, cfg);
  LinearProbe b = TrainLinearProbe(Map(train.x, 2.0, 0.0), train.y, scaled);
  CHECK(a.Predict(test.x) == b.Predict(Map(test.x, 2.0, 0.0)));

  ProbeConfig std_cfg;
  LinearProbe c = TrainLinearProbe(train.x, train.y, std_cfg);
  LinearProbe e = TrainLinearProbe(Map(train.x, 2.0, 0.0), train.y, std_cfg);
  CHECK(c.Predict(test.x) == e.Predict(Map(test.x, 2.0, 0.0)));
}

TEST_CASE("accuracy is invariant under a constant feature shift") {
  Rng rng(6);
  Data train = Clusters(300, 6, 3, 1.5, rng), test = Clusters(600, 6, 3, 1.5, rng);
  ProbeConfig cfg;
  LinearProbe a = TrainLinearProbe(train.x, train.y, cfg);
  LinearProbe b = TrainLinearProbe(Map(train.x, 1.0, 7.0), train.y, cfg);
  CHECK(EvaluateProbe(a, test.x, test.y).top1 ==
        doctest::Approx(EvaluateProbe(b, Map(test.x, 1.0, 7.0), test.y).top1).epsilon(1e-9));

  cfg.standardize = false;
  LinearProbe c = TrainLinearProbe(train.x, train.y, cfg);
  LinearProbe d = TrainLinearProbe(Map(train.x, 1.0, 0.5), train.y, cfg);
  CHECK(std::abs(EvaluateProbe(c, test.x, test.y).top1 -
                 EvaluateProbe(d, Map(test.x, 1.0, 0.5), test.y).top1) <= 0.03);
}

TEST_CASE("probe errors") {
  Tensor x(Shape{4, 2});
  std::vector<int> one{1, 1, 1, 1};
  CHECK_THROWS_AS(TrainLinearProbe(x, one, {}), ConfigError);
  std::vector<int> short_labels{0, 1};
  CHECK_THROWS(TrainLinearProbe(x, short_labels, {}));
  ProbeConfig bad;
  bad.epochs = 0;
  CHECK_THROWS_AS(bad.Validate(), ConfigError);
  ProbeConfig round = ProbeConfig::FromJson(ProbeConfig{}.ToJson());
  CHECK(round.ToJson() == ProbeConfig{}.ToJson());
}

TEST_CASE("similarity structure correlation") {
  Rng rng(7);
  Tensor a(Shape{20, 5}), b(Shape{20, 5});
  for (double& v : a.mutable_data()) v = rng.Normal();
  for (double& v : b.mutable_data()) v = rng.Normal();
  CHECK(SimilarityStructureCorrelation(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(SimilarityStructureCorrelation(a, Map(a, 3.0, 0.0)) == doctest::Approx(1.0).epsilon(1e-12));
  const double r = SimilarityStructureCorrelation(a, b);
  CHECK(r >= -1.0);
  CHECK(r <= 1.0);
  CHECK(std::abs(r) < 0.5);
}
