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

#include "refgame/probe.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "refgame/agents.h"
#include "refgame/errors.h"
#include "refgame/ops.h"
#include "refgame/optim.h"
#include "refgame/rng.h"

namespace refgame {

void ProbeConfig::Validate() const {
  if (epochs < 1) throw ConfigError("probe epochs must be at least 1");
  if (!(learning_rate > 0)) throw ConfigError("probe learning rate must be positive");
  if (!(weight_decay >= 0)) throw ConfigError("probe weight decay must be non-negative");
  if (batch_size == 0) throw ConfigError("probe batch size must be positive");
  if (!(momentum >= 0 && momentum < 1)) throw ConfigError("probe momentum must lie in [0, 1)");
}

nlohmann::json ProbeConfig::ToJson() const {
  return {{"epochs", epochs},         {"learning_rate", learning_rate},
          {"weight_decay", weight_decay}, {"batch_size", batch_size},
          {"momentum", momentum},     {"standardize", standardize},
          {"seed", seed}};
}

ProbeConfig ProbeConfig::FromJson(const nlohmann::json& j) {
  ProbeConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.momentum = j.value("momentum", c.momentum);
  c.standardize = j.value("standardize", c.standardize);
  c.seed = j.value("seed", c.seed);
  c.Validate();
  return c;
}

namespace {

void CheckShapes(const LinearProbe& probe, const Tensor& features) {
  if (features.rank() != 2 || features.dim(1) != probe.weight.dim(0)) {
    throw DimensionError("probe expects features [N x " +
                         std::to_string(probe.weight.dim(0)) + "], got " +
                         ShapeString(features.shape()));
  }
}

Tensor Standardized(const LinearProbe& probe, const Tensor& features) {
  const std::size_t n = features.dim(0), d = features.dim(1);
  std::vector<double> out(features.size());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      out[i * d + j] = (features[i * d + j] - probe.mean[j]) * probe.scale[j];
  return Tensor({n, d}, std::move(out));
}

std::vector<std::size_t> ClassIndices(const LinearProbe& probe, std::span<const int> labels) {
  std::vector<std::size_t> out;
  out.reserve(labels.size());
  for (int label : labels) {
    auto it = std::lower_bound(probe.classes.begin(), probe.classes.end(), label);
    if (it == probe.classes.end() || *it != label) {
      throw LookupError("label " + std::to_string(label) + " unseen by the probe");
    }
    out.push_back(static_cast<std::size_t>(it - probe.classes.begin()));
  }
  return out;
}

}  // namespace

Tensor LinearProbe::Logits(const Tensor& features) const {
  CheckShapes(*this, features);
  return AddBias(MatMul(Standardized(*this, features), weight), bias);
}

std::vector<int> LinearProbe::Predict(const Tensor& features) const {
  NoGradGuard guard;
  Tensor logits = Logits(features);
  const std::size_t k = classes.size();
  std::vector<int> out(features.dim(0));
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = classes[Argmax(logits.data().subspan(i * k, k))];
  return out;
}

double LinearProbe::Loss(const Tensor& features, std::span<const int> labels) const {
  NoGradGuard guard;
  return CrossEntropy(Logits(features), ClassIndices(*this, labels)).item();
}

LinearProbe ZeroProbe(const Tensor& features, std::span<const int> labels,
                      const ProbeConfig& config) {
  config.Validate();
  if (features.rank() != 2) throw DimensionError("probe features must be [N x D]");
  const std::size_t n = features.dim(0), d = features.dim(1);
  if (labels.size() != n) {
    throw DimensionError("probe got " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(n) + " feature rows");
  }
  std::set<int> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) throw ConfigError("probe needs at least 2 classes");
  LinearProbe probe;
  probe.classes.assign(distinct.begin(), distinct.end());
  const std::size_t k = probe.classes.size();
  probe.weight = Tensor({d, k}, /*requires_grad=*/true);
  probe.bias = Tensor({k}, /*requires_grad=*/true);
  probe.mean.assign(d, 0.0);
  probe.scale.assign(d, 1.0);
  if (config.standardize) {
    for (std::size_t j = 0; j < d; ++j) {
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) sum += features[i * d + j];
      const double mu = sum / static_cast<double>(n);
      double sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) sq += (features[i * d + j] - mu) * (features[i * d + j] - mu);
      const double sd = std::sqrt(sq / static_cast<double>(n));
      probe.mean[j] = mu;
      probe.scale[j] = sd > 1e-12 ? 1.0 / sd : 1.0;
    }
  }
  return probe;
}

LinearProbe TrainLinearProbe(const Tensor& features, std::span<const int> labels,
                             const ProbeConfig& config) {
  LinearProbe probe = ZeroProbe(features, labels, config);
  const std::size_t n = features.dim(0), d = features.dim(1);
  const Tensor x = Standardized(probe, features);
  const std::vector<std::size_t> targets = ClassIndices(probe, labels);
  Sgd optimizer({probe.weight, probe.bias},
                {config.learning_rate, config.momentum, config.weight_decay});
  Rng rng(DeriveSeed(config.seed, 0x70726f6265ULL));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.Shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t lo = 0; lo < n; lo += config.batch_size) {
      const std::size_t hi = std::min(n, lo + config.batch_size);
      std::vector<double> rows((hi - lo) * d);
      std::vector<std::size_t> batch_targets(hi - lo);
      for (std::size_t i = lo; i < hi; ++i) {
        std::copy_n(x.data().data() + order[i] * d, d, rows.begin() + (i - lo) * d);
        batch_targets[i - lo] = targets[order[i]];
      }
      Tensor loss = CrossEntropy(
          AddBias(MatMul(Tensor({hi - lo, d}, std::move(rows)), probe.weight), probe.bias),
          batch_targets);
      optimizer.ZeroGrad();
      loss.Backward();
      optimizer.Step();
      loss_sum += loss.item() * static_cast<double>(hi - lo);
    }
    probe.loss_curve.push_back(loss_sum / static_cast<double>(n));
  }
  probe.weight = probe.weight.Detach();
  probe.bias = probe.bias.Detach();
  return probe;
}

nlohmann::json ProbeResult::ToJson() const {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& [label, acc] : per_class) {
    classes.push_back({{"class", label},
                       {"correct", acc.correct},
                       {"total", acc.total},
                       {"accuracy", acc.accuracy()}});
  }
  return {{"top1", top1}, {"per_class", classes}, {"training_curve", training_curve}};
}

ProbeResult EvaluateProbe(const LinearProbe& probe, const Tensor& features,
                          std::span<const int> labels) {
  CheckShapes(probe, features);
  if (labels.size() != features.dim(0)) {
    throw DimensionError("probe evaluation got " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(features.dim(0)) + " rows");
  }
  if (labels.empty()) throw InputError("probe evaluation on an empty set");
  ProbeResult result;
  result.training_curve = probe.loss_curve;
  const std::vector<int> predicted = probe.Predict(features);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& cls = result.per_class[labels[i]];
    ++cls.total;
    if (predicted[i] == labels[i]) {
      ++cls.correct;
      ++correct;
    }
  }
  result.top1 = static_cast<double>(correct) / static_cast<double>(labels.size());
  return result;
}

double SimilarityStructureCorrelation(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0) || a.dim(0) < 3) {
    throw DimensionError("similarity correlation needs two [N x D] matrices, N >= 3");
  }
  NoGradGuard guard;
  Tensor ua = NormalizeRows(a), ub = NormalizeRows(b);
  Tensor sa = MatMul(ua, Transpose(ua)), sb = MatMul(ub, Transpose(ub));
  const std::size_t n = a.dim(0);
  double mx = 0, my = 0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      mx += sa[i * n + j];
      my += sb[i * n + j];
      ++count;
    }
  mx /= static_cast<double>(count);
  my /= static_cast<double>(count);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = sa[i * n + j] - mx, dy = sb[i * n + j] - my;
      sxy += dx * dy;
      sxx += dx * dx;
      syy += dy * dy;
    }
  if (sxx == 0 || syy == 0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace refgame
