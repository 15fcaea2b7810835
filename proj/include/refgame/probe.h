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

#ifndef REFGAME_PROBE_H_
#define REFGAME_PROBE_H_

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "json.hpp"
#include "refgame/tensor.h"

namespace refgame {

struct ProbeConfig {
  int epochs = 100;
  double learning_rate = 0.01;
  double weight_decay = 1e-4;
  std::size_t batch_size = 64;
  double momentum = 0.9;
  // z-score each feature with training-set statistics before fitting.
  bool standardize = true;
  std::uint64_t seed = 1;

  void Validate() const;
  nlohmann::json ToJson() const;
  static ProbeConfig FromJson(const nlohmann::json& j);
};

// Multinomial logistic regression on frozen features.
struct LinearProbe {
  Tensor weight;            // [D x K]
  Tensor bias;              // [K]
  std::vector<int> classes; // label value of each output column
  std::vector<double> mean;
  std::vector<double> scale;
  std::vector<double> loss_curve;  // mean training loss per epoch

  // Logits [N x K] for raw features.
  Tensor Logits(const Tensor& features) const;
  std::vector<int> Predict(const Tensor& features) const;
  // Mean cross-entropy on labelled data; labels must all be known classes.
  double Loss(const Tensor& features, std::span<const int> labels) const;
};

// Unfitted probe with zero weights, for the loss baseline.
LinearProbe ZeroProbe(const Tensor& features, std::span<const int> labels,
                      const ProbeConfig& config);
LinearProbe TrainLinearProbe(const Tensor& features, std::span<const int> labels,
                             const ProbeConfig& config);

struct ClassAccuracy {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const { return total ? static_cast<double>(correct) / total : 0.0; }
};

struct ProbeResult {
  double top1 = 0.0;
  std::map<int, ClassAccuracy> per_class;
  std::vector<double> training_curve;

  nlohmann::json ToJson() const;
};

ProbeResult EvaluateProbe(const LinearProbe& probe, const Tensor& features,
                          std::span<const int> labels);

// Pearson correlation between the off-diagonal entries of the two
// row-cosine similarity matrices; rows must describe the same images.
double SimilarityStructureCorrelation(const Tensor& a, const Tensor& b);

}  // namespace refgame

#endif  // REFGAME_PROBE_H_
