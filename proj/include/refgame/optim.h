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

#ifndef REFGAME_OPTIM_H_
#define REFGAME_OPTIM_H_

#include <cstdint>
#include <vector>

#include "refgame/tensor.h"

namespace refgame {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected adaptive moment estimation with a constant learning rate.
// Parameters that received no gradient this step are treated as having a
// zero gradient.
class Adam {
 public:
  explicit Adam(std::vector<Tensor> params, AdamConfig config = {});

  void Step();
  void ZeroGrad();

  std::int64_t steps() const { return steps_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<double>& first_moment(std::size_t i) const { return m_[i]; }
  const std::vector<double>& second_moment(std::size_t i) const { return v_[i]; }

 private:
  std::vector<Tensor> params_;
  AdamConfig config_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::int64_t steps_ = 0;
};

struct SgdConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0;
};

// Heavy-ball SGD with L2 weight decay folded into the gradient.
class Sgd {
 public:
  explicit Sgd(std::vector<Tensor> params, SgdConfig config = {});
  void Step();
  void ZeroGrad();

 private:
  std::vector<Tensor> params_;
  SgdConfig config_;
  std::vector<std::vector<double>> velocity_;
};

}  // namespace refgame

#endif  // REFGAME_OPTIM_H_
