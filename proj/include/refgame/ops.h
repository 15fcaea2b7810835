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

#ifndef REFGAME_OPS_H_
#define REFGAME_OPS_H_

#include <cstddef>
#include <span>

#include "refgame/tensor.h"

namespace refgame {

// Elementwise ops on identically shaped tensors.
Tensor Add(const Tensor& a, const Tensor& b);
Tensor Sub(const Tensor& a, const Tensor& b);
Tensor Mul(const Tensor& a, const Tensor& b);
Tensor Scale(const Tensor& a, double factor);
Tensor Relu(const Tensor& x);

// x[M x N] + bias[N], bias broadcast over rows.
Tensor AddBias(const Tensor& x, const Tensor& bias);

Tensor MatMul(const Tensor& a, const Tensor& b);
Tensor Transpose(const Tensor& a);
Tensor Reshape(const Tensor& x, Shape shape);

Tensor Sum(const Tensor& x);
Tensor Mean(const Tensor& x);

// Numerically stable along `axis` (max subtracted before exponentiation).
Tensor Softmax(const Tensor& x, std::size_t axis);
Tensor LogSoftmax(const Tensor& x, std::size_t axis);

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

// Cross-correlation (no kernel flip) of input[B x C x H x W] with
// kernel[O x C x kh x kw], zero padding. Output spatial size is
// floor((H + 2 * padding - kh) / stride) + 1.
Tensor Conv2d(const Tensor& input, const Tensor& kernel,
              Conv2dOptions options = {});

// Non-overlapping max pooling over window x window patches; ties resolve to
// the first maximum in row-major order.
Tensor MaxPool2d(const Tensor& input, std::size_t window);

enum class Mode { kTrain, kEval };

// Running statistics and hyperparameters of one batchnorm layer.
struct BatchNormState {
  explicit BatchNormState(std::size_t features, double momentum = 0.1,
                          double eps = 1e-5);
  Tensor running_mean;
  Tensor running_var;
  double momentum;
  double eps;
};

// Per-feature normalization of x[B x D] or per-channel normalization of
// x[B x C x H x W]. Train mode uses batch statistics (biased variance) and
// folds them into the running statistics (unbiased variance); eval mode
// uses the running statistics.
Tensor BatchNorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 BatchNormState& state, Mode mode);

// u . v / (max(|u|, eps) * max(|v|, eps)) as a scalar tensor.
Tensor CosineSimilarity(const Tensor& u, const Tensor& v, double eps = 1e-8);

// Each row of x[M x N] divided by max(|row|, eps).
Tensor NormalizeRows(const Tensor& x, double eps = 1e-8);

// Mean over rows of -log_softmax(logits)[row, target].
Tensor CrossEntropy(const Tensor& logits, std::span<const std::size_t> targets);

}  // namespace refgame

#endif  // REFGAME_OPS_H_
