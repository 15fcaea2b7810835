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

#ifndef REFGAME_GRADCHECK_H_
#define REFGAME_GRADCHECK_H_

#include <functional>
#include <span>

#include "refgame/tensor.h"

namespace refgame {

struct GradCheckOptions {
  double step = 1e-5;
  // Denominator floor of the relative error, so components whose true
  // gradient is ~0 are judged on absolute error instead.
  double floor = 1e-4;
};

// Compares reverse-mode gradients of the scalar `f` with respect to every
// tensor in `inputs` against central finite differences and returns the
// largest |analytic - numeric| / max(|analytic|, |numeric|, floor).
// `f` must rebuild its graph from the inputs on each call.
double GradCheck(const std::function<Tensor()>& f, std::span<Tensor> inputs,
                 GradCheckOptions options = {});

double GradCheck(const std::function<Tensor(const Tensor&)>& f, Tensor x,
                 GradCheckOptions options = {});

}  // namespace refgame

#endif  // REFGAME_GRADCHECK_H_
