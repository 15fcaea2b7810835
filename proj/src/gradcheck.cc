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

#include "refgame/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "refgame/errors.h"

namespace refgame {

double GradCheck(const std::function<Tensor()>& f, std::span<Tensor> inputs,
                 GradCheckOptions options) {
  std::vector<bool> previous;
  for (Tensor& t : inputs) {
    previous.push_back(t.requires_grad());
    t.set_requires_grad(true);
    t.ZeroGrad();
  }
  Tensor out = f();
  if (out.size() != 1) throw DimensionError("GradCheck: f must return a scalar");
  out.Backward();

  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor& t = inputs[k];
    std::vector<double> analytic(t.size(), 0.0);
    if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.begin());
    auto values = t.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      double plus, minus;
      {
        NoGradGuard guard;
        values[i] = original + options.step;
        plus = f().item();
        values[i] = original - options.step;
        minus = f().item();
      }
      values[i] = original;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double denom =
          std::max({std::abs(analytic[i]), std::abs(numeric), options.floor});
      worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
  }
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    inputs[k].ZeroGrad();
    inputs[k].set_requires_grad(previous[k]);
  }
  return worst;
}

double GradCheck(const std::function<Tensor(const Tensor&)>& f, Tensor x,
                 GradCheckOptions options) {
  Tensor inputs[] = {x};
  return GradCheck([&] { return f(x); }, inputs, options);
}

}  // namespace refgame
