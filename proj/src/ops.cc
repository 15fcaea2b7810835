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

#include "refgame/ops.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "kernels.h"
#include "refgame/errors.h"

namespace refgame {

using detail::MakeResult;
using detail::Node;

namespace {

void RequireSameShape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         ShapeString(a.shape()) + " vs " +
                         ShapeString(b.shape()));
  }
}

void RequireRank(const char* op, const Tensor& x, std::size_t rank) {
  if (x.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " +
                         std::to_string(rank) + ", got " +
                         ShapeString(x.shape()));
  }
}

// Accumulates `values` into the gradient of input `i` if it wants one.
template <typename F>
void Accumulate(Node& self, std::size_t i, F&& fn) {
  Node& in = *self.inputs[i];
  if (!in.requires_grad) return;
  fn(in.EnsureGrad());
}

// Splits a shape around `axis` into (outer, axis length, inner).
struct AxisSplit {
  std::size_t outer = 1, length = 1, inner = 1;
};

AxisSplit SplitAt(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " +
                         ShapeString(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.length = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

Tensor Add(const Tensor& a, const Tensor& b) {
  RequireSameShape("Add", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return MakeResult("add", a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      Accumulate(self, k, [&](std::vector<double>& g) {
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      });
    }
  });
}

Tensor Sub(const Tensor& a, const Tensor& b) {
  RequireSameShape("Sub", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return MakeResult("sub", a.shape(), std::move(out), {a, b}, [](Node& self) {
    Accumulate(self, 0, [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
    Accumulate(self, 1, [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    });
  });
}

Tensor Mul(const Tensor& a, const Tensor& b) {
  RequireSameShape("Mul", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return MakeResult("mul", a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& a_data = self.inputs[0]->data;
    const auto& b_data = self.inputs[1]->data;
    Accumulate(self, 0, [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * b_data[i];
    });
    Accumulate(self, 1, [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * a_data[i];
    });
  });
}

Tensor Scale(const Tensor& a, double factor) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
  return MakeResult("scale", a.shape(), std::move(out), {a},
                    [factor](Node& self) {
                      Accumulate(self, 0, [&](std::vector<double>& g) {
                        for (std::size_t i = 0; i < g.size(); ++i)
                          g[i] += self.grad[i] * factor;
                      });
                    });
}

Tensor Relu(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  return MakeResult("relu", x.shape(), std::move(out), {x}, [](Node& self) {
    const auto& x_data = self.inputs[0]->data;
    Accumulate(self, 0, [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < g.size(); ++i)
        if (x_data[i] > 0.0) g[i] += self.grad[i];
    });
  });
}

Tensor AddBias(const Tensor& x, const Tensor& bias) {
  RequireRank("AddBias", x, 2);
  RequireRank("AddBias", bias, 1);
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (bias.dim(0) != cols) {
    throw DimensionError("AddBias: bias " + ShapeString(bias.shape()) +
                         " does not match " + ShapeString(x.shape()));
  }
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      out[r * cols + c] = x[r * cols + c] + bias[c];
  return MakeResult("add_bias", x.shape(), std::move(out), {x, bias},
                    [rows, cols](Node& self) {
                      Accumulate(self, 0, [&](std::vector<double>& g) {
                        for (std::size_t i = 0; i < g.size(); ++i)
                          g[i] += self.grad[i];
                      });
                      Accumulate(self, 1, [&](std::vector<double>& g) {
                        for (std::size_t r = 0; r < rows; ++r)
                          for (std::size_t c = 0; c < cols; ++c)
                            g[c] += self.grad[r * cols + c];
                      });
                    });
}

Tensor MatMul(const Tensor& a, const Tensor& b) {
  RequireRank("MatMul", a, 2);
  RequireRank("MatMul", b, 2);
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("MatMul: inner dimensions disagree, " +
                         ShapeString(a.shape()) + " x " +
                         ShapeString(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  kernels::GemmAcc(m, n, k, a.data().data(), b.data().data(), out.data());
  return MakeResult("matmul", {m, n}, std::move(out), {a, b},
                    [m, k, n](Node& self) {
                      const auto& a_data = self.inputs[0]->data;
                      const auto& b_data = self.inputs[1]->data;
                      Accumulate(self, 0, [&](std::vector<double>& g) {
                        auto bt = kernels::Transposed(k, n, b_data.data());
                        kernels::GemmAcc(m, k, n, self.grad.data(), bt.data(),
                                         g.data());
                      });
                      Accumulate(self, 1, [&](std::vector<double>& g) {
                        auto at = kernels::Transposed(m, k, a_data.data());
                        kernels::GemmAcc(k, n, m, at.data(), self.grad.data(),
                                         g.data());
                      });
                    });
}

Tensor Transpose(const Tensor& a) {
  RequireRank("Transpose", a, 2);
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  return MakeResult(
      "transpose", {cols, rows}, kernels::Transposed(rows, cols, a.data().data()),
      {a}, [rows, cols](Node& self) {
        Accumulate(self, 0, [&](std::vector<double>& g) {
          for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j)
              g[i * cols + j] += self.grad[j * rows + i];
        });
      });
}

Tensor Reshape(const Tensor& x, Shape shape) {
  if (NumElements(shape) != x.size()) {
    throw DimensionError("Reshape: cannot view " + ShapeString(x.shape()) +
                         " as " + ShapeString(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return MakeResult("reshape", std::move(shape), std::move(out), {x},
                    [](Node& self) {
                      Accumulate(self, 0, [&](std::vector<double>& g) {
                        for (std::size_t i = 0; i < g.size(); ++i)
                          g[i] += self.grad[i];
                      });
                    });
}

Tensor Sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return MakeResult("sum", {}, {total}, {x}, [](Node& self) {
    Accumulate(self, 0, [&](std::vector<double>& g) {
      for (double& gi : g) gi += self.grad[0];
    });
  });
}

Tensor Mean(const Tensor& x) {
  if (x.size() == 0) throw DimensionError("Mean of empty tensor");
  const double n = static_cast<double>(x.size());
  double total = 0.0;
  for (double v : x.data()) total += v;
  return MakeResult("mean", {}, {total / n}, {x}, [n](Node& self) {
    Accumulate(self, 0, [&](std::vector<double>& g) {
      for (double& gi : g) gi += self.grad[0] / n;
    });
  });
}

Tensor Softmax(const Tensor& x, std::size_t axis) {
  const AxisSplit s = SplitAt(x.shape(), axis);
  std::vector<double> out(x.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.length * s.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < s.length; ++a)
        mx = std::max(mx, x[base + a * s.inner]);
      double total = 0.0;
      for (std::size_t a = 0; a < s.length; ++a) {
        const double e = std::exp(x[base + a * s.inner] - mx);
        out[base + a * s.inner] = e;
        total += e;
      }
      for (std::size_t a = 0; a < s.length; ++a) out[base + a * s.inner] /= total;
    }
  }
  return MakeResult("softmax", x.shape(), std::move(out), {x}, [s](Node& self) {
    Accumulate(self, 0, [&](std::vector<double>& g) {
      const auto& y = self.data;
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t in = 0; in < s.inner; ++in) {
          const std::size_t base = o * s.length * s.inner + in;
          double dot = 0.0;
          for (std::size_t a = 0; a < s.length; ++a) {
            const std::size_t i = base + a * s.inner;
            dot += self.grad[i] * y[i];
          }
          for (std::size_t a = 0; a < s.length; ++a) {
            const std::size_t i = base + a * s.inner;
            g[i] += y[i] * (self.grad[i] - dot);
          }
        }
      }
    });
  });
}

Tensor LogSoftmax(const Tensor& x, std::size_t axis) {
  const AxisSplit s = SplitAt(x.shape(), axis);
  std::vector<double> out(x.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.length * s.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < s.length; ++a)
        mx = std::max(mx, x[base + a * s.inner]);
      double total = 0.0;
      for (std::size_t a = 0; a < s.length; ++a)
        total += std::exp(x[base + a * s.inner] - mx);
      const double log_total = std::log(total);
      for (std::size_t a = 0; a < s.length; ++a)
        out[base + a * s.inner] = x[base + a * s.inner] - mx - log_total;
    }
  }
  return MakeResult(
      "log_softmax", x.shape(), std::move(out), {x}, [s](Node& self) {
        Accumulate(self, 0, [&](std::vector<double>& g) {
          const auto& y = self.data;
          for (std::size_t o = 0; o < s.outer; ++o) {
            for (std::size_t in = 0; in < s.inner; ++in) {
              const std::size_t base = o * s.length * s.inner + in;
              double total = 0.0;
              for (std::size_t a = 0; a < s.length; ++a)
                total += self.grad[base + a * s.inner];
              for (std::size_t a = 0; a < s.length; ++a) {
                const std::size_t i = base + a * s.inner;
                g[i] += self.grad[i] - std::exp(y[i]) * total;
              }
            }
          }
        });
      });
}

Tensor Conv2d(const Tensor& input, const Tensor& kernel,
              Conv2dOptions options) {
  RequireRank("Conv2d", input, 4);
  RequireRank("Conv2d", kernel, 4);
  const std::size_t batch = input.dim(0), channels = input.dim(1),
                    height = input.dim(2), width = input.dim(3);
  const std::size_t out_channels = kernel.dim(0), kh = kernel.dim(2),
                    kw = kernel.dim(3);
  const std::size_t stride = options.stride, pad = options.padding;
  if (kernel.dim(1) != channels) {
    throw DimensionError("Conv2d: kernel " + ShapeString(kernel.shape()) +
                         " does not match input " +
                         ShapeString(input.shape()));
  }
  if (stride == 0) throw DimensionError("Conv2d: stride must be positive");
  if (height + 2 * pad < kh || width + 2 * pad < kw) {
    throw DimensionError("Conv2d: kernel " + ShapeString(kernel.shape()) +
                         " larger than padded input " +
                         ShapeString(input.shape()));
  }
  const std::size_t out_h = (height + 2 * pad - kh) / stride + 1;
  const std::size_t out_w = (width + 2 * pad - kw) / stride + 1;
  const std::size_t patch = channels * kh * kw;
  const std::size_t positions = out_h * out_w;

  // Column buffers are kept for the backward pass.
  auto columns = std::make_shared<std::vector<double>>(batch * patch * positions);
  const double* x = input.data().data();
  for (std::size_t b = 0; b < batch; ++b) {
    double* col = columns->data() + b * patch * positions;
    for (std::size_t c = 0; c < channels; ++c) {
      const double* plane = x + (b * channels + c) * height * width;
      for (std::size_t ki = 0; ki < kh; ++ki) {
        for (std::size_t kj = 0; kj < kw; ++kj) {
          double* row = col + ((c * kh + ki) * kw + kj) * positions;
          for (std::size_t i = 0; i < out_h; ++i) {
            const long y = static_cast<long>(i * stride + ki) - static_cast<long>(pad);
            for (std::size_t j = 0; j < out_w; ++j) {
              const long xx = static_cast<long>(j * stride + kj) - static_cast<long>(pad);
              row[i * out_w + j] =
                  (y >= 0 && y < static_cast<long>(height) && xx >= 0 &&
                   xx < static_cast<long>(width))
                      ? plane[y * static_cast<long>(width) + xx]
                      : 0.0;
            }
          }
        }
      }
    }
  }
  std::vector<double> out(batch * out_channels * positions, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    kernels::GemmAcc(out_channels, positions, patch, kernel.data().data(),
                     columns->data() + b * patch * positions,
                     out.data() + b * out_channels * positions);
  }
  return MakeResult(
      "conv2d", {batch, out_channels, out_h, out_w}, std::move(out),
      {input, kernel},
      [=](Node& self) {
        const auto& w = self.inputs[1]->data;
        Accumulate(self, 1, [&](std::vector<double>& g) {
          std::vector<double> col_t(positions * patch);
          for (std::size_t b = 0; b < batch; ++b) {
            kernels::TransposeInto(patch, positions,
                                   columns->data() + b * patch * positions,
                                   col_t.data());
            kernels::GemmAcc(out_channels, patch, positions,
                             self.grad.data() + b * out_channels * positions,
                             col_t.data(), g.data());
          }
        });
        Accumulate(self, 0, [&](std::vector<double>& g) {
          auto w_t = kernels::Transposed(out_channels, patch, w.data());
          std::vector<double> dcol(patch * positions);
          for (std::size_t b = 0; b < batch; ++b) {
            std::fill(dcol.begin(), dcol.end(), 0.0);
            kernels::GemmAcc(patch, positions, out_channels, w_t.data(),
                             self.grad.data() + b * out_channels * positions,
                             dcol.data());
            for (std::size_t c = 0; c < channels; ++c) {
              double* plane = g.data() + (b * channels + c) * height * width;
              for (std::size_t ki = 0; ki < kh; ++ki) {
                for (std::size_t kj = 0; kj < kw; ++kj) {
                  const double* row =
                      dcol.data() + ((c * kh + ki) * kw + kj) * positions;
                  for (std::size_t i = 0; i < out_h; ++i) {
                    const long y = static_cast<long>(i * stride + ki) -
                                   static_cast<long>(pad);
                    if (y < 0 || y >= static_cast<long>(height)) continue;
                    for (std::size_t j = 0; j < out_w; ++j) {
                      const long xx = static_cast<long>(j * stride + kj) -
                                      static_cast<long>(pad);
                      if (xx < 0 || xx >= static_cast<long>(width)) continue;
                      plane[y * static_cast<long>(width) + xx] +=
                          row[i * out_w + j];
                    }
                  }
                }
              }
            }
          }
        });
      });
}

Tensor MaxPool2d(const Tensor& input, std::size_t window) {
  RequireRank("MaxPool2d", input, 4);
  if (window == 0 || input.dim(2) < window || input.dim(3) < window) {
    throw DimensionError("MaxPool2d: window " + std::to_string(window) +
                         " does not fit " + ShapeString(input.shape()));
  }
  const std::size_t planes = input.dim(0) * input.dim(1);
  const std::size_t height = input.dim(2), width = input.dim(3);
  const std::size_t out_h = height / window, out_w = width / window;
  std::vector<double> out(planes * out_h * out_w);
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
  const double* x = input.data().data();
  for (std::size_t p = 0; p < planes; ++p) {
    const std::size_t plane = p * height * width;
    for (std::size_t i = 0; i < out_h; ++i) {
      for (std::size_t j = 0; j < out_w; ++j) {
        std::size_t best = plane + (i * window) * width + j * window;
        for (std::size_t di = 0; di < window; ++di) {
          for (std::size_t dj = 0; dj < window; ++dj) {
            const std::size_t idx =
                plane + (i * window + di) * width + j * window + dj;
            if (x[idx] > x[best]) best = idx;
          }
        }
        const std::size_t o = (p * out_h + i) * out_w + j;
        out[o] = x[best];
        (*argmax)[o] = best;
      }
    }
  }
  return MakeResult("max_pool2d",
                    {input.dim(0), input.dim(1), out_h, out_w}, std::move(out),
                    {input}, [argmax](Node& self) {
                      Accumulate(self, 0, [&](std::vector<double>& g) {
                        for (std::size_t o = 0; o < argmax->size(); ++o)
                          g[(*argmax)[o]] += self.grad[o];
                      });
                    });
}

BatchNormState::BatchNormState(std::size_t features, double momentum,
                               double eps)
    : running_mean(Shape{features}),
      running_var(Tensor::Filled({features}, 1.0)),
      momentum(momentum),
      eps(eps) {}

Tensor BatchNorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 BatchNormState& state, Mode mode) {
  if (x.rank() != 2 && x.rank() != 4) {
    throw DimensionError("BatchNorm: expected [B x D] or [B x C x H x W], got " +
                         ShapeString(x.shape()));
  }
  const std::size_t batch = x.dim(0), features = x.dim(1);
  const std::size_t spatial = x.rank() == 4 ? x.dim(2) * x.dim(3) : 1;
  if (gamma.size() != features || beta.size() != features ||
      state.running_mean.size() != features) {
    throw DimensionError("BatchNorm: parameter size does not match " +
                         ShapeString(x.shape()));
  }
  const std::size_t count = batch * spatial;
  auto index = [=](std::size_t b, std::size_t f, std::size_t s) {
    return (b * features + f) * spatial + s;
  };

  std::vector<double> mean(features), inv_std(features);
  if (mode == Mode::kTrain) {
    if (batch < 2) {
      throw DegenerateBatchError(
          "BatchNorm: train mode needs at least 2 rows, got " +
          std::to_string(batch));
    }
    auto running_mean = state.running_mean.mutable_data();
    auto running_var = state.running_var.mutable_data();
    for (std::size_t f = 0; f < features; ++f) {
      double total = 0.0;
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t s = 0; s < spatial; ++s) total += x[index(b, f, s)];
      const double mu = total / static_cast<double>(count);
      double sq = 0.0;
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t s = 0; s < spatial; ++s) {
          const double d = x[index(b, f, s)] - mu;
          sq += d * d;
        }
      const double var = sq / static_cast<double>(count);
      mean[f] = mu;
      inv_std[f] = 1.0 / std::sqrt(var + state.eps);
      const double unbiased = sq / static_cast<double>(count - 1);
      running_mean[f] =
          (1.0 - state.momentum) * running_mean[f] + state.momentum * mu;
      running_var[f] =
          (1.0 - state.momentum) * running_var[f] + state.momentum * unbiased;
    }
  } else {
    for (std::size_t f = 0; f < features; ++f) {
      mean[f] = state.running_mean[f];
      inv_std[f] = 1.0 / std::sqrt(state.running_var[f] + state.eps);
    }
  }

  auto normalized = std::make_shared<std::vector<double>>(x.size());
  std::vector<double> out(x.size());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t f = 0; f < features; ++f)
      for (std::size_t s = 0; s < spatial; ++s) {
        const std::size_t i = index(b, f, s);
        const double xhat = (x[i] - mean[f]) * inv_std[f];
        (*normalized)[i] = xhat;
        out[i] = gamma[f] * xhat + beta[f];
      }

  const bool train = mode == Mode::kTrain;
  return MakeResult(
      "batch_norm", x.shape(), std::move(out), {x, gamma, beta},
      [=, inv_std = std::move(inv_std)](Node& self) {
        const auto& dy = self.grad;
        const auto& g_data = self.inputs[1]->data;
        std::vector<double> sum_dy(features, 0.0), sum_dy_xhat(features, 0.0);
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t f = 0; f < features; ++f)
            for (std::size_t s = 0; s < spatial; ++s) {
              const std::size_t i = index(b, f, s);
              sum_dy[f] += dy[i];
              sum_dy_xhat[f] += dy[i] * (*normalized)[i];
            }
        Accumulate(self, 1, [&](std::vector<double>& g) {
          for (std::size_t f = 0; f < features; ++f) g[f] += sum_dy_xhat[f];
        });
        Accumulate(self, 2, [&](std::vector<double>& g) {
          for (std::size_t f = 0; f < features; ++f) g[f] += sum_dy[f];
        });
        Accumulate(self, 0, [&](std::vector<double>& g) {
          const double n = static_cast<double>(count);
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t f = 0; f < features; ++f)
              for (std::size_t s = 0; s < spatial; ++s) {
                const std::size_t i = index(b, f, s);
                const double scale = g_data[f] * inv_std[f];
                if (train) {
                  g[i] += scale *
                          (dy[i] - sum_dy[f] / n -
                           (*normalized)[i] * sum_dy_xhat[f] / n);
                } else {
                  g[i] += scale * dy[i];
                }
              }
        });
      });
}

Tensor CosineSimilarity(const Tensor& u, const Tensor& v, double eps) {
  RequireSameShape("CosineSimilarity", u, v);
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  const double nu = std::sqrt(uu), nv = std::sqrt(vv);
  const double du = std::max(nu, eps), dv = std::max(nv, eps);
  const double cosine = dot / (du * dv);
  return MakeResult(
      "cosine_similarity", {}, {cosine}, {u, v}, [=](Node& self) {
        const double g0 = self.grad[0];
        const auto& u_data = self.inputs[0]->data;
        const auto& v_data = self.inputs[1]->data;
        // d(cos)/du = v / (du dv) - cos * u / |u|^2 while |u| > eps.
        Accumulate(self, 0, [&](std::vector<double>& g) {
          for (std::size_t i = 0; i < g.size(); ++i) {
            double d = v_data[i] / (du * dv);
            if (nu > eps) d -= cosine * u_data[i] / (nu * nu);
            g[i] += g0 * d;
          }
        });
        Accumulate(self, 1, [&](std::vector<double>& g) {
          for (std::size_t i = 0; i < g.size(); ++i) {
            double d = u_data[i] / (du * dv);
            if (nv > eps) d -= cosine * v_data[i] / (nv * nv);
            g[i] += g0 * d;
          }
        });
      });
}

Tensor NormalizeRows(const Tensor& x, double eps) {
  RequireRank("NormalizeRows", x, 2);
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  std::vector<double> norms(rows);
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    double sq = 0.0;
    for (std::size_t c = 0; c < cols; ++c) sq += x[r * cols + c] * x[r * cols + c];
    norms[r] = std::sqrt(sq);
    const double denom = std::max(norms[r], eps);
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = x[r * cols + c] / denom;
  }
  return MakeResult(
      "normalize_rows", x.shape(), std::move(out), {x},
      [=, norms = std::move(norms)](Node& self) {
        Accumulate(self, 0, [&](std::vector<double>& g) {
          const auto& y = self.data;
          for (std::size_t r = 0; r < rows; ++r) {
            const std::size_t base = r * cols;
            if (norms[r] > eps) {
              double dot = 0.0;
              for (std::size_t c = 0; c < cols; ++c)
                dot += y[base + c] * self.grad[base + c];
              for (std::size_t c = 0; c < cols; ++c)
                g[base + c] += (self.grad[base + c] - y[base + c] * dot) / norms[r];
            } else {
              for (std::size_t c = 0; c < cols; ++c)
                g[base + c] += self.grad[base + c] / eps;
            }
          }
        });
      });
}

Tensor CrossEntropy(const Tensor& logits,
                    std::span<const std::size_t> targets) {
  RequireRank("CrossEntropy", logits, 2);
  const std::size_t rows = logits.dim(0), classes = logits.dim(1);
  if (targets.size() != rows) {
    throw DimensionError("CrossEntropy: " + std::to_string(targets.size()) +
                         " targets for " + ShapeString(logits.shape()));
  }
  for (std::size_t t : targets) {
    if (t >= classes) {
      throw LookupError("CrossEntropy: target " + std::to_string(t) +
                        " out of range for " + std::to_string(classes) +
                        " classes");
    }
  }
  auto probs = std::make_shared<std::vector<double>>(logits.size());
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = logits.data().data() + r * classes;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < classes; ++c) mx = std::max(mx, row[c]);
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) total += std::exp(row[c] - mx);
    const double log_total = std::log(total);
    for (std::size_t c = 0; c < classes; ++c)
      (*probs)[r * classes + c] = std::exp(row[c] - mx - log_total);
    loss -= row[targets[r]] - mx - log_total;
  }
  loss /= static_cast<double>(rows);
  std::vector<std::size_t> target_copy(targets.begin(), targets.end());
  return MakeResult(
      "cross_entropy", {}, {loss}, {logits},
      [=, target_copy = std::move(target_copy)](Node& self) {
        Accumulate(self, 0, [&](std::vector<double>& g) {
          const double scale = self.grad[0] / static_cast<double>(rows);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < classes; ++c)
              g[r * classes + c] += scale * (*probs)[r * classes + c];
            g[r * classes + target_copy[r]] -= scale;
          }
        });
      });
}

}  // namespace refgame
