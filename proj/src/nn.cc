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

#include "refgame/nn.h"

#include <algorithm>
#include <cmath>
#include <map>

#include "refgame/errors.h"

namespace refgame {

namespace {

Tensor UniformInit(Shape shape, double bound, Rng& rng) {
  std::vector<double> values(NumElements(shape));
  for (double& v : values) v = rng.Uniform(-bound, bound);
  return Tensor(std::move(shape), std::move(values), true);
}

}  // namespace

std::vector<Tensor> StateList::ParamTensors() const {
  std::vector<Tensor> out;
  for (const auto& p : params) out.push_back(p.value);
  return out;
}

std::vector<NamedTensor> StateList::All() const {
  std::vector<NamedTensor> out = params;
  out.insert(out.end(), buffers.begin(), buffers.end());
  return out;
}

Linear::Linear(std::size_t in, std::size_t out, Rng& rng, bool bias) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  weight_ = UniformInit({in, out}, bound, rng);
  if (bias) bias_ = UniformInit({out}, bound, rng);
}

Tensor Linear::Forward(const Tensor& x) const {
  Tensor y = MatMul(x, weight_);
  return bias_.defined() ? AddBias(y, bias_) : y;
}

void Linear::Collect(const std::string& prefix, StateList& out) const {
  out.params.push_back({prefix + "weight", weight_});
  if (bias_.defined()) out.params.push_back({prefix + "bias", bias_});
}

BatchNormLayer::BatchNormLayer(std::size_t features)
    : gamma_(Tensor::Filled({features}, 1.0)),
      beta_(Shape{features}),
      state_(features) {
  gamma_.set_requires_grad(true);
  beta_.set_requires_grad(true);
}

Tensor BatchNormLayer::Forward(const Tensor& x, Mode mode) {
  return BatchNorm(x, gamma_, beta_, state_, mode);
}

void BatchNormLayer::Collect(const std::string& prefix, StateList& out) const {
  out.params.push_back({prefix + "gamma", gamma_});
  out.params.push_back({prefix + "beta", beta_});
  out.buffers.push_back({prefix + "running_mean", state_.running_mean});
  out.buffers.push_back({prefix + "running_var", state_.running_var});
}

Conv2dLayer::Conv2dLayer(std::size_t in_channels, std::size_t out_channels,
                         std::size_t kernel, Rng& rng)
    : padding_(kernel / 2) {
  const double fan_in = static_cast<double>(in_channels * kernel * kernel);
  kernel_ = UniformInit({out_channels, in_channels, kernel, kernel},
                        1.0 / std::sqrt(fan_in), rng);
}

Tensor Conv2dLayer::Forward(const Tensor& x) const {
  return Conv2d(x, kernel_, {.stride = 1, .padding = padding_});
}

void Conv2dLayer::Collect(const std::string& prefix, StateList& out) const {
  out.params.push_back({prefix + "kernel", kernel_});
}

void EncoderConfig::Validate() const {
  if (output_dim < 8) throw ConfigError("encoder output dim must be at least 8");
  if (image_size < 16) throw ConfigError("image size must be at least 16");
  if (kind == EncoderKind::kSmallCnn) {
    if (channels.size() < 2) throw ConfigError("cnn encoder needs depth >= 2");
    if (image_size % (std::size_t{1} << channels.size()) != 0) {
      throw ConfigError("image size must be divisible by 2^depth");
    }
    for (std::size_t c : channels)
      if (c == 0) throw ConfigError("cnn channel widths must be positive");
  } else if (mlp_hidden == 0) {
    throw ConfigError("mlp hidden size must be positive");
  }
}

nlohmann::json EncoderConfig::ToJson() const {
  return {{"architecture", kind == EncoderKind::kSmallCnn ? "small-cnn" : "mlp"},
          {"channels", channels},
          {"mlp_hidden", mlp_hidden},
          {"output_dim", output_dim},
          {"image_size", image_size}};
}

EncoderConfig EncoderConfig::FromJson(const nlohmann::json& j) {
  EncoderConfig c;
  const std::string arch = j.value("architecture", std::string("small-cnn"));
  if (arch == "small-cnn") {
    c.kind = EncoderKind::kSmallCnn;
  } else if (arch == "mlp") {
    c.kind = EncoderKind::kMlp;
  } else {
    throw ConfigError("unknown encoder architecture '" + arch + "'");
  }
  c.channels = j.value("channels", c.channels);
  c.mlp_hidden = j.value("mlp_hidden", c.mlp_hidden);
  c.output_dim = j.value("output_dim", c.output_dim);
  c.image_size = j.value("image_size", c.image_size);
  c.Validate();
  return c;
}

Encoder::Encoder(const EncoderConfig& config, Rng& rng) : config_(config) {
  config_.Validate();
  const std::size_t s = config_.image_size;
  if (config_.kind == EncoderKind::kSmallCnn) {
    std::size_t in = 3;
    for (std::size_t width : config_.channels) {
      convs_.emplace_back(in, width, 3, rng);
      conv_norms_.emplace_back(width);
      in = width;
    }
    const std::size_t side = s >> config_.channels.size();
    output_ = std::make_unique<Linear>(in * side * side, config_.output_dim, rng);
  } else {
    hidden_ = std::make_unique<Linear>(3 * s * s, config_.mlp_hidden, rng);
    hidden_norm_ = std::make_unique<BatchNormLayer>(config_.mlp_hidden);
    output_ = std::make_unique<Linear>(config_.mlp_hidden, config_.output_dim, rng);
  }
}

Tensor Encoder::Forward(const Tensor& images, Mode mode) {
  const std::size_t s = config_.image_size;
  if (images.rank() != 4 || images.dim(1) != 3 || images.dim(2) != s ||
      images.dim(3) != s) {
    throw DimensionError("encoder expects [B x 3 x " + std::to_string(s) + " x " +
                         std::to_string(s) + "], got " + ShapeString(images.shape()));
  }
  const std::size_t batch = images.dim(0);
  if (config_.kind == EncoderKind::kSmallCnn) {
    Tensor x = images;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
      x = MaxPool2d(Relu(conv_norms_[i].Forward(convs_[i].Forward(x), mode)), 2);
    }
    return output_->Forward(Reshape(x, {batch, x.size() / batch}));
  }
  Tensor flat = Reshape(images, {batch, 3 * s * s});
  return output_->Forward(Relu(hidden_norm_->Forward(hidden_->Forward(flat), mode)));
}

void Encoder::Collect(const std::string& prefix, StateList& out) const {
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    convs_[i].Collect(prefix + "conv" + std::to_string(i) + ".", out);
    conv_norms_[i].Collect(prefix + "conv" + std::to_string(i) + ".bn.", out);
  }
  if (hidden_) {
    hidden_->Collect(prefix + "hidden.", out);
    hidden_norm_->Collect(prefix + "hidden.bn.", out);
  }
  output_->Collect(prefix + "out.", out);
}

void LoadState(const std::vector<NamedTensor>& target,
               const std::vector<NamedTensor>& source) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& s : source) by_name[s.name] = &s.value;
  for (const auto& t : target) {
    auto it = by_name.find(t.name);
    if (it == by_name.end()) throw FormatError("checkpoint lacks tensor '" + t.name + "'");
    if (it->second->shape() != t.value.shape()) {
      throw FormatError("checkpoint tensor '" + t.name + "' has shape " +
                        ShapeString(it->second->shape()) + ", expected " +
                        ShapeString(t.value.shape()));
    }
    Tensor dst = t.value;
    auto values = dst.mutable_data();
    std::copy(it->second->data().begin(), it->second->data().end(), values.begin());
  }
}

}  // namespace refgame
