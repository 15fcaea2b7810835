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

#ifndef REFGAME_NN_H_
#define REFGAME_NN_H_

#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "refgame/checkpoint.h"
#include "refgame/ops.h"
#include "refgame/rng.h"
#include "refgame/tensor.h"

namespace refgame {

// Trainable parameters and non-trainable buffers (batchnorm running
// statistics) of a network, by qualified name.
struct StateList {
  std::vector<NamedTensor> params;
  std::vector<NamedTensor> buffers;

  std::vector<Tensor> ParamTensors() const;
  // params followed by buffers.
  std::vector<NamedTensor> All() const;
};

class Linear {
 public:
  Linear(std::size_t in, std::size_t out, Rng& rng, bool bias = true);

  Tensor Forward(const Tensor& x) const;
  void Collect(const std::string& prefix, StateList& out) const;

  std::size_t in_features() const { return weight_.dim(0); }
  std::size_t out_features() const { return weight_.dim(1); }
  const Tensor& weight() const { return weight_; }

 private:
  Tensor weight_;  // [in x out]
  Tensor bias_;    // [out], undefined without bias
};

class BatchNormLayer {
 public:
  explicit BatchNormLayer(std::size_t features);

  Tensor Forward(const Tensor& x, Mode mode);
  void Collect(const std::string& prefix, StateList& out) const;

 private:
  Tensor gamma_;
  Tensor beta_;
  BatchNormState state_;
};

class Conv2dLayer {
 public:
  Conv2dLayer(std::size_t in_channels, std::size_t out_channels,
              std::size_t kernel, Rng& rng);

  Tensor Forward(const Tensor& x) const;
  void Collect(const std::string& prefix, StateList& out) const;

 private:
  Tensor kernel_;
  std::size_t padding_;
};

enum class EncoderKind { kSmallCnn, kMlp };

struct EncoderConfig {
  EncoderKind kind = EncoderKind::kSmallCnn;
  std::vector<std::size_t> channels{8, 16, 32};  // one conv block each
  std::size_t mlp_hidden = 128;
  std::size_t output_dim = 128;
  std::size_t image_size = 32;

  void Validate() const;
  nlohmann::json ToJson() const;
  static EncoderConfig FromJson(const nlohmann::json& j);
};

// Visual module: conv -> batchnorm -> ReLU -> 2x2 max-pool blocks followed
// by a linear layer, or a two-layer MLP on raw pixels.
class Encoder {
 public:
  Encoder(const EncoderConfig& config, Rng& rng);

  // images [B x 3 x S x S] -> features [B x D].
  Tensor Forward(const Tensor& images, Mode mode);
  void Collect(const std::string& prefix, StateList& out) const;

  const EncoderConfig& config() const { return config_; }

 private:
  EncoderConfig config_;
  std::vector<Conv2dLayer> convs_;
  std::vector<BatchNormLayer> conv_norms_;
  std::unique_ptr<Linear> hidden_;
  std::unique_ptr<BatchNormLayer> hidden_norm_;
  std::unique_ptr<Linear> output_;
};

// Copies values from `source` into the tensors of `target` with matching
// names. Throws FormatError on a missing name or a shape mismatch.
void LoadState(const std::vector<NamedTensor>& target,
               const std::vector<NamedTensor>& source);

}  // namespace refgame

#endif  // REFGAME_NN_H_
