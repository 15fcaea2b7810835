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

#ifndef REFGAME_AGENTS_H_
#define REFGAME_AGENTS_H_

#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "refgame/image.h"
#include "refgame/nn.h"
#include "refgame/rng.h"
#include "refgame/tensor.h"

namespace refgame {

struct ChannelConfig {
  std::size_t vocab_size = 64;
  double gumbel_temperature = 5.0;
  double cosine_temperature = 0.1;
  bool straight_through = false;
  // Receiver MLP hidden width and shared embedding width E.
  std::size_t hidden_dim = 128;
  std::size_t embedding_dim = 128;

  void Validate() const;
  nlohmann::json ToJson() const;
  static ChannelConfig FromJson(const nlohmann::json& j);
};

// Index of the row maximum; the lowest index wins ties.
std::size_t Argmax(std::span<const double> values);

// Relaxed one-hot rows softmax((logits + noise) / temperature), with
// logits [B x V] or [V] and noise of the same shape. Differentiable in the
// logits. With `straight_through` the forward value is the hard one-hot of
// each row while gradients follow the relaxation.
Tensor GumbelSoftmaxWithNoise(const Tensor& logits, const Tensor& noise,
                              double temperature, bool straight_through = false);
// Same, with i.i.d. Gumbel(0, 1) noise drawn from `rng`.
Tensor GumbelSoftmax(const Tensor& logits, double temperature, Rng& rng,
                     bool straight_through = false);

// One-hot of each row's argmax; no noise, no gradient.
Tensor Discretize(const Tensor& logits);

// Stacks images into a [B x C x H x W] tensor.
Tensor StackImages(std::span<const Image* const> images);
Tensor StackImages(std::span<const Image> images);

enum class MessageKind { kRelaxed, kOneHot };

struct SenderOutput {
  Tensor messages;  // [B x V]
  Tensor logits;    // v, [B x V]
  MessageKind kind = MessageKind::kRelaxed;
};

// Encoder, then a linear map onto |V| dimensions and batch normalization
// giving the symbol logits v.
class Sender {
 public:
  Sender(std::shared_ptr<Encoder> encoder, const ChannelConfig& channel, Rng& rng);

  Tensor Logits(const Tensor& images, Mode mode);
  // Train mode: Gumbel-Softmax relaxation; eval mode: argmax one-hot.
  SenderOutput Forward(const Tensor& images, Mode mode, Rng& rng);
  // Eval-mode symbol indices.
  std::vector<std::size_t> Symbols(const Tensor& images);

  Encoder& encoder() { return *encoder_; }
  const std::shared_ptr<Encoder>& shared_encoder() const { return encoder_; }
  void CollectHead(const std::string& prefix, StateList& out) const;

 private:
  std::shared_ptr<Encoder> encoder_;
  ChannelConfig channel_;
  Linear head_;
  BatchNormLayer head_norm_;
};

// Encoder plus two-layer MLP (batchnorm and ReLU after the first layer) for
// images, and a linear symbol embedding. Scores are cosine similarities
// divided by the cosine temperature.
class Receiver {
 public:
  Receiver(std::shared_ptr<Encoder> encoder, const ChannelConfig& channel, Rng& rng);

  // [n x 3 x S x S] -> [n x E].
  Tensor ImageEmbeddings(const Tensor& images, Mode mode);
  // [B x V] -> [B x E].
  Tensor EmbedMessages(const Tensor& messages) const;
  // [B x n] temperature-weighted cosine scores of every message against
  // every candidate.
  Tensor Scores(const Tensor& messages, const Tensor& candidates, Mode mode);
  // One message [V] or [1 x V] against n >= 2 candidates -> probabilities [n].
  Tensor Forward(const Tensor& message, const Tensor& candidates, Mode mode);

  Encoder& encoder() { return *encoder_; }
  const std::shared_ptr<Encoder>& shared_encoder() const { return encoder_; }
  void CollectHead(const std::string& prefix, StateList& out) const;
  const ChannelConfig& channel() const { return channel_; }

 private:
  std::shared_ptr<Encoder> encoder_;
  ChannelConfig channel_;
  Linear fc1_;
  BatchNormLayer fc1_norm_;
  Linear fc2_;
  Linear embed_;
};

// Sender and Receiver, optionally sharing one encoder instance.
class GameAgents {
 public:
  GameAgents(const EncoderConfig& encoder, const ChannelConfig& channel,
             bool shared, Rng& rng);

  Sender& sender() { return sender_; }
  Receiver& receiver() { return receiver_; }
  bool shared() const { return shared_; }
  const EncoderConfig& encoder_config() const { return encoder_config_; }
  const ChannelConfig& channel() const { return channel_; }

  // Parameter names: "encoder." when shared, otherwise "sender.encoder."
  // and "receiver.encoder."; heads under "sender.head." / "receiver.".
  StateList State() const;

 private:
  EncoderConfig encoder_config_;
  ChannelConfig channel_;
  bool shared_;
  Sender sender_;
  Receiver receiver_;
};

struct SimClrOutput {
  Tensor h;  // encoder features [B x D]
  Tensor s;  // linear + batchnorm "message" layer [B x V]
  Tensor z;  // projection head output [B x E]
};

// Twin network whose two branches are one parameter set.
class SimClr {
 public:
  SimClr(const EncoderConfig& encoder, const ChannelConfig& channel, Rng& rng);

  SimClrOutput Forward(const Tensor& images, Mode mode);
  // Projection head applied to an arbitrary s-layer input [B x V].
  Tensor Project(const Tensor& s, Mode mode);
  // First z-layer weight [|V| x H].
  const Tensor& z_first_weight() const { return z_fc1_.weight(); }

  Encoder& encoder() { return *encoder_; }
  const std::shared_ptr<Encoder>& shared_encoder() const { return encoder_; }
  const EncoderConfig& encoder_config() const { return encoder_config_; }
  const ChannelConfig& channel() const { return channel_; }
  StateList State() const;

 private:
  EncoderConfig encoder_config_;
  ChannelConfig channel_;
  std::shared_ptr<Encoder> encoder_;
  Linear s_head_;
  BatchNormLayer s_norm_;
  Linear z_fc1_;
  BatchNormLayer z_norm_;
  Linear z_fc2_;
};

// Eval-mode encoder features for every sample, [N x D], computed in chunks
// of `batch` without recording gradients.
Tensor ExtractFeatures(Encoder& encoder, std::span<const ImageSample> samples,
                       std::size_t batch = 256);

}  // namespace refgame

#endif  // REFGAME_AGENTS_H_
