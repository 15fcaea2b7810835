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

#include "refgame/agents.h"

#include <algorithm>
#include <cmath>

#include "refgame/errors.h"
#include "refgame/ops.h"
#include "refgame/parallel.h"

namespace refgame {

void ChannelConfig::Validate() const {
  if (vocab_size < 2) throw ConfigError("vocabulary size must be at least 2");
  if (!(gumbel_temperature > 0)) throw ConfigError("Gumbel temperature must be positive");
  if (!(cosine_temperature > 0)) throw ConfigError("cosine temperature must be positive");
  if (hidden_dim == 0 || embedding_dim == 0) throw ConfigError("head sizes must be positive");
}

nlohmann::json ChannelConfig::ToJson() const {
  return {{"vocab_size", vocab_size},
          {"gumbel_temperature", gumbel_temperature},
          {"cosine_temperature", cosine_temperature},
          {"straight_through", straight_through},
          {"hidden_dim", hidden_dim},
          {"embedding_dim", embedding_dim}};
}

ChannelConfig ChannelConfig::FromJson(const nlohmann::json& j) {
  ChannelConfig c;
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.gumbel_temperature = j.value("gumbel_temperature", c.gumbel_temperature);
  c.cosine_temperature = j.value("cosine_temperature", c.cosine_temperature);
  c.straight_through = j.value("straight_through", c.straight_through);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
  c.Validate();
  return c;
}

std::size_t Argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

namespace {

std::pair<std::size_t, std::size_t> RowsCols(const Tensor& t) {
  if (t.rank() == 1) return {1, t.dim(0)};
  if (t.rank() == 2) return {t.dim(0), t.dim(1)};
  throw DimensionError("expected [V] or [B x V], got " + ShapeString(t.shape()));
}

std::vector<double> OneHotRows(std::span<const double> values, std::size_t rows,
                               std::size_t cols) {
  std::vector<double> out(rows * cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    out[r * cols + Argmax(values.subspan(r * cols, cols))] = 1.0;
  return out;
}

// Hard one-hot forward, identity backward.
Tensor StraightThrough(const Tensor& soft) {
  auto [rows, cols] = RowsCols(soft);
  return detail::MakeResult(
      "straight_through", soft.shape(), OneHotRows(soft.data(), rows, cols), {soft},
      [](detail::Node& self) {
        detail::Node& in = *self.inputs[0];
        if (!in.requires_grad) return;
        auto& g = in.EnsureGrad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      });
}

}  // namespace

Tensor GumbelSoftmaxWithNoise(const Tensor& logits, const Tensor& noise,
                              double temperature, bool straight_through) {
  if (!(temperature > 0)) throw ConfigError("Gumbel temperature must be positive");
  RowsCols(logits);
  Tensor soft = Softmax(Scale(Add(logits, noise), 1.0 / temperature), logits.rank() - 1);
  return straight_through ? StraightThrough(soft) : soft;
}

Tensor GumbelSoftmax(const Tensor& logits, double temperature, Rng& rng,
                     bool straight_through) {
  std::vector<double> noise(logits.size());
  for (double& g : noise) g = rng.Gumbel(1e-10);
  return GumbelSoftmaxWithNoise(logits, Tensor(logits.shape(), std::move(noise)),
                                temperature, straight_through);
}

Tensor Discretize(const Tensor& logits) {
  auto [rows, cols] = RowsCols(logits);
  return Tensor(logits.shape(), OneHotRows(logits.data(), rows, cols));
}

Tensor StackImages(std::span<const Image* const> images) {
  if (images.empty()) throw InputError("cannot stack zero images");
  const Image& first = *images.front();
  std::vector<double> values;
  values.reserve(images.size() * first.size());
  for (const Image* img : images) {
    if (img->channels != first.channels || img->height != first.height ||
        img->width != first.width) {
      throw DimensionError("cannot stack images of different sizes");
    }
    values.insert(values.end(), img->pixels.begin(), img->pixels.end());
  }
  return Tensor({images.size(), first.channels, first.height, first.width},
                std::move(values));
}

Tensor StackImages(std::span<const Image> images) {
  std::vector<const Image*> ptrs;
  for (const Image& img : images) ptrs.push_back(&img);
  return StackImages(ptrs);
}

Sender::Sender(std::shared_ptr<Encoder> encoder, const ChannelConfig& channel, Rng& rng)
    : encoder_(std::move(encoder)),
      channel_(channel),
      head_(encoder_->config().output_dim, channel.vocab_size, rng),
      head_norm_(channel.vocab_size) {
  channel_.Validate();
}

Tensor Sender::Logits(const Tensor& images, Mode mode) {
  return head_norm_.Forward(head_.Forward(encoder_->Forward(images, mode)), mode);
}

SenderOutput Sender::Forward(const Tensor& images, Mode mode, Rng& rng) {
  SenderOutput out;
  out.logits = Logits(images, mode);
  if (mode == Mode::kTrain) {
    out.messages = GumbelSoftmax(out.logits, channel_.gumbel_temperature, rng,
                                 channel_.straight_through);
    out.kind = MessageKind::kRelaxed;
  } else {
    out.messages = Discretize(out.logits);
    out.kind = MessageKind::kOneHot;
  }
  return out;
}

std::vector<std::size_t> Sender::Symbols(const Tensor& images) {
  NoGradGuard guard;
  Tensor v = Logits(images, Mode::kEval);
  const std::size_t rows = v.dim(0), cols = v.dim(1);
  std::vector<std::size_t> out(rows);
  for (std::size_t r = 0; r < rows; ++r) out[r] = Argmax(v.data().subspan(r * cols, cols));
  return out;
}

void Sender::CollectHead(const std::string& prefix, StateList& out) const {
  head_.Collect(prefix + "linear.", out);
  head_norm_.Collect(prefix + "bn.", out);
}

Receiver::Receiver(std::shared_ptr<Encoder> encoder, const ChannelConfig& channel,
                   Rng& rng)
    : encoder_(std::move(encoder)),
      channel_(channel),
      fc1_(encoder_->config().output_dim, channel.hidden_dim, rng),
      fc1_norm_(channel.hidden_dim),
      fc2_(channel.hidden_dim, channel.embedding_dim, rng),
      embed_(channel.vocab_size, channel.embedding_dim, rng, /*bias=*/false) {
  channel_.Validate();
}

Tensor Receiver::ImageEmbeddings(const Tensor& images, Mode mode) {
  Tensor h = encoder_->Forward(images, mode);
  return fc2_.Forward(Relu(fc1_norm_.Forward(fc1_.Forward(h), mode)));
}

Tensor Receiver::EmbedMessages(const Tensor& messages) const {
  return embed_.Forward(messages);
}

Tensor Receiver::Scores(const Tensor& messages, const Tensor& candidates, Mode mode) {
  Tensor e = NormalizeRows(EmbedMessages(messages));
  Tensor r = NormalizeRows(ImageEmbeddings(candidates, mode));
  return Scale(MatMul(e, Transpose(r)), 1.0 / channel_.cosine_temperature);
}

Tensor Receiver::Forward(const Tensor& message, const Tensor& candidates, Mode mode) {
  if (candidates.rank() != 4 || candidates.dim(0) < 2) {
    throw ConfigError("receiver needs at least 2 candidate images");
  }
  Tensor m = message.rank() == 1 ? Reshape(message, {1, message.dim(0)}) : message;
  if (m.dim(0) != 1) throw DimensionError("Receiver::Forward takes a single message");
  Tensor probs = Softmax(Scores(m, candidates, mode), 1);
  return Reshape(probs, {candidates.dim(0)});
}

void Receiver::CollectHead(const std::string& prefix, StateList& out) const {
  fc1_.Collect(prefix + "fc1.", out);
  fc1_norm_.Collect(prefix + "fc1.bn.", out);
  fc2_.Collect(prefix + "fc2.", out);
  embed_.Collect(prefix + "embed.", out);
}

namespace {

std::shared_ptr<Encoder> MakeEncoder(const EncoderConfig& config, Rng& rng) {
  return std::make_shared<Encoder>(config, rng);
}

}  // namespace

GameAgents::GameAgents(const EncoderConfig& encoder, const ChannelConfig& channel,
                       bool shared, Rng& rng)
    : encoder_config_(encoder),
      channel_(channel),
      shared_(shared),
      sender_(MakeEncoder(encoder, rng), channel, rng),
      receiver_(shared ? sender_.shared_encoder() : MakeEncoder(encoder, rng), channel,
                rng) {}

StateList GameAgents::State() const {
  StateList out;
  if (shared_) {
    sender_.shared_encoder()->Collect("encoder.", out);
  } else {
    sender_.shared_encoder()->Collect("sender.encoder.", out);
  }
  sender_.CollectHead("sender.head.", out);
  if (!shared_) receiver_.shared_encoder()->Collect("receiver.encoder.", out);
  receiver_.CollectHead("receiver.", out);
  return out;
}

SimClr::SimClr(const EncoderConfig& encoder, const ChannelConfig& channel, Rng& rng)
    : encoder_config_(encoder),
      channel_(channel),
      encoder_(MakeEncoder(encoder, rng)),
      s_head_(encoder.output_dim, channel.vocab_size, rng),
      s_norm_(channel.vocab_size),
      z_fc1_(channel.vocab_size, channel.hidden_dim, rng),
      z_norm_(channel.hidden_dim),
      z_fc2_(channel.hidden_dim, channel.embedding_dim, rng) {
  channel_.Validate();
}

SimClrOutput SimClr::Forward(const Tensor& images, Mode mode) {
  SimClrOutput out;
  out.h = encoder_->Forward(images, mode);
  out.s = s_norm_.Forward(s_head_.Forward(out.h), mode);
  out.z = Project(out.s, mode);
  return out;
}

Tensor SimClr::Project(const Tensor& s, Mode mode) {
  return z_fc2_.Forward(Relu(z_norm_.Forward(z_fc1_.Forward(s), mode)));
}

StateList SimClr::State() const {
  StateList out;
  encoder_->Collect("encoder.", out);
  s_head_.Collect("s.linear.", out);
  s_norm_.Collect("s.bn.", out);
  z_fc1_.Collect("z.fc1.", out);
  z_norm_.Collect("z.fc1.bn.", out);
  z_fc2_.Collect("z.fc2.", out);
  return out;
}

Tensor ExtractFeatures(Encoder& encoder, std::span<const ImageSample> samples,
                       std::size_t batch) {
  if (samples.empty()) throw InputError("no samples to encode");
  const std::size_t n = samples.size();
  const std::size_t dim = encoder.config().output_dim;
  std::vector<double> out(n * dim);
  const std::size_t chunks = (n + batch - 1) / batch;
  ParallelFor(chunks, [&](std::size_t c) {
    NoGradGuard guard;
    const std::size_t lo = c * batch, hi = std::min(n, lo + batch);
    std::vector<const Image*> images;
    for (std::size_t i = lo; i < hi; ++i) images.push_back(&samples[i].image);
    Tensor h = encoder.Forward(StackImages(images), Mode::kEval);
    std::copy(h.data().begin(), h.data().end(), out.begin() + lo * dim);
  });
  return Tensor({n, dim}, std::move(out));
}

}  // namespace refgame
