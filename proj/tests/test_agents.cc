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

#include <cmath>
#include <numeric>

#include "doctest.h"
#include "refgame/agents.h"
#include "refgame/errors.h"
#include "refgame/game.h"
#include "refgame/gradcheck.h"
#include "refgame/ops.h"

using namespace refgame;

namespace {

EncoderConfig TinyEncoder() {
  EncoderConfig e;
  e.channels = {2, 3};
  e.output_dim = 8;
  e.image_size = 16;
  return e;
}

ChannelConfig TinyChannel() {
  ChannelConfig c;
  c.vocab_size = 4;
  c.hidden_dim = 8;
  c.embedding_dim = 8;
  return c;
}

Tensor RandomImages(std::size_t b, std::size_t s, Rng& rng) {
  Tensor t(Shape{b, 3, s, s});
  for (double& v : t.mutable_data()) v = rng.Uniform();
  return t;
}

double RowSum(const Tensor& t, std::size_t r) {
  const std::size_t c = t.dim(1);
  auto row = t.data().subspan(r * c, c);
  return std::accumulate(row.begin(), row.end(), 0.0);
}

}  // namespace

TEST_CASE("gumbel softmax with zero noise") {
  Tensor v(Shape{1, 2}, {1.0, 0.0});
  Tensor zero(Shape{1, 2});
  Tensor m = GumbelSoftmaxWithNoise(v, zero, 1.0);
  CHECK(m[0] == doctest::Approx(0.7310585786300049).epsilon(1e-12));
  CHECK(m[1] == doctest::Approx(0.2689414213699951).epsilon(1e-12));

  Tensor sharp = GumbelSoftmaxWithNoise(v, zero, 1e-3);
  CHECK(sharp[0] > 1.0 - 1e-12);
  CHECK(sharp[1] < 1e-12);

  Rng rng(1);
  Tensor w(Shape{1, 5}, {3.0, -2.0, 0.5, 10.0, 0.0});
  Tensor flat = GumbelSoftmax(w, 1e6, rng);
  auto d = flat.data();
  CHECK(*std::max_element(d.begin(), d.end()) - *std::min_element(d.begin(), d.end()) < 1e-4);

  // Zero noise is exactly softmax(v / tau).
  Tensor ref = Softmax(Scale(w, 1.0 / 5.0), 1);
  Tensor got = GumbelSoftmaxWithNoise(w, Tensor(Shape{1, 5}), 5.0);
  for (std::size_t i = 0; i < 5; ++i) CHECK(got[i] == ref[i]);
}

TEST_CASE("argmax of gumbel softmax follows the categorical distribution") {
  Rng rng(2024);
  Tensor v(Shape{1, 3}, {std::log(1.0), std::log(2.0), std::log(7.0)});
  std::vector<int> counts(3);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) ++counts[Argmax(GumbelSoftmax(v, 1.0, rng).data())];
  CHECK(std::abs(counts[0] / double(draws) - 0.1) < 0.01);
  CHECK(std::abs(counts[1] / double(draws) - 0.2) < 0.01);
  CHECK(std::abs(counts[2] / double(draws) - 0.7) < 0.01);
}

TEST_CASE("straight-through messages are one-hot with relaxed gradients") {
  Tensor v(Shape{1, 3}, {0.3, 1.2, -0.4}, true);
  Tensor noise(Shape{1, 3}, {0.1, -0.2, 0.05});
  Tensor m = GumbelSoftmaxWithNoise(v, noise, 2.0, true);
  CHECK(m[0] == 0.0);
  CHECK(m[1] == 1.0);
  CHECK(m[2] == 0.0);
  Tensor weights(Shape{1, 3}, {1.0, 2.0, 3.0});
  Sum(Mul(m, weights)).Backward();
  Tensor v2(Shape{1, 3}, {0.3, 1.2, -0.4}, true);
  Sum(Mul(GumbelSoftmaxWithNoise(v2, noise, 2.0), weights)).Backward();
  for (std::size_t i = 0; i < 3; ++i) CHECK(v.grad()[i] == v2.grad()[i]);
}

TEST_CASE("discretize") {
  Tensor a = Discretize(Tensor(Shape{1, 3}, {0.2, 3.1, -1.0}));
  CHECK(Argmax(a.data()) == 1);
  CHECK(RowSum(a, 0) == 1.0);
  Tensor tie = Discretize(Tensor(Shape{1, 4}, {0.5, 0.5, 0.5, 0.5}));
  CHECK(tie[0] == 1.0);
  Tensor v(Shape{2, 3}, {0.2, 3.1, -1.0, 4.0, -2.0, 4.5});
  Tensor scaled = Discretize(Scale(v, 17.5));
  Tensor base = Discretize(v);
  for (std::size_t i = 0; i < 6; ++i) CHECK(scaled[i] == base[i]);
}

TEST_CASE("channel config validation") {
  ChannelConfig c;
  c.vocab_size = 1;
  CHECK_THROWS_AS(c.Validate(), ConfigError);
  c = {};
  c.gumbel_temperature = 0.0;
  CHECK_THROWS_AS(c.Validate(), ConfigError);
  c = {};
  c.cosine_temperature = -1.0;
  CHECK_THROWS_AS(c.Validate(), ConfigError);
  c = {};
  c.straight_through = true;
  ChannelConfig back = ChannelConfig::FromJson(c.ToJson());
  CHECK(back.ToJson() == c.ToJson());
}

TEST_CASE("sender forward") {
  Rng rng(11);
  GameAgents agents(TinyEncoder(), TinyChannel(), false, rng);
  Tensor images = RandomImages(6, 16, rng);
  Rng noise(3);
  SenderOutput train = agents.sender().Forward(images, Mode::kTrain, noise);
  CHECK(train.kind == MessageKind::kRelaxed);
  CHECK(train.messages.shape() == Shape{6, 4});
  for (std::size_t r = 0; r < 6; ++r) CHECK(RowSum(train.messages, r) == doctest::Approx(1.0).epsilon(1e-9));
  for (double x : train.messages.data()) CHECK(x >= 0.0);

  SenderOutput e1 = agents.sender().Forward(images, Mode::kEval, noise);
  SenderOutput e2 = agents.sender().Forward(images, Mode::kEval, noise);
  CHECK(e1.kind == MessageKind::kOneHot);
  CHECK(e1.messages.data()[0] == e2.messages.data()[0]);
  Tensor expect = Discretize(e1.logits);
  for (std::size_t i = 0; i < expect.size(); ++i) {
    CHECK(e1.messages[i] == expect[i]);
    CHECK(e2.messages[i] == expect[i]);
  }
  for (std::size_t r = 0; r < 6; ++r) CHECK(RowSum(e1.messages, r) == 1.0);
  std::vector<std::size_t> symbols = agents.sender().Symbols(images);
  for (std::size_t r = 0; r < 6; ++r) CHECK(e1.messages[r * 4 + symbols[r]] == 1.0);

  CHECK_THROWS_AS(agents.sender().Forward(RandomImages(2, 8, rng), Mode::kEval, noise),
                  DimensionError);
}

TEST_CASE("receiver forward") {
  Rng rng(12);
  GameAgents agents(TinyEncoder(), TinyChannel(), false, rng);
  Receiver& r = agents.receiver();
  Tensor msg(Shape{1, 4}, {0.0, 1.0, 0.0, 0.0});

  // Identical candidates.
  Tensor one = RandomImages(1, 16, rng);
  Tensor same(Shape{5, 3, 16, 16});
  for (std::size_t i = 0; i < 5; ++i)
    std::copy(one.data().begin(), one.data().end(), same.mutable_data().begin() + i * one.size());
  Tensor uniform = r.Forward(msg, same, Mode::kEval);
  for (double p : uniform.data()) CHECK(p == doctest::Approx(0.2).epsilon(1e-6));

  Tensor cands = RandomImages(6, 16, rng);
  Tensor probs = r.Forward(msg, cands, Mode::kEval);
  CHECK(std::accumulate(probs.data().begin(), probs.data().end(), 0.0) ==
        doctest::Approx(1.0).epsilon(1e-9));
  for (double p : probs.data()) CHECK(p >= 0.0);
  Tensor scores = r.Scores(msg, cands, Mode::kEval);
  for (double s : scores.data()) {
    CHECK(s >= -10.0 - 1e-9);
    CHECK(s <= 10.0 + 1e-9);
  }

  // Permuting candidates permutes probabilities.
  const std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
  Tensor shuffled(cands.shape());
  const std::size_t per = cands.size() / 6;
  for (std::size_t i = 0; i < 6; ++i)
    std::copy_n(cands.data().begin() + perm[i] * per, per, shuffled.mutable_data().begin() + i * per);
  Tensor pp = r.Forward(msg, shuffled, Mode::kEval);
  for (std::size_t i = 0; i < 6; ++i) CHECK(pp[i] == doctest::Approx(probs[perm[i]]).epsilon(1e-12));

  CHECK_THROWS_AS(r.Forward(msg, RandomImages(1, 16, rng), Mode::kEval), ConfigError);
}

TEST_CASE("game loss gradients match finite differences") {
  for (bool shared : {false, true}) {
    Rng rng(21);
    GameAgents agents(TinyEncoder(), TinyChannel(), shared, rng);
    GameBatch batch;
    batch.sender_views = RandomImages(4, 16, rng);
    batch.receiver_views = RandomImages(4, 16, rng);
    batch.targets = {0, 1, 2, 3};
    batch.sample_ids = {0, 1, 2, 3};
    std::vector<Tensor> params = agents.State().ParamTensors();
    auto loss = [&] {
      Rng noise(5);
      return GameLoss(agents, batch, noise).loss;
    };
    CAPTURE(shared);
    CHECK(GradCheck(loss, params) < 1e-4);
  }
}

TEST_CASE("shared encoder is one storage") {
  Rng rng(31);
  GameAgents shared(TinyEncoder(), TinyChannel(), true, rng);
  CHECK(shared.sender().shared_encoder() == shared.receiver().shared_encoder());
  StateList sender_state, receiver_state;
  shared.sender().encoder().Collect("", sender_state);
  shared.receiver().encoder().Collect("", receiver_state);
  REQUIRE(sender_state.params.size() == receiver_state.params.size());
  for (std::size_t i = 0; i < sender_state.params.size(); ++i)
    CHECK(sender_state.params[i].value.SameStorage(receiver_state.params[i].value));
  // An update through the sender is visible to the receiver.
  Tensor images = RandomImages(3, 16, rng);
  Tensor before = shared.receiver().ImageEmbeddings(images, Mode::kEval);
  sender_state.params[0].value.mutable_data()[0] += 0.5;
  Tensor after = shared.receiver().ImageEmbeddings(images, Mode::kEval);
  CHECK(before.data()[0] != after.data()[0]);
  int encoder_entries = 0;
  for (const auto& p : shared.State().params) encoder_entries += p.name.rfind("encoder.", 0) == 0;
  CHECK(encoder_entries == static_cast<int>(sender_state.params.size()));

  GameAgents split(TinyEncoder(), TinyChannel(), false, rng);
  CHECK(split.sender().shared_encoder() != split.receiver().shared_encoder());
  for (const auto& p : split.State().params)
    CHECK((p.name.rfind("sender.", 0) == 0 || p.name.rfind("receiver.", 0) == 0));
}

TEST_CASE("simclr shapes and weight sharing") {
  Rng rng(41);
  SimClr model(TinyEncoder(), TinyChannel(), rng);
  Tensor images = RandomImages(4, 16, rng);
  Tensor twice(Shape{8, 3, 16, 16});
  std::copy(images.data().begin(), images.data().end(), twice.mutable_data().begin());
  std::copy(images.data().begin(), images.data().end(), twice.mutable_data().begin() + images.size());
  SimClrOutput out = model.Forward(twice, Mode::kEval);
  CHECK(out.h.shape() == Shape{8, 8});
  CHECK(out.s.shape() == Shape{8, 4});
  CHECK(out.z.shape() == Shape{8, 8});
  for (std::size_t i = 0; i < 4 * 8; ++i) CHECK(out.z[i] == out.z[i + 32]);
  CHECK(model.z_first_weight().shape() == Shape{4, 8});
}

TEST_CASE("simclr views of one image differ") {
  ShapeWorld w = [] {
    DataConfig c;
    c.counts = {1, 1, 1, 1};
    return MakeShapeWorld(c);
  }();
  EncoderConfig enc = TinyEncoder();
  enc.image_size = 32;
  Rng rng(51);
  SimClr model(enc, TinyChannel(), rng);
  AugmentConfig aug;
  int differ = 0;
  for (int i = 0; i < 20; ++i) {
    std::vector<Image> views{Augment(w.train.samples[0], aug, rng).image,
                             Augment(w.train.samples[0], aug, rng).image};
    SimClrOutput out = model.Forward(StackImages(views), Mode::kEval);
    differ += out.z[0] != out.z[8];
  }
  CHECK(differ == 20);
}

TEST_CASE("feature extraction") {
  DataConfig c;
  c.counts = {1, 1, 1, 1};
  ShapeWorld w = MakeShapeWorld(c);
  EncoderConfig enc;
  Rng rng(61);
  Encoder encoder(enc, rng);
  Tensor a = ExtractFeatures(encoder, w.train.samples, 7);
  Tensor b = ExtractFeatures(encoder, w.train.samples);
  CHECK(a.shape() == Shape{w.train.size(), 128});
  CHECK(!a.requires_grad());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}
