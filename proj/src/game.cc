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

#include "refgame/game.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "refgame/errors.h"
#include "refgame/ops.h"
#include "refgame/parallel.h"

namespace refgame {

namespace {

// Rng streams derived from the training seed.
enum Stream : std::uint64_t { kInitStream = 1, kShuffleStream, kAugmentStream, kChannelStream };

std::string Join(std::span<const std::uint64_t> ids, std::size_t limit = 8) {
  std::ostringstream out;
  for (std::size_t i = 0; i < ids.size() && i < limit; ++i) out << (i ? "," : "") << ids[i];
  if (ids.size() > limit) out << ",...";
  return out.str();
}

}  // namespace

GameBatch AssembleBatch(std::span<const ImageSample* const> samples,
                        const AugmentConfig* augment, Rng& rng) {
  if (samples.size() < 2) throw BatchError("a game batch needs at least 2 images");
  std::set<std::uint64_t> seen;
  for (const ImageSample* s : samples) {
    if (!seen.insert(s->sample_id).second) {
      throw BatchError("duplicate sample id " + std::to_string(s->sample_id) +
                       " in batch");
    }
  }
  GameBatch batch;
  std::vector<Image> sender, receiver;
  sender.reserve(samples.size());
  receiver.reserve(samples.size());
  for (std::size_t b = 0; b < samples.size(); ++b) {
    const Image& image = samples[b]->image;
    if (augment) {
      sender.push_back(Augment(image, *augment, rng));
      receiver.push_back(Augment(image, *augment, rng));
    } else {
      sender.push_back(image);
      receiver.push_back(image);
    }
    batch.targets.push_back(b);
    batch.sample_ids.push_back(samples[b]->sample_id);
  }
  batch.sender_views = StackImages(sender);
  batch.receiver_views = StackImages(receiver);
  return batch;
}

LossResult ScoresLoss(const Tensor& scores, std::span<const std::size_t> targets,
                      std::span<const std::uint64_t> sample_ids) {
  LossResult out;
  out.loss = CrossEntropy(scores, targets);
  if (!std::isfinite(out.loss.item())) {
    double lo = 0, hi = 0;
    bool finite = true;
    for (double v : scores.data()) {
      if (!std::isfinite(v)) finite = false;
      else { lo = std::min(lo, v); hi = std::max(hi, v); }
    }
    std::ostringstream msg;
    msg << "non-finite loss " << out.loss.item() << " (scores "
        << (finite ? "finite" : "contain NaN/inf") << ", range [" << lo << ", " << hi
        << "], batch ids " << Join(sample_ids) << ")";
    throw NumericalError(msg.str());
  }
  const std::size_t cols = scores.dim(1);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < targets.size(); ++r)
    correct += Argmax(scores.data().subspan(r * cols, cols)) == targets[r];
  out.accuracy = static_cast<double>(correct) / static_cast<double>(targets.size());
  return out;
}

LossResult GameLoss(GameAgents& agents, const GameBatch& batch, Rng& rng) {
  SenderOutput sent = agents.sender().Forward(batch.sender_views, Mode::kTrain, rng);
  Tensor scores =
      agents.receiver().Scores(sent.messages, batch.receiver_views, Mode::kTrain);
  return ScoresLoss(scores, batch.targets, batch.sample_ids);
}

Tensor NtXentFromSimilarity(const Tensor& similarity, double temperature) {
  if (similarity.rank() != 2 || similarity.dim(0) != similarity.dim(1)) {
    throw DimensionError("NT-Xent needs a square similarity matrix, got " +
                         ShapeString(similarity.shape()));
  }
  const std::size_t rows = similarity.dim(0);
  if (rows % 2 != 0 || rows < 4) {
    throw ConfigError("NT-Xent needs B >= 2 image pairs, got " + std::to_string(rows) +
                      " rows");
  }
  if (!(temperature > 0)) throw ConfigError("NT-Xent temperature must be positive");
  // exp(-1e9) underflows to exactly 0, removing self-similarity.
  std::vector<double> mask(rows * rows, 0.0);
  for (std::size_t i = 0; i < rows; ++i) mask[i * rows + i] = -1e9;
  Tensor logits = Add(Scale(similarity, 1.0 / temperature), Tensor({rows, rows}, mask));
  std::vector<std::size_t> partners(rows);
  for (std::size_t i = 0; i < rows; ++i) partners[i] = i ^ 1;
  return CrossEntropy(logits, partners);
}

Tensor NtXentLoss(const Tensor& z, double temperature) {
  if (z.rank() != 2) throw DimensionError("NT-Xent expects [2B x E]");
  Tensor unit = NormalizeRows(z);
  return NtXentFromSimilarity(MatMul(unit, Transpose(unit)), temperature);
}

std::string_view ModelKindName(ModelKind kind) {
  return kind == ModelKind::kGame ? "game" : "simclr";
}

ModelKind ParseModelKind(std::string_view name) {
  if (name == "game") return ModelKind::kGame;
  if (name == "simclr") return ModelKind::kSimClr;
  throw ConfigError("unknown model kind '" + std::string(name) + "'");
}

std::string Variant::Name() const {
  std::string name = model == ModelKind::kSimClr ? "simclr" : "game";
  name += augment ? "+aug" : "-aug";
  if (model == ModelKind::kGame) name += shared ? "+shared" : "-shared";
  return name;
}

Variant Variant::Parse(std::string_view text) {
  Variant v;
  std::string s(text);
  auto take = [&](const std::string& word) {
    auto pos = s.find(word);
    if (pos == std::string::npos) return false;
    s.erase(pos, word.size());
    return true;
  };
  if (take("simclr")) v.model = ModelKind::kSimClr;
  else take("game");
  for (std::string_view word : {"augmentations", "aug"}) {
    for (char sign : {'+', '-'}) {
      if (take(std::string(1, sign) + std::string(word))) v.augment = sign == '+';
    }
  }
  for (char sign : {'+', '-'}) {
    if (take(std::string(1, sign) + "shared")) v.shared = sign == '+';
  }
  s.erase(std::remove_if(s.begin(), s.end(), [](char c) { return c == ' ' || c == ','; }),
          s.end());
  if (!s.empty()) throw ConfigError("cannot parse variant '" + std::string(text) + "'");
  if (v.model == ModelKind::kSimClr) v.shared = true;
  return v;
}

nlohmann::json Variant::ToJson() const {
  return {{"model", std::string(ModelKindName(model))},
          {"augmentations", augment},
          {"shared", shared}};
}

Variant Variant::FromJson(const nlohmann::json& j) {
  if (j.is_string()) return Parse(j.get<std::string>());
  Variant v;
  v.model = ParseModelKind(j.value("model", std::string("game")));
  v.augment = j.value("augmentations", v.augment);
  v.shared = j.value("shared", v.shared);
  if (v.model == ModelKind::kSimClr) v.shared = true;
  return v;
}

void TrainConfig::Validate() const {
  if (batch_size < 2) throw ConfigError("batch size must be at least 2");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (!(adam.learning_rate > 0)) throw ConfigError("learning rate must be positive");
  encoder.Validate();
  channel.Validate();
  augment.Validate();
}

nlohmann::json TrainConfig::ToJson() const {
  return {{"variant", variant.ToJson()},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"learning_rate", adam.learning_rate},
          {"adam_beta1", adam.beta1},
          {"adam_beta2", adam.beta2},
          {"adam_eps", adam.eps},
          {"seed", seed},
          {"encoder", encoder.ToJson()},
          {"channel", channel.ToJson()},
          {"augment", augment.ToJson()}};
}

TrainConfig TrainConfig::FromJson(const nlohmann::json& j) {
  TrainConfig c;
  if (j.contains("variant")) c.variant = Variant::FromJson(j.at("variant"));
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.adam.learning_rate = j.value("learning_rate", c.adam.learning_rate);
  c.adam.beta1 = j.value("adam_beta1", c.adam.beta1);
  c.adam.beta2 = j.value("adam_beta2", c.adam.beta2);
  c.adam.eps = j.value("adam_eps", c.adam.eps);
  c.seed = j.value("seed", c.seed);
  if (j.contains("encoder")) c.encoder = EncoderConfig::FromJson(j.at("encoder"));
  if (j.contains("channel")) c.channel = ChannelConfig::FromJson(j.at("channel"));
  if (j.contains("augment")) c.augment = AugmentConfig::FromJson(j.at("augment"));
  c.Validate();
  return c;
}

nlohmann::json EpochMetrics::ToJson() const {
  return {{"epoch", epoch}, {"loss", loss}, {"acc", accuracy}};
}

StateList TrainedModel::State() const {
  return agents ? agents->State() : simclr->State();
}

Encoder& TrainedModel::SenderEncoder() {
  return agents ? agents->sender().encoder() : simclr->encoder();
}

std::string TrainedModel::Digest() const {
  std::uint64_t h = Fnv1a64(std::string_view("refgame-model"));
  for (const auto& t : State().All()) {
    h = Fnv1a64(t.name, h);
    h = Fnv1a64(t.value.data().data(), t.value.size(), h);
  }
  return HexDigest(h);
}

TrainedModel InitModel(const TrainConfig& config) {
  config.Validate();
  TrainedModel model;
  model.config = config;
  Rng rng(DeriveSeed(config.seed, kInitStream));
  if (config.variant.model == ModelKind::kGame) {
    model.agents = std::make_unique<GameAgents>(config.encoder, config.channel,
                                                config.variant.shared, rng);
  } else {
    model.simclr = std::make_unique<SimClr>(config.encoder, config.channel, rng);
  }
  return model;
}

namespace {

// Rows 2k and 2k+1 hold the two views of image k.
Tensor Interleave(const Tensor& a, const Tensor& b) {
  const std::size_t n = a.dim(0), per = a.size() / n;
  std::vector<double> out(2 * a.size());
  for (std::size_t k = 0; k < n; ++k) {
    std::copy_n(a.data().data() + k * per, per, out.data() + 2 * k * per);
    std::copy_n(b.data().data() + k * per, per, out.data() + (2 * k + 1) * per);
  }
  Shape shape = a.shape();
  shape[0] = 2 * n;
  return Tensor(shape, std::move(out));
}

LossResult SimClrLoss(SimClr& model, const GameBatch& batch) {
  SimClrOutput out = model.Forward(Interleave(batch.sender_views, batch.receiver_views),
                                   Mode::kTrain);
  Tensor loss = NtXentLoss(out.z, model.channel().cosine_temperature);
  LossResult result;
  result.loss = loss;
  if (!std::isfinite(loss.item())) {
    throw NumericalError("non-finite NT-Xent loss, batch ids " + Join(batch.sample_ids));
  }
  // Fraction of anchors whose nearest other row is their partner.
  NoGradGuard guard;
  Tensor unit = NormalizeRows(out.z.Detach());
  Tensor sim = MatMul(unit, Transpose(unit));
  const std::size_t rows = sim.dim(0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < rows; ++i) {
    std::size_t best = i == 0 ? 1 : 0;
    for (std::size_t j = 0; j < rows; ++j)
      if (j != i && sim[i * rows + j] > sim[i * rows + best]) best = j;
    correct += best == (i ^ 1);
  }
  result.accuracy = static_cast<double>(correct) / static_cast<double>(rows);
  return result;
}

}  // namespace

TrainResult Train(const TrainConfig& config, const Dataset& train,
                  const EpochCallback& on_epoch) {
  config.Validate();
  if (train.size() < config.batch_size) {
    throw ConfigError("training set has " + std::to_string(train.size()) +
                      " images, fewer than one batch of " +
                      std::to_string(config.batch_size));
  }
  TrainResult result;
  result.model = InitModel(config);
  TrainedModel& model = result.model;
  Adam optimizer(model.State().ParamTensors(), config.adam);
  Rng shuffle_rng(DeriveSeed(config.seed, kShuffleStream));
  Rng augment_rng(DeriveSeed(config.seed, kAugmentStream));
  Rng channel_rng(DeriveSeed(config.seed, kChannelStream));
  const AugmentConfig* augment = config.variant.augment ? &config.augment : nullptr;

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t steps = train.size() / config.batch_size;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    shuffle_rng.Shuffle(order);
    double loss_sum = 0.0, acc_sum = 0.0;
    for (std::size_t step = 0; step < steps; ++step) {
      std::vector<const ImageSample*> samples;
      for (std::size_t b = 0; b < config.batch_size; ++b)
        samples.push_back(&train.samples[order[step * config.batch_size + b]]);
      GameBatch batch = AssembleBatch(samples, augment, augment_rng);
      LossResult r = model.agents ? GameLoss(*model.agents, batch, channel_rng)
                                  : SimClrLoss(*model.simclr, batch);
      optimizer.ZeroGrad();
      r.loss.Backward();
      optimizer.Step();
      loss_sum += r.loss.item();
      acc_sum += r.accuracy;
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.loss = loss_sum / static_cast<double>(steps);
    m.accuracy = acc_sum / static_cast<double>(steps);
    m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.metrics.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return result;
}

nlohmann::json ModelSidecar(const TrainedModel& model) {
  const TrainConfig& c = model.config;
  return {{"format", "refgame-checkpoint"},
          {"model", std::string(ModelKindName(c.variant.model))},
          {"variant", c.variant.ToJson()},
          {"variant_name", c.variant.Name()},
          {"augmentations", c.variant.augment},
          {"shared", c.variant.shared},
          {"encoder", c.encoder.ToJson()},
          {"channel", c.channel.ToJson()},
          {"train_config", c.ToJson()},
          {"digest", model.Digest()}};
}

void SaveModel(const std::string& path, const TrainedModel& model) {
  WriteCheckpoint(path, model.State().All());
  std::ofstream sidecar(path + ".json");
  if (!sidecar) throw InputError("cannot write " + path + ".json");
  sidecar << ModelSidecar(model).dump(2) << "\n";
}

TrainedModel LoadModel(const std::string& path) {
  std::ifstream in(path + ".json");
  if (!in) throw InputError("missing checkpoint sidecar " + path + ".json");
  nlohmann::json sidecar;
  try {
    sidecar = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad sidecar " + path + ".json: " + e.what());
  }
  TrainedModel model = InitModel(TrainConfig::FromJson(sidecar.at("train_config")));
  LoadState(model.State().All(), ReadCheckpoint(path));
  return model;
}

std::size_t EvalTables::Choose(std::size_t target,
                               std::span<const std::size_t> candidates) const {
  const double* e = symbol_embeddings.data() + symbols[target] * dim;
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const double* r = image_embeddings.data() + candidates[c] * dim;
    double score = 0.0;
    for (std::size_t d = 0; d < dim; ++d) score += e[d] * r[d];
    if (score > best_score) {
      best_score = score;
      best = c;
    }
  }
  return best;
}

namespace {

constexpr std::size_t kEvalChunk = 256;

// Runs fn over [lo, hi) chunks of the image set in parallel, each with a
// stacked eval-mode batch.
void ForEachChunk(std::span<const ImageSample> images,
                  const std::function<void(std::size_t, const Tensor&)>& fn) {
  const std::size_t chunks = (images.size() + kEvalChunk - 1) / kEvalChunk;
  ParallelFor(chunks, [&](std::size_t c) {
    NoGradGuard guard;
    const std::size_t lo = c * kEvalChunk, hi = std::min(images.size(), lo + kEvalChunk);
    std::vector<const Image*> batch;
    for (std::size_t i = lo; i < hi; ++i) batch.push_back(&images[i].image);
    fn(lo, StackImages(batch));
  });
}

void CopyRows(const Tensor& t, std::vector<double>& dst, std::size_t row) {
  std::copy(t.data().begin(), t.data().end(), dst.begin() + row * t.dim(1));
}

Tensor Identity(std::size_t n) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  return Tensor({n, n}, std::move(v));
}

}  // namespace

EvalTables BuildEvalTables(GameAgents& agents, std::span<const ImageSample> images) {
  if (images.empty()) throw InputError("no images to evaluate");
  EvalTables t;
  t.vocab = agents.channel().vocab_size;
  t.dim = agents.channel().embedding_dim;
  t.symbols.resize(images.size());
  t.image_embeddings.resize(images.size() * t.dim);
  {
    NoGradGuard guard;
    Tensor e = NormalizeRows(agents.receiver().EmbedMessages(Identity(t.vocab)));
    t.symbol_embeddings.assign(e.data().begin(), e.data().end());
  }
  ForEachChunk(images, [&](std::size_t lo, const Tensor& batch) {
    std::vector<std::size_t> symbols = agents.sender().Symbols(batch);
    std::copy(symbols.begin(), symbols.end(), t.symbols.begin() + lo);
    CopyRows(NormalizeRows(agents.receiver().ImageEmbeddings(batch, Mode::kEval)),
             t.image_embeddings, lo);
  });
  return t;
}

EvalTables BuildSimClrDiscTables(SimClr& model, std::span<const ImageSample> images) {
  if (images.empty()) throw InputError("no images to evaluate");
  EvalTables t;
  t.vocab = model.channel().vocab_size;
  // Symbol k is row k of the first z-layer; images use the same map on s.
  const Tensor& w = model.z_first_weight();
  t.dim = w.dim(1);
  t.symbols.resize(images.size());
  t.image_embeddings.resize(images.size() * t.dim);
  {
    NoGradGuard guard;
    Tensor e = NormalizeRows(w);
    t.symbol_embeddings.assign(e.data().begin(), e.data().end());
  }
  ForEachChunk(images, [&](std::size_t lo, const Tensor& batch) {
    SimClrOutput out = model.Forward(batch, Mode::kEval);
    const std::size_t v = t.vocab;
    for (std::size_t r = 0; r < out.s.dim(0); ++r)
      t.symbols[lo + r] = Argmax(out.s.data().subspan(r * v, v));
    CopyRows(NormalizeRows(MatMul(out.s, w)), t.image_embeddings, lo);
  });
  return t;
}

EvalTables BuildEvalTables(TrainedModel& model, std::span<const ImageSample> images) {
  return model.agents ? BuildEvalTables(*model.agents, images)
                      : BuildSimClrDiscTables(*model.simclr, images);
}

double EvalGameAccuracy(const EvalTables& tables, std::size_t n, std::size_t games,
                        Rng& rng) {
  if (n < 2) throw ConfigError("a game needs at least 2 candidates");
  if (tables.size() < n) {
    throw ConfigError("evaluation set has " + std::to_string(tables.size()) +
                      " images, fewer than n = " + std::to_string(n));
  }
  if (games == 0) throw ConfigError("number of games must be positive");
  std::size_t wins = 0;
  for (std::size_t g = 0; g < games; ++g) {
    std::vector<std::size_t> candidates = rng.SampleWithoutReplacement(tables.size(), n);
    const std::size_t target = candidates.front();
    rng.Shuffle(candidates);
    const std::size_t chosen = tables.Choose(target, candidates);
    wins += candidates[chosen] == target;
  }
  return static_cast<double>(wins) / static_cast<double>(games);
}

double EvalGameAccuracy(TrainedModel& model, const Dataset& dataset, std::size_t n,
                        std::size_t games, Rng& rng) {
  if (dataset.size() < n) {
    throw ConfigError(std::string(SplitName(dataset.split)) + " split has " +
                      std::to_string(dataset.size()) + " images, fewer than n = " +
                      std::to_string(n));
  }
  return EvalGameAccuracy(BuildEvalTables(model, dataset.samples), n, games, rng);
}

double EvalBlobSanity(TrainedModel& model, std::size_t blob_count, std::size_t n,
                      std::size_t games, Rng& rng) {
  if (blob_count < n) throw ConfigError("blob count must be at least n");
  std::vector<ImageSample> blobs;
  blobs.reserve(blob_count);
  for (std::size_t i = 0; i < blob_count; ++i) {
    blobs.push_back(GenerateBlob(rng, model.config.encoder.image_size));
    blobs.back().sample_id = i;
  }
  return EvalGameAccuracy(BuildEvalTables(model, blobs), n, games, rng);
}

}  // namespace refgame
