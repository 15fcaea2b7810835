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

#ifndef REFGAME_GAME_H_
#define REFGAME_GAME_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "refgame/agents.h"
#include "refgame/augment.h"
#include "refgame/dataset.h"
#include "refgame/optim.h"

namespace refgame {

// Views are index-aligned: game b has target b and every receiver view as a
// candidate.
struct GameBatch {
  Tensor sender_views;    // [B x 3 x S x S]
  Tensor receiver_views;  // [B x 3 x S x S]
  std::vector<std::size_t> targets;
  std::vector<std::uint64_t> sample_ids;
  std::size_t size() const { return targets.size(); }
};

// With augment == nullptr both views are the raw image. Otherwise each view
// is an independent augmentation.
GameBatch AssembleBatch(std::span<const ImageSample* const> samples,
                        const AugmentConfig* augment, Rng& rng);

struct LossResult {
  Tensor loss;  // scalar
  double accuracy = 0.0;
};

// Sender in relaxed mode, Receiver scoring every message against the whole
// receiver-view batch. Networks run in train mode.
LossResult GameLoss(GameAgents& agents, const GameBatch& batch, Rng& rng);

// Mean cross-entropy of candidate scores [B x n] against targets, with the
// finiteness check and batch diagnostics.
LossResult ScoresLoss(const Tensor& scores, std::span<const std::size_t> targets,
                      std::span<const std::uint64_t> sample_ids);

// NT-Xent over similarities [2B x 2B] where rows 2k and 2k+1 are the two
// views of image k. The diagonal never enters a denominator.
Tensor NtXentFromSimilarity(const Tensor& similarity, double temperature);
Tensor NtXentLoss(const Tensor& z, double temperature);

enum class ModelKind { kGame, kSimClr };
std::string_view ModelKindName(ModelKind kind);
ModelKind ParseModelKind(std::string_view name);

struct Variant {
  ModelKind model = ModelKind::kGame;
  bool augment = true;
  bool shared = false;

  // "+aug-shared", "-aug+shared", "simclr".
  std::string Name() const;
  static Variant Parse(std::string_view text);
  nlohmann::json ToJson() const;
  static Variant FromJson(const nlohmann::json& j);
};

struct TrainConfig {
  Variant variant;
  int epochs = 50;
  std::size_t batch_size = 32;
  AdamConfig adam;
  std::uint64_t seed = 1;
  EncoderConfig encoder;
  ChannelConfig channel;
  AugmentConfig augment;

  void Validate() const;
  nlohmann::json ToJson() const;
  static TrainConfig FromJson(const nlohmann::json& j);
};

struct EpochMetrics {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;  // train-batch accuracy
  double seconds = 0.0;   // wall time, not reproducible

  // Deterministic fields only.
  nlohmann::json ToJson() const;
};

// Either agents (game) or simclr is set.
struct TrainedModel {
  TrainConfig config;
  std::unique_ptr<GameAgents> agents;
  std::unique_ptr<SimClr> simclr;

  StateList State() const;
  Encoder& SenderEncoder();
  std::string Digest() const;
};

struct TrainResult {
  TrainedModel model;
  std::vector<EpochMetrics> metrics;
};

TrainedModel InitModel(const TrainConfig& config);

using EpochCallback = std::function<void(const EpochMetrics&)>;

// Shuffled epochs of full batches; the trailing partial batch is dropped.
// Throws NumericalError on a non-finite loss.
TrainResult Train(const TrainConfig& config, const Dataset& train,
                  const EpochCallback& on_epoch = {});

void SaveModel(const std::string& path, const TrainedModel& model);
TrainedModel LoadModel(const std::string& path);
nlohmann::json ModelSidecar(const TrainedModel& model);

// Precomputed eval-mode quantities sufficient to play any game on a fixed
// image set: the symbol each image elicits, unit-norm symbol embeddings
// [V x E] and unit-norm candidate embeddings [N x E].
struct EvalTables {
  std::vector<std::size_t> symbols;
  std::vector<double> symbol_embeddings;
  std::vector<double> image_embeddings;
  std::size_t vocab = 0;
  std::size_t dim = 0;
  std::size_t size() const { return symbols.size(); }

  // Candidate position with the highest score, lowest position on ties.
  std::size_t Choose(std::size_t target, std::span<const std::size_t> candidates) const;
};

EvalTables BuildEvalTables(GameAgents& agents, std::span<const ImageSample> images);
// SimCLR_disc: symbol = argmax of s; symbol k is embedded as row k of the
// first z-layer weight W and candidates as s W.
EvalTables BuildSimClrDiscTables(SimClr& model, std::span<const ImageSample> images);
EvalTables BuildEvalTables(TrainedModel& model, std::span<const ImageSample> images);

// Draws `games` games of 1 target plus n-1 distinct distractors, shuffled.
double EvalGameAccuracy(const EvalTables& tables, std::size_t n, std::size_t games,
                        Rng& rng);
double EvalGameAccuracy(TrainedModel& model, const Dataset& dataset, std::size_t n,
                        std::size_t games, Rng& rng);
// Same on blob_count freshly generated Gaussian blobs.
double EvalBlobSanity(TrainedModel& model, std::size_t blob_count, std::size_t n,
                      std::size_t games, Rng& rng);

}  // namespace refgame

#endif  // REFGAME_GAME_H_
