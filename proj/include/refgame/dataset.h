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

#ifndef REFGAME_DATASET_H_
#define REFGAME_DATASET_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "refgame/checkpoint.h"
#include "refgame/image.h"
#include "refgame/taxonomy.h"

namespace refgame {

struct SplitCounts {
  int train_per_category = 200;
  int val_per_category = 32;
  int ood_per_category = 32;
  int blobs = 1024;
};

struct DataConfig {
  TaxonomyConfig taxonomy;
  RenderConfig render;
  SplitCounts counts;
  std::uint64_t seed = 1;

  void Validate() const;
  nlohmann::json ToJson() const;
  static DataConfig FromJson(const nlohmann::json& j);
};

struct Dataset {
  Split split = Split::kTrain;
  std::vector<ImageSample> samples;

  std::size_t size() const { return samples.size(); }
  // Digest over every pixel of every sample, in order.
  std::uint64_t Checksum() const;
  std::vector<int> Labels() const;
};

struct DatasetManifest {
  nlohmann::json config;  // DataConfig echo
  nlohmann::json taxonomy;
  std::vector<int> train_categories;
  std::vector<int> val_categories;
  std::vector<int> ood_categories;
  SplitCounts counts;
  std::uint64_t seed = 0;
  std::string render_config_hash;
  // Split name -> hex checksum of its pixel data.
  std::map<std::string, std::string> checksums;

  nlohmann::json ToJson() const;
  static DatasetManifest FromJson(const nlohmann::json& j);
};

struct ShapeWorld {
  Taxonomy taxonomy;
  DatasetManifest manifest;
  Dataset train;
  Dataset val;
  Dataset ood;
  Dataset blobs;

  const Dataset& split(Split s) const;
};

// Builds the taxonomy, assigns held-out leaves to the OOD split and renders
// every split. Each sample draws from its own stream derived from
// (seed, sample id), so generation order does not affect pixels.
ShapeWorld MakeShapeWorld(const DataConfig& config);

// Regenerates the world a manifest describes; throws FormatError if the
// regenerated checksums differ from the recorded ones.
ShapeWorld RegenerateFromManifest(const DatasetManifest& manifest);

// Split as a checkpoint container: pixels [N x C x H x W], labels [N],
// sample_ids [N].
std::vector<NamedTensor> DatasetTensors(const Dataset& dataset);

}  // namespace refgame

#endif  // REFGAME_DATASET_H_
