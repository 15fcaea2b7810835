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

#include "refgame/dataset.h"

#include <algorithm>
#include <set>

#include "refgame/errors.h"
#include "refgame/rng.h"

namespace refgame {

namespace {

Dataset RenderSplit(const Taxonomy& taxonomy, const std::vector<int>& categories,
                    int per_category, Split split, const DataConfig& config,
                    std::uint64_t& next_id) {
  Dataset out;
  out.split = split;
  out.samples.reserve(categories.size() * per_category);
  for (int leaf : categories) {
    const Category& category = taxonomy.category(leaf);
    for (int i = 0; i < per_category; ++i) {
      const std::uint64_t id = next_id++;
      Rng rng(DeriveSeed(config.seed, id));
      ImageSample s = RenderSample(category, config.render, rng);
      s.sample_id = id;
      s.split = split;
      out.samples.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace

void DataConfig::Validate() const {
  if (counts.train_per_category <= 0 || counts.val_per_category <= 0 ||
      counts.ood_per_category <= 0 || counts.blobs <= 0) {
    throw ConfigError("split counts must be positive");
  }
  if (render.image_size < 16) throw ConfigError("image size must be at least 16");
}

nlohmann::json DataConfig::ToJson() const {
  return {{"taxonomy", taxonomy.ToJson()},
          {"render", render.ToJson()},
          {"counts",
           {{"train_per_category", counts.train_per_category},
            {"val_per_category", counts.val_per_category},
            {"ood_per_category", counts.ood_per_category},
            {"blobs", counts.blobs}}},
          {"seed", seed}};
}

DataConfig DataConfig::FromJson(const nlohmann::json& j) {
  DataConfig c;
  if (j.contains("taxonomy")) c.taxonomy = TaxonomyConfig::FromJson(j.at("taxonomy"));
  if (j.contains("render")) c.render = RenderConfig::FromJson(j.at("render"));
  if (j.contains("counts")) {
    const auto& k = j.at("counts");
    c.counts.train_per_category = k.value("train_per_category", c.counts.train_per_category);
    c.counts.val_per_category = k.value("val_per_category", c.counts.val_per_category);
    c.counts.ood_per_category = k.value("ood_per_category", c.counts.ood_per_category);
    c.counts.blobs = k.value("blobs", c.counts.blobs);
  }
  c.seed = j.value("seed", c.seed);
  c.Validate();
  return c;
}

std::uint64_t Dataset::Checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& s : samples) h = ImageDigest(s.image, h);
  return h;
}

std::vector<int> Dataset::Labels() const {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.category);
  return out;
}

nlohmann::json DatasetManifest::ToJson() const {
  return {{"config", config},
          {"taxonomy", taxonomy},
          {"splits",
           {{"train", {{"categories", train_categories}, {"per_category", counts.train_per_category}}},
            {"val", {{"categories", val_categories}, {"per_category", counts.val_per_category}}},
            {"ood", {{"categories", ood_categories}, {"per_category", counts.ood_per_category}}},
            {"blob", {{"count", counts.blobs}}}}},
          {"seed", seed},
          {"render_config_hash", render_config_hash},
          {"checksums", checksums}};
}

DatasetManifest DatasetManifest::FromJson(const nlohmann::json& j) {
  DatasetManifest m;
  m.config = j.at("config");
  m.taxonomy = j.at("taxonomy");
  const auto& splits = j.at("splits");
  m.train_categories = splits.at("train").at("categories").get<std::vector<int>>();
  m.val_categories = splits.at("val").at("categories").get<std::vector<int>>();
  m.ood_categories = splits.at("ood").at("categories").get<std::vector<int>>();
  m.counts.train_per_category = splits.at("train").at("per_category").get<int>();
  m.counts.val_per_category = splits.at("val").at("per_category").get<int>();
  m.counts.ood_per_category = splits.at("ood").at("per_category").get<int>();
  m.counts.blobs = splits.at("blob").at("count").get<int>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.render_config_hash = j.value("render_config_hash", "");
  m.checksums = j.value("checksums", std::map<std::string, std::string>{});
  return m;
}

const Dataset& ShapeWorld::split(Split s) const {
  switch (s) {
    case Split::kTrain: return train;
    case Split::kVal: return val;
    case Split::kOod: return ood;
    case Split::kBlob: return blobs;
  }
  throw ConfigError("unknown split");
}

ShapeWorld MakeShapeWorld(const DataConfig& config) {
  config.Validate();
  ShapeWorld world;
  world.taxonomy = BuildTaxonomy(config.taxonomy);

  std::vector<int> train_cats, ood_cats;
  for (int leaf : world.taxonomy.Leaves()) {
    (world.taxonomy.category(leaf).held_out ? ood_cats : train_cats).push_back(leaf);
  }
  // OOD leaves must be neither train leaves nor their ancestors/descendants.
  for (int o : ood_cats) {
    for (int t : train_cats) {
      if (o == t || world.taxonomy.IsAncestor(o, t) || world.taxonomy.IsAncestor(t, o)) {
        throw Error("internal: OOD category overlaps training category");
      }
    }
  }

  std::uint64_t next_id = 0;
  world.train = RenderSplit(world.taxonomy, train_cats, config.counts.train_per_category,
                            Split::kTrain, config, next_id);
  world.val = RenderSplit(world.taxonomy, train_cats, config.counts.val_per_category,
                          Split::kVal, config, next_id);
  world.ood = RenderSplit(world.taxonomy, ood_cats, config.counts.ood_per_category,
                          Split::kOod, config, next_id);
  world.blobs.split = Split::kBlob;
  for (int i = 0; i < config.counts.blobs; ++i) {
    const std::uint64_t id = next_id++;
    Rng rng(DeriveSeed(config.seed, id));
    ImageSample s = GenerateBlob(rng, config.render.image_size);
    s.sample_id = id;
    world.blobs.samples.push_back(std::move(s));
  }

  DatasetManifest& m = world.manifest;
  m.config = config.ToJson();
  m.taxonomy = world.taxonomy.ToJson();
  m.train_categories = train_cats;
  m.val_categories = train_cats;
  m.ood_categories = ood_cats;
  m.counts = config.counts;
  m.seed = config.seed;
  m.render_config_hash = HexDigest(Fnv1a64(config.render.ToJson().dump()));
  for (Split s : {Split::kTrain, Split::kVal, Split::kOod, Split::kBlob}) {
    m.checksums[std::string(SplitName(s))] = HexDigest(world.split(s).Checksum());
  }
  return world;
}

ShapeWorld RegenerateFromManifest(const DatasetManifest& manifest) {
  DataConfig config = DataConfig::FromJson(manifest.config);
  ShapeWorld world = MakeShapeWorld(config);
  for (const auto& [split, digest] : manifest.checksums) {
    auto it = world.manifest.checksums.find(split);
    if (it == world.manifest.checksums.end() || it->second != digest) {
      throw FormatError("regenerated split '" + split + "' does not match manifest checksum");
    }
  }
  return world;
}

std::vector<NamedTensor> DatasetTensors(const Dataset& dataset) {
  const std::size_t n = dataset.size();
  if (n == 0) return {};
  const Image& first = dataset.samples.front().image;
  std::vector<double> pixels;
  pixels.reserve(n * first.size());
  std::vector<double> labels, ids;
  for (const auto& s : dataset.samples) {
    pixels.insert(pixels.end(), s.image.pixels.begin(), s.image.pixels.end());
    labels.push_back(s.category);
    ids.push_back(static_cast<double>(s.sample_id));
  }
  return {{"pixels", Tensor({n, first.channels, first.height, first.width}, std::move(pixels))},
          {"labels", Tensor({n}, std::move(labels))},
          {"sample_ids", Tensor({n}, std::move(ids))}};
}

}  // namespace refgame
