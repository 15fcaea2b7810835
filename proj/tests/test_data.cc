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

#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "refgame/augment.h"
#include "refgame/dataset.h"
#include "refgame/errors.h"
#include "refgame/image.h"
#include "refgame/taxonomy.h"

using namespace refgame;

namespace {

// Small world for fast tests.
DataConfig SmallConfig() {
  DataConfig c;
  c.counts = {4, 2, 2, 8};
  c.seed = 42;
  return c;
}

double MaxHorizontalStep(const Image& img) {
  double m = 0.0;
  for (std::size_t c = 0; c < img.channels; ++c)
    for (std::size_t y = 0; y < img.height; ++y)
      for (std::size_t x = 1; x < img.width; ++x)
        m = std::max(m, std::abs(img.at(c, y, x) - img.at(c, y, x - 1)));
  return m;
}

}  // namespace

TEST_CASE("default taxonomy: 32 leaves, depth 3, OOD not related to training") {
  Taxonomy t = BuildTaxonomy({});
  t.Validate();
  const auto leaves = t.Leaves();
  CHECK(leaves.size() == 32);
  CHECK(t.Depth() == 3);
  std::vector<int> train, ood;
  for (int leaf : leaves) {
    CHECK(t.node(leaf).depth == 3);
    (t.category(leaf).held_out ? ood : train).push_back(leaf);
  }
  CHECK(train.size() == 24);
  CHECK(ood.size() == 8);
  for (int o : ood)
    for (int tr : train) {
      CHECK_FALSE(t.IsAncestor(o, tr));
      CHECK_FALSE(t.IsAncestor(tr, o));
    }
  // Every (shape, fill, color) combination used at most once.
  std::set<std::tuple<ShapeKind, FillPattern, int>> combos;
  for (int leaf : leaves) {
    const Category& c = t.category(leaf);
    CHECK(combos.insert({c.shape, c.fill, c.color_family}).second);
  }
  // Novel shapes appear only among held-out leaves.
  for (int leaf : train) {
    CHECK(t.category(leaf).shape != ShapeKind::kRing);
    CHECK(t.category(leaf).shape != ShapeKind::kStar);
  }
}

TEST_CASE("taxonomy rejects infeasible configs") {
  TaxonomyConfig one;
  one.groups = 1;
  one.fills_per_group = 1;
  one.colors_per_fill = 1;
  one.held_out_per_group = 0;
  CHECK_THROWS_AS(BuildTaxonomy(one), ConfigError);
  TaxonomyConfig all_out;
  all_out.held_out_per_group = 8;
  CHECK_THROWS_AS(BuildTaxonomy(all_out), ConfigError);
}

TEST_CASE("path similarity") {
  Taxonomy t = BuildTaxonomy({});
  const auto leaves = t.Leaves();
  const int a = leaves[0];
  CHECK(PathSimilarity(t, a, a) == 1.0);
  int sibling = -1, cousin_far = -1;
  for (int b : leaves) {
    if (b == a) continue;
    if (t.node(b).parent == t.node(a).parent && sibling < 0) sibling = b;
    const int ga = *t.node(*t.node(a).parent).parent, gb = *t.node(*t.node(b).parent).parent;
    if (ga != gb && cousin_far < 0) cousin_far = b;
  }
  REQUIRE(sibling >= 0);
  REQUIRE(cousin_far >= 0);
  CHECK(PathSimilarity(t, a, sibling) == doctest::Approx(1.0 / 3).epsilon(1e-15));
  CHECK(PathSimilarity(t, a, cousin_far) == doctest::Approx(1.0 / 7).epsilon(1e-15));
  for (int x : leaves)
    for (int y : leaves) {
      const double s = PathSimilarity(t, x, y);
      CHECK(s == PathSimilarity(t, y, x));
      CHECK(s >= 1.0 / (1 + 2 * t.Depth()));
      CHECK(s <= 1.0);
      CHECK((s == 1.0) == (x == y));
    }
  CHECK_THROWS_AS(PathSimilarity(t, t.root(), a), LookupError);
}

TEST_CASE("taxonomy JSON round trip") {
  Taxonomy t = BuildTaxonomy({});
  Taxonomy u = Taxonomy::FromJson(t.ToJson());
  CHECK(u.ToJson() == t.ToJson());
}

TEST_CASE("render sample determinism, range and jitter") {
  Taxonomy t = BuildTaxonomy({});
  const Category& cat = t.category(t.Leaves()[3]);
  RenderConfig rc;
  Rng r1(7), r2(7);
  ImageSample a = RenderSample(cat, rc, r1), b = RenderSample(cat, rc, r2);
  CHECK(a.image.pixels == b.image.pixels);
  CHECK(a.category == cat.leaf_id);
  for (double p : a.image.pixels) {
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
  Rng rng(8);
  int collisions = 0;
  for (int i = 0; i < 100; ++i) {
    ImageSample x = RenderSample(cat, rc, rng), y = RenderSample(cat, rc, rng);
    collisions += x.image.pixels == y.image.pixels;
  }
  CHECK(collisions == 0);
  RenderConfig tiny;
  tiny.image_size = 8;
  CHECK_THROWS_AS(RenderSample(cat, tiny, rng), ConfigError);
}

TEST_CASE("gaussian blobs") {
  Rng rng(3);
  double n = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0;
  for (int i = 0; i < 200; ++i) {
    ImageSample b = GenerateBlob(rng, 32);
    CHECK(b.split == Split::kBlob);
    CHECK(b.category == kBlobCategory);
    double mean = 0, var = 0;
    for (double p : b.image.pixels) mean += p;
    mean /= b.image.size();
    for (double p : b.image.pixels) var += (p - mean) * (p - mean);
    var /= b.image.size() - 1;
    CHECK(std::abs(mean) <= 0.15);
    CHECK(var >= 0.85);
    CHECK(var <= 1.15);
    for (double p : b.image.pixels) {
      n += 1;
      s1 += p;
      s2 += p * p;
      s3 += p * p * p;
      s4 += p * p * p * p;
    }
  }
  CHECK(n >= 1e5);
  const double mu = s1 / n, var = s2 / n - mu * mu;
  const double m3 = s3 / n - 3 * mu * s2 / n + 2 * mu * mu * mu;
  const double m4 = s4 / n - 4 * mu * s3 / n + 6 * mu * mu * s2 / n - 3 * std::pow(mu, 4);
  CHECK(std::abs(m3 / std::pow(var, 1.5)) < 0.1);
  CHECK(std::abs(m4 / (var * var) - 3.0) < 0.2);
  Rng a(9), b(9);
  CHECK(GenerateBlob(a, 16).image.pixels == GenerateBlob(b, 16).image.pixels);
}

TEST_CASE("augmentation identities") {
  Taxonomy t = BuildTaxonomy({});
  Rng rng(12);
  ImageSample s = RenderSample(t.category(t.Leaves()[0]), {}, rng);
  ImageSample same = Augment(s, AugmentConfig::Disabled(), rng);
  CHECK(same.image.pixels == s.image.pixels);

  AugmentConfig near;
  near.crop_scale = {1.0, 1.0};
  near.crop_aspect = {1.0, 1.0};
  near.color = false;
  near.blur_probability = 1.0;
  near.blur_sigma = {1e-6, 1e-6};
  ImageSample id = Augment(s, near, rng);
  for (std::size_t i = 0; i < s.image.size(); ++i)
    CHECK(std::abs(id.image.pixels[i] - s.image.pixels[i]) < 1e-6);

  AugmentConfig full;
  for (int i = 0; i < 50; ++i) {
    ImageSample a = Augment(s, full, rng);
    CHECK(a.category == s.category);
    CHECK(a.sample_id == s.sample_id);
    CHECK(a.image.height == s.image.height);
    CHECK(a.image.width == s.image.width);
    for (double p : a.image.pixels) {
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
    }
  }
  CHECK_THROWS_AS(Augment(GenerateBlob(rng, 32), full, rng), InputError);
  AugmentConfig bad;
  bad.crop_scale = {0.0, 1.0};
  CHECK_THROWS_AS(bad.Validate(), ConfigError);
  bad = {};
  bad.blur_probability = 1.5;
  CHECK_THROWS_AS(bad.Validate(), ConfigError);
}

TEST_CASE("blur with sigma 5 halves the sharpest edge") {
  Image img(1, 32, 32);
  for (std::size_t y = 0; y < 32; ++y)
    for (std::size_t x = 16; x < 32; ++x) img.at(0, y, x) = 1.0;
  Image blurred = GaussianBlur(img, 5.0);
  CHECK(MaxHorizontalStep(img) == 1.0);
  CHECK(MaxHorizontalStep(blurred) <= 0.5 * MaxHorizontalStep(img));

  // Reference: direct 1D Gaussian over a row with edge replication.
  const int radius = static_cast<int>(std::ceil(3 * 5.0));
  std::vector<double> w(2 * radius + 1);
  double total = 0;
  for (int k = -radius; k <= radius; ++k) total += w[k + radius] = std::exp(-k * k / 50.0);
  for (int x = 0; x < 32; ++x) {
    double v = 0;
    for (int k = -radius; k <= radius; ++k) {
      const int xx = std::clamp(x + k, 0, 31);
      v += w[k + radius] / total * img.at(0, 5, xx);
    }
    CHECK(blurred.at(0, 5, x) == doctest::Approx(v).epsilon(1e-12));
  }
}

TEST_CASE("splits: counts, disjointness, regeneration") {
  DataConfig cfg = SmallConfig();
  ShapeWorld w = MakeShapeWorld(cfg);
  CHECK(w.manifest.train_categories.size() == 24);
  CHECK(w.manifest.ood_categories.size() == 8);
  CHECK(w.train.size() == 24 * 4);
  CHECK(w.val.size() == 24 * 2);
  CHECK(w.ood.size() == 8 * 2);
  CHECK(w.blobs.size() == 8);
  std::set<int> train_cats(w.manifest.train_categories.begin(), w.manifest.train_categories.end());
  for (int c : w.manifest.ood_categories) CHECK(train_cats.count(c) == 0);
  for (int c : w.manifest.val_categories) CHECK(train_cats.count(c) == 1);
  std::set<std::uint64_t> ids;
  for (const Dataset* d : {&w.train, &w.val, &w.ood, &w.blobs})
    for (const auto& s : d->samples) CHECK(ids.insert(s.sample_id).second);
  for (const auto& s : w.ood.samples) CHECK(train_cats.count(s.category) == 0);

  ShapeWorld again = RegenerateFromManifest(DatasetManifest::FromJson(w.manifest.ToJson()));
  CHECK(again.train.samples[0].image.pixels == w.train.samples[0].image.pixels);
  for (Split s : {Split::kTrain, Split::kVal, Split::kOod, Split::kBlob})
    CHECK(again.split(s).Checksum() == w.split(s).Checksum());
  CHECK(again.manifest.ToJson() == w.manifest.ToJson());

  DatasetManifest tampered = w.manifest;
  tampered.checksums["train"] = "0000000000000000";
  CHECK_THROWS_AS(RegenerateFromManifest(tampered), FormatError);
}

TEST_CASE("dataset tensors") {
  ShapeWorld w = MakeShapeWorld(SmallConfig());
  auto tensors = DatasetTensors(w.val);
  REQUIRE(tensors.size() == 3);
  CHECK(tensors[0].value.shape() == Shape{48, 3, 32, 32});
  CHECK(tensors[1].value.size() == 48);
}
