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

#ifndef REFGAME_TAXONOMY_H_
#define REFGAME_TAXONOMY_H_

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace refgame {

enum class ShapeKind { kCircle, kSquare, kTriangle, kCross, kStar, kRing };
enum class FillPattern { kSolid, kOutline, kStriped };

std::string_view ShapeKindName(ShapeKind kind);
std::string_view FillPatternName(FillPattern fill);
ShapeKind ParseShapeKind(std::string_view name);
FillPattern ParseFillPattern(std::string_view name);

inline constexpr int kNumColorFamilies = 8;
inline constexpr int kNumBackgroundFamilies = 2;
std::string_view ColorFamilyName(int family);
// Hue center of a color family, degrees.
double ColorFamilyHue(int family);

// Rendering parameters attached to a taxonomy leaf.
struct Category {
  int leaf_id = -1;
  ShapeKind shape = ShapeKind::kCircle;
  FillPattern fill = FillPattern::kSolid;
  int color_family = 0;
  std::array<double, 2> hue{0.0, 0.0};    // degrees
  std::array<double, 2> size{0.2, 0.4};   // radius / image size
  int background_family = 0;
  // Held out of training by the default split.
  bool held_out = false;
};

struct TaxonomyNode {
  int id = 0;
  std::string name;
  std::optional<int> parent;
  std::vector<int> children;
  int depth = 0;
};

// Rooted is-a tree whose leaves are the image categories.
class Taxonomy {
 public:
  Taxonomy() = default;

  // Appends a node; the parent must already exist. Returns its id.
  int AddNode(std::string name, std::optional<int> parent);
  void SetCategory(int leaf_id, Category category);

  int root() const { return 0; }
  const std::vector<TaxonomyNode>& nodes() const { return nodes_; }
  const TaxonomyNode& node(int id) const;
  bool IsLeaf(int id) const;
  std::vector<int> Leaves() const;
  const Category& category(int leaf_id) const;
  // Max leaf depth (edges from root).
  int Depth() const;

  bool IsAncestor(int ancestor, int node) const;
  // Edge count of the unique tree path between two nodes.
  int Distance(int a, int b) const;

  nlohmann::json ToJson() const;
  static Taxonomy FromJson(const nlohmann::json& j);

  // Checks: one root, parents precede children, every leaf has a category,
  // no two leaves share (shape, fill, color family).
  void Validate() const;

 private:
  std::vector<TaxonomyNode> nodes_;
  std::vector<std::optional<Category>> categories_;
};

struct TaxonomyConfig {
  // Superordinate shape families: round, boxy, pointed, radial.
  int groups = 4;
  // Mid-level nodes per group, one per fill pattern.
  int fills_per_group = 2;
  // Leaves per mid node, one per color family.
  int colors_per_fill = 4;
  // Leaves per group held out for the out-of-distribution split.
  int held_out_per_group = 2;
  // Radius interval shared by all categories, as a fraction of image size.
  std::array<double, 2> size{0.2, 0.4};
  // Hue half-width around the family center, degrees.
  double hue_spread = 12.0;

  nlohmann::json ToJson() const;
  static TaxonomyConfig FromJson(const nlohmann::json& j);
};

// root -> shape-family groups -> fill nodes -> color leaves. Groups whose
// family has a novel shape kind (ring, star) use it for their held-out
// leaves, so those shapes never appear in training.
Taxonomy BuildTaxonomy(const TaxonomyConfig& config);

// 1 / (1 + d), d = shortest path length in edges. Both ids must be leaves.
double PathSimilarity(const Taxonomy& taxonomy, int leaf_a, int leaf_b);

}  // namespace refgame

#endif  // REFGAME_TAXONOMY_H_
