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

#include "refgame/taxonomy.h"

#include <algorithm>
#include <set>
#include <tuple>

#include "refgame/errors.h"

namespace refgame {

namespace {

struct ShapeFamily {
  const char* name;
  ShapeKind train_shape;
  std::optional<ShapeKind> novel_shape;
};

constexpr int kMaxGroups = 4;
const ShapeFamily kFamilies[kMaxGroups] = {
    {"round", ShapeKind::kCircle, ShapeKind::kRing},
    {"boxy", ShapeKind::kSquare, std::nullopt},
    {"pointed", ShapeKind::kTriangle, std::nullopt},
    {"radial", ShapeKind::kCross, ShapeKind::kStar},
};

constexpr FillPattern kFills[] = {FillPattern::kSolid, FillPattern::kOutline,
                                  FillPattern::kStriped};

const char* const kColorNames[kNumColorFamilies] = {
    "red", "orange", "yellow", "green", "cyan", "blue", "purple", "magenta"};
constexpr double kColorHues[kNumColorFamilies] = {0,   32,  60,  120,
                                                  180, 225, 270, 315};

}  // namespace

std::string_view ShapeKindName(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::kCircle: return "circle";
    case ShapeKind::kSquare: return "square";
    case ShapeKind::kTriangle: return "triangle";
    case ShapeKind::kCross: return "cross";
    case ShapeKind::kStar: return "star";
    case ShapeKind::kRing: return "ring";
  }
  return "?";
}

std::string_view FillPatternName(FillPattern fill) {
  switch (fill) {
    case FillPattern::kSolid: return "solid";
    case FillPattern::kOutline: return "outline";
    case FillPattern::kStriped: return "striped";
  }
  return "?";
}

ShapeKind ParseShapeKind(std::string_view name) {
  for (ShapeKind k : {ShapeKind::kCircle, ShapeKind::kSquare, ShapeKind::kTriangle,
                      ShapeKind::kCross, ShapeKind::kStar, ShapeKind::kRing}) {
    if (ShapeKindName(k) == name) return k;
  }
  throw FormatError("unknown shape kind '" + std::string(name) + "'");
}

FillPattern ParseFillPattern(std::string_view name) {
  for (FillPattern f : kFills) {
    if (FillPatternName(f) == name) return f;
  }
  throw FormatError("unknown fill pattern '" + std::string(name) + "'");
}

std::string_view ColorFamilyName(int family) {
  if (family < 0 || family >= kNumColorFamilies) {
    throw LookupError("color family " + std::to_string(family));
  }
  return kColorNames[family];
}

double ColorFamilyHue(int family) {
  if (family < 0 || family >= kNumColorFamilies) {
    throw LookupError("color family " + std::to_string(family));
  }
  return kColorHues[family];
}

int Taxonomy::AddNode(std::string name, std::optional<int> parent) {
  TaxonomyNode n;
  n.id = static_cast<int>(nodes_.size());
  n.name = std::move(name);
  if (parent) {
    if (*parent < 0 || *parent >= n.id) {
      throw LookupError("parent " + std::to_string(*parent) + " does not exist");
    }
    n.parent = parent;
    n.depth = nodes_[*parent].depth + 1;
    nodes_[*parent].children.push_back(n.id);
  } else if (!nodes_.empty()) {
    throw ConfigError("taxonomy already has a root");
  }
  nodes_.push_back(std::move(n));
  categories_.emplace_back();
  return nodes_.back().id;
}

void Taxonomy::SetCategory(int leaf_id, Category category) {
  node(leaf_id);
  category.leaf_id = leaf_id;
  categories_[leaf_id] = category;
}

const TaxonomyNode& Taxonomy::node(int id) const {
  if (id < 0 || id >= static_cast<int>(nodes_.size())) {
    throw LookupError("unknown taxonomy node " + std::to_string(id));
  }
  return nodes_[id];
}

bool Taxonomy::IsLeaf(int id) const { return node(id).children.empty(); }

std::vector<int> Taxonomy::Leaves() const {
  std::vector<int> out;
  for (const auto& n : nodes_)
    if (n.children.empty()) out.push_back(n.id);
  return out;
}

const Category& Taxonomy::category(int leaf_id) const {
  if (!IsLeaf(leaf_id) || !categories_[leaf_id]) {
    throw LookupError("node " + std::to_string(leaf_id) + " is not a category leaf");
  }
  return *categories_[leaf_id];
}

int Taxonomy::Depth() const {
  int depth = 0;
  for (const auto& n : nodes_) depth = std::max(depth, n.depth);
  return depth;
}

bool Taxonomy::IsAncestor(int ancestor, int id) const {
  std::optional<int> cur = node(id).parent;
  node(ancestor);
  while (cur) {
    if (*cur == ancestor) return true;
    cur = nodes_[*cur].parent;
  }
  return false;
}

int Taxonomy::Distance(int a, int b) const {
  int x = a, y = b;
  int steps = 0;
  // Lift the deeper node, then both, until they meet.
  while (node(x).depth > node(y).depth) { x = *nodes_[x].parent; ++steps; }
  while (node(y).depth > node(x).depth) { y = *nodes_[y].parent; ++steps; }
  while (x != y) {
    x = *nodes_[x].parent;
    y = *nodes_[y].parent;
    steps += 2;
  }
  return steps;
}

void Taxonomy::Validate() const {
  if (nodes_.empty()) throw ConfigError("empty taxonomy");
  std::set<std::tuple<int, int, int>> combos;
  for (const auto& n : nodes_) {
    if (n.id != 0 && !n.parent) throw ConfigError("taxonomy has more than one root");
    if (n.parent && *n.parent >= n.id) throw ConfigError("taxonomy node order broken");
    if (n.children.empty()) {
      const Category& c = category(n.id);
      if (!(c.hue[0] <= c.hue[1]) || !(c.size[0] <= c.size[1]) || c.size[0] <= 0) {
        throw ConfigError("category " + n.name + " has an empty parameter interval");
      }
      auto key = std::make_tuple(static_cast<int>(c.shape),
                                 static_cast<int>(c.fill), c.color_family);
      if (!combos.insert(key).second) {
        throw ConfigError("two leaves share the attributes of " + n.name);
      }
    }
  }
}

nlohmann::json Taxonomy::ToJson() const {
  // Recursive nested-object form.
  auto emit = [this](auto&& self, int id) -> nlohmann::json {
    const TaxonomyNode& n = nodes_[id];
    nlohmann::json j = {{"id", n.id}, {"name", n.name}};
    if (n.children.empty()) {
      const Category& c = category(id);
      j["category"] = {{"shape", ShapeKindName(c.shape)},
                       {"fill", FillPatternName(c.fill)},
                       {"color_family", c.color_family},
                       {"hue", c.hue},
                       {"size", c.size},
                       {"background_family", c.background_family},
                       {"held_out", c.held_out}};
    } else {
      nlohmann::json kids = nlohmann::json::array();
      for (int child : n.children) kids.push_back(self(self, child));
      j["children"] = std::move(kids);
    }
    return j;
  };
  return emit(emit, 0);
}

Taxonomy Taxonomy::FromJson(const nlohmann::json& j) {
  Taxonomy t;
  auto load = [&t](auto&& self, const nlohmann::json& obj,
                   std::optional<int> parent) -> void {
    const int id = t.AddNode(obj.at("name").get<std::string>(), parent);
    if (obj.contains("id") && obj.at("id").get<int>() != id) {
      throw FormatError("taxonomy ids are not in pre-order");
    }
    if (obj.contains("category")) {
      const auto& c = obj.at("category");
      Category cat;
      cat.shape = ParseShapeKind(c.at("shape").get<std::string>());
      cat.fill = ParseFillPattern(c.at("fill").get<std::string>());
      cat.color_family = c.at("color_family").get<int>();
      cat.hue = c.at("hue").get<std::array<double, 2>>();
      cat.size = c.at("size").get<std::array<double, 2>>();
      cat.background_family = c.at("background_family").get<int>();
      cat.held_out = c.value("held_out", false);
      t.SetCategory(id, cat);
    }
    if (obj.contains("children")) {
      for (const auto& child : obj.at("children")) self(self, child, id);
    }
  };
  load(load, j, std::nullopt);
  t.Validate();
  return t;
}

nlohmann::json TaxonomyConfig::ToJson() const {
  return {{"groups", groups},
          {"fills_per_group", fills_per_group},
          {"colors_per_fill", colors_per_fill},
          {"held_out_per_group", held_out_per_group},
          {"size", size},
          {"hue_spread", hue_spread}};
}

TaxonomyConfig TaxonomyConfig::FromJson(const nlohmann::json& j) {
  TaxonomyConfig c;
  c.groups = j.value("groups", c.groups);
  c.fills_per_group = j.value("fills_per_group", c.fills_per_group);
  c.colors_per_fill = j.value("colors_per_fill", c.colors_per_fill);
  c.held_out_per_group = j.value("held_out_per_group", c.held_out_per_group);
  c.size = j.value("size", c.size);
  c.hue_spread = j.value("hue_spread", c.hue_spread);
  return c;
}

Taxonomy BuildTaxonomy(const TaxonomyConfig& config) {
  if (config.groups < 1 || config.groups > kMaxGroups) {
    throw ConfigError("groups must be in [1, 4]");
  }
  if (config.fills_per_group < 1 || config.fills_per_group > 3) {
    throw ConfigError("fills_per_group must be in [1, 3]");
  }
  if (config.colors_per_fill < 1 || config.colors_per_fill > kNumColorFamilies / 2) {
    throw ConfigError("colors_per_fill must be in [1, 4]");
  }
  const int leaves_per_group = config.fills_per_group * config.colors_per_fill;
  if (config.groups * leaves_per_group < 8) {
    throw ConfigError("taxonomy needs at least 8 leaves, config yields " +
                      std::to_string(config.groups * leaves_per_group));
  }
  if (config.held_out_per_group < 0 || config.held_out_per_group >= leaves_per_group) {
    throw ConfigError("held_out_per_group must leave training leaves in every group");
  }
  if (!(config.size[0] > 0 && config.size[0] <= config.size[1] && config.size[1] < 0.5)) {
    throw ConfigError("size interval must satisfy 0 < lo <= hi < 0.5");
  }
  if (config.hue_spread < 0) throw ConfigError("hue_spread must be non-negative");

  Taxonomy t;
  const int root = t.AddNode("entity", std::nullopt);
  for (int g = 0; g < config.groups; ++g) {
    const ShapeFamily& family = kFamilies[g];
    const int group = t.AddNode(family.name, root);
    // Held-out leaves: the last leaf of each fill node, cycling over fills.
    std::set<std::pair<int, int>> held_out;
    for (int h = 0; h < config.held_out_per_group; ++h) {
      const int f = h % config.fills_per_group;
      const int j = config.colors_per_fill - 1 - h / config.fills_per_group;
      held_out.insert({f, j});
    }
    for (int f = 0; f < config.fills_per_group; ++f) {
      const FillPattern fill = kFills[f];
      const int mid = t.AddNode(std::string(family.name) + "/" +
                                    std::string(FillPatternName(fill)),
                                group);
      // Alternate color parity between sibling fill nodes so that each
      // (shape, color) pair occurs under at most one fill in a group.
      const int offset = (g + f) % 2;
      for (int j = 0; j < config.colors_per_fill; ++j) {
        Category c;
        c.fill = fill;
        c.color_family = (offset + 2 * j) % kNumColorFamilies;
        c.held_out = held_out.count({f, j}) > 0;
        c.shape = (c.held_out && family.novel_shape) ? *family.novel_shape
                                                     : family.train_shape;
        const double hue = ColorFamilyHue(c.color_family);
        c.hue = {hue - config.hue_spread, hue + config.hue_spread};
        c.size = config.size;
        c.background_family = j % kNumBackgroundFamilies;
        const std::string name = std::string(ColorFamilyName(c.color_family)) +
                                 "-" + std::string(FillPatternName(fill)) + "-" +
                                 std::string(ShapeKindName(c.shape));
        const int leaf = t.AddNode(name, mid);
        t.SetCategory(leaf, c);
      }
    }
  }
  t.Validate();
  return t;
}

double PathSimilarity(const Taxonomy& taxonomy, int leaf_a, int leaf_b) {
  if (!taxonomy.IsLeaf(leaf_a) || !taxonomy.IsLeaf(leaf_b)) {
    throw LookupError("path similarity is defined on category leaves only");
  }
  return 1.0 / (1.0 + taxonomy.Distance(leaf_a, leaf_b));
}

}  // namespace refgame
