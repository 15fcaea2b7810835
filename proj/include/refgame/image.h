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

#ifndef REFGAME_IMAGE_H_
#define REFGAME_IMAGE_H_

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "refgame/rng.h"
#include "refgame/taxonomy.h"

namespace refgame {

// Planar C x H x W image.
struct Image {
  std::size_t channels = 3;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(std::size_t c, std::size_t h, std::size_t w)
      : channels(c), height(h), width(w), pixels(c * h * w, 0.0) {}

  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return pixels[(c * height + y) * width + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return pixels[(c * height + y) * width + x];
  }
  std::size_t size() const { return pixels.size(); }
};

enum class Split { kTrain, kVal, kOod, kBlob };
std::string_view SplitName(Split split);
Split ParseSplit(std::string_view name);

// Category id carried by Gaussian blobs, which depict nothing.
inline constexpr int kBlobCategory = -1;

struct ImageSample {
  Image image;
  int category = kBlobCategory;
  std::uint64_t sample_id = 0;
  Split split = Split::kTrain;
};

struct RenderConfig {
  std::size_t image_size = 32;
  // Global offsets used to build shifted worlds for transfer probing.
  double hue_shift = 0.0;         // degrees
  double background_shift = 0.0;  // added to background value
  // Per-pixel Gaussian texture noise.
  double noise = 0.02;

  nlohmann::json ToJson() const;
  static RenderConfig FromJson(const nlohmann::json& j);
};

// Draws the category's shape with jittered position, rotation, size and hue
// on a jittered background. Deterministic in the rng state; all pixels in
// [0, 1].
ImageSample RenderSample(const Category& category, const RenderConfig& config,
                         Rng& rng);

// Every pixel i.i.d. N(0, 1).
ImageSample GenerateBlob(Rng& rng, std::size_t size);

// HSV (h in degrees, s and v in [0, 1]) to RGB in [0, 1].
void HsvToRgb(double h, double s, double v, double rgb[3]);
void RgbToHsv(const double rgb[3], double& h, double& s, double& v);

std::uint64_t ImageDigest(const Image& image, std::uint64_t seed);

}  // namespace refgame

#endif  // REFGAME_IMAGE_H_
