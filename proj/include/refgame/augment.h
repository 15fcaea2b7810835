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

#ifndef REFGAME_AUGMENT_H_
#define REFGAME_AUGMENT_H_

#include <array>

#include "json.hpp"
#include "refgame/image.h"
#include "refgame/rng.h"

namespace refgame {

struct AugmentConfig {
  bool crop = true;
  std::array<double, 2> crop_scale{0.5, 1.0};  // area fraction
  std::array<double, 2> crop_aspect{3.0 / 4.0, 4.0 / 3.0};

  bool color = true;
  double color_probability = 0.8;
  double brightness = 0.4;  // factor drawn from [1 - b, 1 + b]
  double contrast = 0.4;
  double saturation = 0.4;
  double hue = 0.1;  // rotation drawn from [-hue, hue] turns

  bool blur = true;
  double blur_probability = 0.5;
  std::array<double, 2> blur_sigma{0.1, 2.0};

  void Validate() const;
  nlohmann::json ToJson() const;
  static AugmentConfig FromJson(const nlohmann::json& j);
  static AugmentConfig Disabled();
};

// Random resized crop, color jitter, Gaussian blur, in that order; output
// clamped to [0, 1] with the input's dimensions.
Image Augment(const Image& image, const AugmentConfig& config, Rng& rng);
// Same, keeping the sample's metadata. Blobs are rejected.
ImageSample Augment(const ImageSample& sample, const AugmentConfig& config,
                    Rng& rng);

// Individual transforms, exposed for tests.
Image CropResize(const Image& image, double x0, double y0, double crop_w,
                 double crop_h);
Image GaussianBlur(const Image& image, double sigma);

}  // namespace refgame

#endif  // REFGAME_AUGMENT_H_
