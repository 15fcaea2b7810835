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

#include "refgame/augment.h"

#include <algorithm>
#include <cmath>

#include "refgame/errors.h"

namespace refgame {

namespace {

void ClampUnit(Image& image) {
  for (double& p : image.pixels) p = std::clamp(p, 0.0, 1.0);
}

double Luma(const Image& img, std::size_t y, std::size_t x) {
  return 0.299 * img.at(0, y, x) + 0.587 * img.at(1, y, x) + 0.114 * img.at(2, y, x);
}

void ColorJitter(Image& img, const AugmentConfig& cfg, Rng& rng) {
  const double brightness = rng.Uniform(1.0 - cfg.brightness, 1.0 + cfg.brightness);
  const double contrast = rng.Uniform(1.0 - cfg.contrast, 1.0 + cfg.contrast);
  const double saturation = rng.Uniform(1.0 - cfg.saturation, 1.0 + cfg.saturation);
  const double hue_turns = rng.Uniform(-cfg.hue, cfg.hue);

  for (double& p : img.pixels) p *= brightness;
  ClampUnit(img);

  double mean = 0.0;
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x) mean += Luma(img, y, x);
  mean /= static_cast<double>(img.height * img.width);
  for (double& p : img.pixels) p = (p - mean) * contrast + mean;
  ClampUnit(img);

  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x) {
      const double gray = Luma(img, y, x);
      for (std::size_t c = 0; c < 3; ++c)
        img.at(c, y, x) = (img.at(c, y, x) - gray) * saturation + gray;
    }
  ClampUnit(img);

  if (hue_turns != 0.0) {
    for (std::size_t y = 0; y < img.height; ++y)
      for (std::size_t x = 0; x < img.width; ++x) {
        double rgb[3] = {img.at(0, y, x), img.at(1, y, x), img.at(2, y, x)};
        double h, s, v;
        RgbToHsv(rgb, h, s, v);
        HsvToRgb(h + 360.0 * hue_turns, s, v, rgb);
        for (std::size_t c = 0; c < 3; ++c) img.at(c, y, x) = rgb[c];
      }
  }
}

}  // namespace

void AugmentConfig::Validate() const {
  if (!(crop_scale[0] > 0 && crop_scale[0] <= crop_scale[1] && crop_scale[1] <= 1)) {
    throw ConfigError("crop scale interval must lie in (0, 1]");
  }
  if (!(crop_aspect[0] > 0 && crop_aspect[0] <= crop_aspect[1])) {
    throw ConfigError("crop aspect interval must be positive and ordered");
  }
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(color_probability) || !prob(blur_probability)) {
    throw ConfigError("augmentation probabilities must lie in [0, 1]");
  }
  if (brightness < 0 || brightness > 1 || contrast < 0 || contrast > 1 ||
      saturation < 0 || saturation > 1 || hue < 0 || hue > 0.5) {
    throw ConfigError("color jitter strengths out of range");
  }
  if (!(blur_sigma[0] >= 0 && blur_sigma[0] <= blur_sigma[1])) {
    throw ConfigError("blur sigma interval must be non-negative and ordered");
  }
}

nlohmann::json AugmentConfig::ToJson() const {
  return {{"crop", crop},
          {"crop_scale", crop_scale},
          {"crop_aspect", crop_aspect},
          {"color", color},
          {"color_probability", color_probability},
          {"brightness", brightness},
          {"contrast", contrast},
          {"saturation", saturation},
          {"hue", hue},
          {"blur", blur},
          {"blur_probability", blur_probability},
          {"blur_sigma", blur_sigma}};
}

AugmentConfig AugmentConfig::FromJson(const nlohmann::json& j) {
  AugmentConfig c;
  c.crop = j.value("crop", c.crop);
  c.crop_scale = j.value("crop_scale", c.crop_scale);
  c.crop_aspect = j.value("crop_aspect", c.crop_aspect);
  c.color = j.value("color", c.color);
  c.color_probability = j.value("color_probability", c.color_probability);
  c.brightness = j.value("brightness", c.brightness);
  c.contrast = j.value("contrast", c.contrast);
  c.saturation = j.value("saturation", c.saturation);
  c.hue = j.value("hue", c.hue);
  c.blur = j.value("blur", c.blur);
  c.blur_probability = j.value("blur_probability", c.blur_probability);
  c.blur_sigma = j.value("blur_sigma", c.blur_sigma);
  c.Validate();
  return c;
}

AugmentConfig AugmentConfig::Disabled() {
  AugmentConfig c;
  c.crop = c.color = c.blur = false;
  return c;
}

Image CropResize(const Image& image, double x0, double y0, double crop_w,
                 double crop_h) {
  Image out(image.channels, image.height, image.width);
  const double sx = crop_w / static_cast<double>(image.width);
  const double sy = crop_h / static_cast<double>(image.height);
  const double max_x = static_cast<double>(image.width - 1);
  const double max_y = static_cast<double>(image.height - 1);
  for (std::size_t y = 0; y < image.height; ++y) {
    const double src_y = std::clamp(y0 + (y + 0.5) * sy - 0.5, 0.0, max_y);
    const std::size_t y_lo = static_cast<std::size_t>(src_y);
    const std::size_t y_hi = std::min(y_lo + 1, image.height - 1);
    const double fy = src_y - static_cast<double>(y_lo);
    for (std::size_t x = 0; x < image.width; ++x) {
      const double src_x = std::clamp(x0 + (x + 0.5) * sx - 0.5, 0.0, max_x);
      const std::size_t x_lo = static_cast<std::size_t>(src_x);
      const std::size_t x_hi = std::min(x_lo + 1, image.width - 1);
      const double fx = src_x - static_cast<double>(x_lo);
      for (std::size_t c = 0; c < image.channels; ++c) {
        const double top = image.at(c, y_lo, x_lo) * (1.0 - fx) + image.at(c, y_lo, x_hi) * fx;
        const double bottom = image.at(c, y_hi, x_lo) * (1.0 - fx) + image.at(c, y_hi, x_hi) * fx;
        out.at(c, y, x) = top * (1.0 - fy) + bottom * fy;
      }
    }
  }
  return out;
}

Image GaussianBlur(const Image& image, double sigma) {
  if (sigma <= 0) return image;
  const long radius = std::max<long>(1, static_cast<long>(std::ceil(3.0 * sigma)));
  std::vector<double> weights(2 * radius + 1);
  double total = 0.0;
  for (long k = -radius; k <= radius; ++k) {
    weights[k + radius] = std::exp(-0.5 * (k * k) / (sigma * sigma));
    total += weights[k + radius];
  }
  for (double& w : weights) w /= total;

  // Separable pass with edge replication.
  const long h = static_cast<long>(image.height), w = static_cast<long>(image.width);
  Image tmp(image.channels, image.height, image.width);
  Image out(image.channels, image.height, image.width);
  for (std::size_t c = 0; c < image.channels; ++c) {
    for (long y = 0; y < h; ++y)
      for (long x = 0; x < w; ++x) {
        double acc = 0.0;
        for (long k = -radius; k <= radius; ++k) {
          const long xx = std::clamp(x + k, 0L, w - 1);
          acc += weights[k + radius] * image.at(c, y, xx);
        }
        tmp.at(c, y, x) = acc;
      }
    for (long y = 0; y < h; ++y)
      for (long x = 0; x < w; ++x) {
        double acc = 0.0;
        for (long k = -radius; k <= radius; ++k) {
          const long yy = std::clamp(y + k, 0L, h - 1);
          acc += weights[k + radius] * tmp.at(c, yy, x);
        }
        out.at(c, y, x) = acc;
      }
  }
  return out;
}

Image Augment(const Image& image, const AugmentConfig& config, Rng& rng) {
  Image out = image;
  if (config.crop) {
    const double width = static_cast<double>(image.width);
    const double height = static_cast<double>(image.height);
    const double area = width * height;
    double cw = width, ch = height, x0 = 0.0, y0 = 0.0;
    bool found = false;
    for (int attempt = 0; attempt < 10 && !found; ++attempt) {
      const double scale = rng.Uniform(config.crop_scale[0], config.crop_scale[1]);
      const double log_aspect = rng.Uniform(std::log(config.crop_aspect[0]),
                                            std::log(config.crop_aspect[1]));
      const double aspect = std::exp(log_aspect);
      const double w = std::round(std::sqrt(area * scale * aspect));
      const double h = std::round(std::sqrt(area * scale / aspect));
      if (w >= 1 && h >= 1 && w <= width && h <= height) {
        cw = w;
        ch = h;
        x0 = static_cast<double>(rng.UniformInt(static_cast<std::size_t>(width - w) + 1));
        y0 = static_cast<double>(rng.UniformInt(static_cast<std::size_t>(height - h) + 1));
        found = true;
      }
    }
    out = CropResize(out, x0, y0, cw, ch);
  }
  if (config.color && rng.Bernoulli(config.color_probability)) {
    ColorJitter(out, config, rng);
  }
  if (config.blur && rng.Bernoulli(config.blur_probability)) {
    out = GaussianBlur(out, rng.Uniform(config.blur_sigma[0], config.blur_sigma[1]));
  }
  ClampUnit(out);
  return out;
}

ImageSample Augment(const ImageSample& sample, const AugmentConfig& config,
                    Rng& rng) {
  if (sample.split == Split::kBlob || sample.category == kBlobCategory) {
    throw InputError("augmentation applies to rendered samples, not blobs");
  }
  ImageSample out;
  out.image = Augment(sample.image, config, rng);
  out.category = sample.category;
  out.sample_id = sample.sample_id;
  out.split = sample.split;
  return out;
}

}  // namespace refgame
