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

#include "refgame/image.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "refgame/checkpoint.h"
#include "refgame/errors.h"

namespace refgame {

namespace {

constexpr double kPi = std::numbers::pi;

// Membership of a point given in shape-local coordinates, where the shape's
// outer radius is 1.
bool InsideShape(ShapeKind kind, double u, double v) {
  switch (kind) {
    case ShapeKind::kCircle:
      return u * u + v * v <= 1.0;
    case ShapeKind::kRing: {
      const double r2 = u * u + v * v;
      return r2 <= 1.0 && r2 >= 0.25;
    }
    case ShapeKind::kSquare:
      return std::abs(u) <= 0.8 && std::abs(v) <= 0.8;
    case ShapeKind::kTriangle: {
      const double s3 = std::sqrt(3.0);
      return v >= -0.5 && s3 * u + v <= 1.0 && -s3 * u + v <= 1.0;
    }
    case ShapeKind::kCross:
      return (std::abs(u) <= 0.3 && std::abs(v) <= 0.95) ||
             (std::abs(v) <= 0.3 && std::abs(u) <= 0.95);
    case ShapeKind::kStar: {
      const double rho = std::sqrt(u * u + v * v);
      if (rho > 1.0) return false;
      double phi = std::atan2(u, v);  // spike at the top
      const double sector = 2.0 * kPi / 5.0;
      phi = std::fmod(phi + 2.0 * kPi, sector);
      const double t = std::abs(phi - sector / 2.0) / (sector / 2.0);
      const double inner = 0.42;
      return rho <= inner + (1.0 - inner) * t * t;
    }
  }
  return false;
}

// 0 = background, 1 = primary color, 2 = secondary (stripe) color.
int Paint(const Category& c, double u, double v, double stripe_angle) {
  if (!InsideShape(c.shape, u, v)) return 0;
  switch (c.fill) {
    case FillPattern::kSolid:
      return 1;
    case FillPattern::kOutline:
      return InsideShape(c.shape, u / 0.6, v / 0.6) ? 0 : 1;
    case FillPattern::kStriped: {
      const double s = u * std::cos(stripe_angle) + v * std::sin(stripe_angle);
      const long band = static_cast<long>(std::floor(s / 0.35));
      return band % 2 == 0 ? 1 : 2;
    }
  }
  return 1;
}

}  // namespace

std::string_view SplitName(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kOod: return "ood";
    case Split::kBlob: return "blob";
  }
  return "?";
}

Split ParseSplit(std::string_view name) {
  for (Split s : {Split::kTrain, Split::kVal, Split::kOod, Split::kBlob}) {
    if (SplitName(s) == name) return s;
  }
  throw ConfigError("unknown split '" + std::string(name) + "'");
}

nlohmann::json RenderConfig::ToJson() const {
  return {{"image_size", image_size},
          {"hue_shift", hue_shift},
          {"background_shift", background_shift},
          {"noise", noise}};
}

RenderConfig RenderConfig::FromJson(const nlohmann::json& j) {
  RenderConfig c;
  c.image_size = j.value("image_size", c.image_size);
  c.hue_shift = j.value("hue_shift", c.hue_shift);
  c.background_shift = j.value("background_shift", c.background_shift);
  c.noise = j.value("noise", c.noise);
  return c;
}

void HsvToRgb(double h, double s, double v, double rgb[3]) {
  h = std::fmod(h, 360.0);
  if (h < 0) h += 360.0;
  const double c = v * s;
  const double hp = h / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp) % 6) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  const double m = v - c;
  rgb[0] = r + m;
  rgb[1] = g + m;
  rgb[2] = b + m;
}

void RgbToHsv(const double rgb[3], double& h, double& s, double& v) {
  const double mx = std::max({rgb[0], rgb[1], rgb[2]});
  const double mn = std::min({rgb[0], rgb[1], rgb[2]});
  const double d = mx - mn;
  v = mx;
  s = mx > 0 ? d / mx : 0.0;
  if (d <= 0) {
    h = 0.0;
  } else if (mx == rgb[0]) {
    h = 60.0 * std::fmod((rgb[1] - rgb[2]) / d, 6.0);
  } else if (mx == rgb[1]) {
    h = 60.0 * ((rgb[2] - rgb[0]) / d + 2.0);
  } else {
    h = 60.0 * ((rgb[0] - rgb[1]) / d + 4.0);
  }
  if (h < 0) h += 360.0;
}

ImageSample RenderSample(const Category& category, const RenderConfig& config,
                         Rng& rng) {
  const std::size_t n = config.image_size;
  if (n < 16) throw ConfigError("image size must be at least 16");
  const double size = static_cast<double>(n);

  // Object pose and color.
  const double radius = rng.Uniform(category.size[0], category.size[1]) * size;
  const double margin = std::min(radius * 0.8, size / 2.0);
  const double cx = rng.Uniform(margin, size - margin);
  const double cy = rng.Uniform(margin, size - margin);
  const double angle = rng.Uniform(0.0, 2.0 * kPi);
  const double stripe_angle = rng.Uniform(0.0, kPi);
  const double hue = rng.Uniform(category.hue[0], category.hue[1]) + config.hue_shift;
  double fg[3], fg2[3];
  HsvToRgb(hue, rng.Uniform(0.65, 1.0), rng.Uniform(0.7, 1.0), fg);
  for (int c = 0; c < 3; ++c) fg2[c] = fg[c] * 0.35;

  // Background: low-saturation tint with a linear gradient.
  const bool dark = category.background_family == 0;
  const double bg_value = std::clamp(
      (dark ? rng.Uniform(0.05, 0.3) : rng.Uniform(0.6, 0.9)) + config.background_shift,
      0.0, 1.0);
  double bg[3];
  HsvToRgb(rng.Uniform(0.0, 360.0), rng.Uniform(0.0, 0.3), bg_value, bg);
  const double grad_angle = rng.Uniform(0.0, 2.0 * kPi);
  const double grad_amp = rng.Uniform(0.0, 0.15);
  const double gx = std::cos(grad_angle), gy = std::sin(grad_angle);

  ImageSample sample;
  sample.category = category.leaf_id;
  sample.image = Image(3, n, n);
  const double ca = std::cos(angle), sa = std::sin(angle);
  constexpr int kSuper = 2;  // supersampling per axis
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      const double shade =
          grad_amp * ((x + 0.5) / size - 0.5) * gx + grad_amp * ((y + 0.5) / size - 0.5) * gy;
      double acc[3] = {0, 0, 0};
      for (int sy = 0; sy < kSuper; ++sy) {
        for (int sx = 0; sx < kSuper; ++sx) {
          const double px = x + (sx + 0.5) / kSuper - cx;
          const double py = y + (sy + 0.5) / kSuper - cy;
          const double u = (ca * px + sa * py) / radius;
          const double v = (-sa * px + ca * py) / radius;
          const int paint = Paint(category, u, v, stripe_angle);
          for (int c = 0; c < 3; ++c) {
            acc[c] += paint == 1 ? fg[c] : paint == 2 ? fg2[c] : bg[c] + shade;
          }
        }
      }
      for (std::size_t c = 0; c < 3; ++c) {
        double value = acc[c] / (kSuper * kSuper);
        if (config.noise > 0) value += config.noise * rng.Normal();
        sample.image.at(c, y, x) = std::clamp(value, 0.0, 1.0);
      }
    }
  }
  return sample;
}

ImageSample GenerateBlob(Rng& rng, std::size_t size) {
  if (size < 16) throw ConfigError("image size must be at least 16");
  ImageSample sample;
  sample.category = kBlobCategory;
  sample.split = Split::kBlob;
  sample.image = Image(3, size, size);
  for (double& p : sample.image.pixels) p = rng.Normal();
  return sample;
}

std::uint64_t ImageDigest(const Image& image, std::uint64_t seed) {
  return Fnv1a64(image.pixels.data(), image.pixels.size(), seed);
}

}  // namespace refgame
