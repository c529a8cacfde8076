#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cardiomm/cohort/types.hpp"
#include "cardiomm/core/common.hpp"
#include "cardiomm/core/error.hpp"
#include "cardiomm/core/rng.hpp"

namespace cardiomm {

struct ImageAugmentConfig {
  double hflip_prob = 0.5;
  double max_rotation_deg = 45.0;
  double brightness = 0.4;
  double contrast = 0.4;
  double saturation = 0.4;
  double crop_scale_min = 0.7;  // random resized crop, area fraction
  double crop_scale_max = 1.0;
};

namespace detail {

template <class Getter>
inline float bilinear_or_zero(Getter&& at, Index h, Index w, double y, double x) {
  if (y < 0 || x < 0 || y > static_cast<double>(h - 1) ||
      x > static_cast<double>(w - 1))
    return 0.0f;
  Index y0 = std::min<Index>(static_cast<Index>(y), h - 2 >= 0 ? h - 2 : 0);
  Index x0 = std::min<Index>(static_cast<Index>(x), w - 2 >= 0 ? w - 2 : 0);
  double fy = y - static_cast<double>(y0), fx = x - static_cast<double>(x0);
  double v00 = at(y0, x0), v01 = at(y0, x0 + 1);
  double v10 = at(y0 + 1, x0), v11 = at(y0 + 1, x0 + 1);
  return static_cast<float>((1 - fy) * ((1 - fx) * v00 + fx * v01) +
                            fy * ((1 - fx) * v10 + fx * v11));
}

}  // namespace detail

/// Stochastic image augmentation for a 3-phase stack: horizontal flip,
/// rotation with zero fill, brightness/contrast/saturation jitter, and a
/// random resized crop back to (H, W). Geometric decisions and jitter
/// factors are drawn once and applied identically to all three phases.
/// Values are clamped to [0,1]. With flip prob 0, rotation 0, strengths 0
/// and crop scale (1,1) this is the exact identity.
inline CmrPhaseStack image_augment(const CmrPhaseStack& img,
                                   const ImageAugmentConfig& cfg, Rng& rng) {
  const Index h = img.height, w = img.width;
  check_arg(h >= 8 && w >= 8, "image_augment: image must be at least 8x8");
  check_arg(cfg.hflip_prob >= 0 && cfg.hflip_prob <= 1,
            "image_augment: flip probability must lie in [0,1]");
  check_arg(cfg.max_rotation_deg >= 0 && cfg.max_rotation_deg <= 180,
            "image_augment: rotation must lie in [0,180] degrees");
  check_arg(cfg.crop_scale_min > 0 && cfg.crop_scale_min <= cfg.crop_scale_max &&
                cfg.crop_scale_max <= 1.0,
            "image_augment: crop scale range must satisfy 0 < min <= max <= 1");

  CmrPhaseStack out = img;

  if (rng.bernoulli(cfg.hflip_prob)) {
    for (Index p = 0; p < 3; ++p)
      for (Index i = 0; i < h; ++i)
        for (Index j = 0; 2 * j < w; ++j)
          std::swap(out.phases(p, i * w + j), out.phases(p, i * w + (w - 1 - j)));
  }

  if (cfg.max_rotation_deg > 0) {
    double theta = rng.uniform(-cfg.max_rotation_deg, cfg.max_rotation_deg) *
                   std::numbers::pi / 180.0;
    double c = std::cos(theta), s = std::sin(theta);
    double cy = 0.5 * static_cast<double>(h - 1), cx = 0.5 * static_cast<double>(w - 1);
    MatF rotated(3, h * w);
    for (Index p = 0; p < 3; ++p) {
      auto at = [&](Index i, Index j) { return out.phases(p, i * w + j); };
      for (Index i = 0; i < h; ++i)
        for (Index j = 0; j < w; ++j) {
          // inverse-rotate the output pixel into source coordinates
          double dy = static_cast<double>(i) - cy, dx = static_cast<double>(j) - cx;
          double sy = c * dy + s * dx + cy;
          double sx = -s * dy + c * dx + cx;
          rotated(p, i * w + j) = detail::bilinear_or_zero(at, h, w, sy, sx);
        }
    }
    out.phases = std::move(rotated);
  }

  if (cfg.brightness > 0) {
    float f = static_cast<float>(rng.uniform(1.0 - cfg.brightness, 1.0 + cfg.brightness));
    out.phases *= f;
  }
  if (cfg.contrast > 0) {
    float f = static_cast<float>(rng.uniform(1.0 - cfg.contrast, 1.0 + cfg.contrast));
    for (Index p = 0; p < 3; ++p) {
      float mean = out.phases.row(p).mean();
      out.phases.row(p) = (out.phases.row(p).array() - mean) * f + mean;
    }
  }
  if (cfg.saturation > 0) {
    float f = static_cast<float>(rng.uniform(1.0 - cfg.saturation, 1.0 + cfg.saturation));
    for (Index px = 0; px < h * w; ++px) {
      float gray = (out.phases(0, px) + out.phases(1, px) + out.phases(2, px)) / 3.0f;
      for (Index p = 0; p < 3; ++p)
        out.phases(p, px) = gray + (out.phases(p, px) - gray) * f;
    }
  }

  if (cfg.crop_scale_min < 1.0 || cfg.crop_scale_max < 1.0) {
    double scale = rng.uniform(cfg.crop_scale_min, cfg.crop_scale_max);
    double side = std::sqrt(scale);
    Index ch = std::max<Index>(Index(2), static_cast<Index>(std::llround(side * h)));
    Index cw = std::max<Index>(Index(2), static_cast<Index>(std::llround(side * w)));
    ch = std::min(ch, h);
    cw = std::min(cw, w);
    Index top = static_cast<Index>(rng.uniform_int(static_cast<std::uint64_t>(h - ch + 1)));
    Index left = static_cast<Index>(rng.uniform_int(static_cast<std::uint64_t>(w - cw + 1)));
    if (ch != h || cw != w) {
      MatF cropped(3, h * w);
      double step_y = static_cast<double>(ch - 1) / static_cast<double>(h - 1);
      double step_x = static_cast<double>(cw - 1) / static_cast<double>(w - 1);
      for (Index p = 0; p < 3; ++p) {
        auto at = [&](Index i, Index j) {
          return out.phases(p, (top + i) * w + (left + j));
        };
        for (Index i = 0; i < h; ++i)
          for (Index j = 0; j < w; ++j)
            cropped(p, i * w + j) = detail::bilinear_or_zero(
                at, ch, cw, step_y * static_cast<double>(i),
                step_x * static_cast<double>(j));
      }
      out.phases = std::move(cropped);
    }
  }

  out.phases = out.phases.cwiseMax(0.0f).cwiseMin(1.0f);
  return out;
}

}  // namespace cardiomm
