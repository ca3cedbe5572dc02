#include "e2emd/data/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "e2emd/common/error.hpp"

namespace e2emd::data {

using namespace e2emd::nn;

void AugmentConfig::validate() const {
  if (rotation_deg < 0 || shift < 0 || zoom < 0 || flip_probability < 0) {
    throw ConfigError("augmentation parameters must be non-negative");
  }
  if (flip_probability > 1) throw ConfigError("flip probability must be <= 1");
  if (zoom >= 1) throw ConfigError("zoom fraction must be < 1");
}

AugmentParams sample_params(const AugmentConfig& cfg, std::size_t height, std::size_t width, Rng& rng) {
  cfg.validate();
  AugmentParams p;
  p.flip = rng.bernoulli(cfg.flip_probability);
  p.angle_deg = rng.uniform(-cfg.rotation_deg, cfg.rotation_deg);
  p.shift_x = rng.uniform(-cfg.shift, cfg.shift) * static_cast<double>(width);
  p.shift_y = rng.uniform(-cfg.shift, cfg.shift) * static_cast<double>(height);
  p.zoom = rng.uniform(1.0 - cfg.zoom, 1.0 + cfg.zoom);
  return p;
}

Tensor apply_affine(const Tensor& image, const AugmentParams& p) {
  if (image.rank() != 3) throw DimensionError("augment needs C x H x W, got " + shape_string(image.shape()));
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  const double cx = (static_cast<double>(w) - 1) / 2, cy = (static_cast<double>(h) - 1) / 2;
  const double theta = p.angle_deg * std::numbers::pi / 180.0;
  const double cs = std::cos(theta), sn = std::sin(theta);
  const double flip = p.flip ? -1.0 : 1.0;

  // Forward map on offsets from the center (y points down):
  //   q = zoom * (R * F * d + shift),  R = [[cos, sin], [-sin, cos]]
  // so each output pixel samples the input at d = F * R^T * (q / zoom - shift).
  Tensor out({c, h, w});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double qx = (x - cx) / p.zoom - p.shift_x, qy = (y - cy) / p.zoom - p.shift_y;
      const double fx = cx + flip * (cs * qx - sn * qy);
      const double fy = cy + (sn * qx + cs * qy);
      const double x0f = std::floor(fx), y0f = std::floor(fy);
      const double ax = fx - x0f, ay = fy - y0f;
      const long x0 = static_cast<long>(x0f), y0 = static_cast<long>(y0f);
      auto inside = [&](long xx, long yy) { return xx >= 0 && yy >= 0 && xx < static_cast<long>(w) && yy < static_cast<long>(h); };
      for (std::size_t k = 0; k < c; ++k) {
        const float* plane = image.ptr() + k * h * w;
        auto at = [&](long xx, long yy) { return inside(xx, yy) ? static_cast<double>(plane[yy * w + xx]) : 0.0; };
        double v = 0;
        if (ax == 0 && ay == 0) {
          v = at(x0, y0);
        } else {
          v = (at(x0, y0) * (1 - ax) + at(x0 + 1, y0) * ax) * (1 - ay) +
              (at(x0, y0 + 1) * (1 - ax) + at(x0 + 1, y0 + 1) * ax) * ay;
        }
        out[(k * h + y) * w + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return out;
}

}  // namespace e2emd::data
