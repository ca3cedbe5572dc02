#pragma once

#include "e2emd/common/rng.hpp"
#include "e2emd/nn/tensor.hpp"

namespace e2emd::data {

struct AugmentConfig {
  double rotation_deg = 20.0;
  double shift = 0.10;
  double zoom = 0.10;
  double flip_probability = 0.5;

  static AugmentConfig none() { return {0.0, 0.0, 0.0, 0.0}; }
  void validate() const;
};

struct AugmentParams {
  bool flip = false;
  double angle_deg = 0.0;
  double shift_x = 0.0, shift_y = 0.0;  // pixels
  double zoom = 1.0;
};

// Always draws, in order: flip, angle, shift x, shift y, zoom; so the stream
// position after a call does not depend on the config.
AugmentParams sample_params(const AugmentConfig& cfg, std::size_t height, std::size_t width, Rng& rng);

// Flip, then rotate, then translate, then zoom about the image center,
// composed into one affine map and resampled once (bilinear, zero fill),
// clamped to [0, 1]. Positive angles rotate counter-clockwise on screen.
nn::Tensor apply_affine(const nn::Tensor& image, const AugmentParams& p);

inline nn::Tensor augment(const nn::Tensor& image, const AugmentConfig& cfg, Rng& rng) {
  return apply_affine(image, sample_params(cfg, image.dim(1), image.dim(2), rng));
}

}  // namespace e2emd::data
