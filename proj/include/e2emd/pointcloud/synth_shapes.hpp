#pragma once

#include <cstdint>
#include <vector>

#include "e2emd/nn/tensor.hpp"
#include "e2emd/pointcloud/geometry.hpp"

namespace e2emd::pointcloud {

// Gaussian bump on the unit sphere of the shape's normalized frame.
struct Bump {
  Vec3 direction;  // unit
  double amplitude;
  double width;  // angular, radians
};

// Star-shaped "cell": points p with |q| <= 1 + sum of bumps(q / |q|), where
// q = diag(1/axes) * R^T * p.
struct CellShape {
  Vec3 axes{1, 1, 1};
  Mat3 rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};
  std::vector<Bump> bumps;

  double radial_limit(const Vec3& unit_q) const;
};

inline CellShape unit_sphere() { return {}; }

// Disc-like ellipsoid (axes ~[0.6, 1] x [0.6, 1] x [0.35, 0.7]) with a
// random orientation and up to three bumps.
CellShape random_cell_shape(std::uint64_t seed);

// Ray-casts the shape into every pose: exact quadric intersection without
// bumps, ray marching plus bisection (to 1e-9) with them.
DepthMapSet render_depths(const CellShape& shape, const std::vector<ViewPose>& poses);

// The generator's 2D input: a 3 x size x size depth-shaded view from the
// camera at (0, 0, -radius), pink on black like a stained cell.
nn::Tensor render_input_image(const CellShape& shape, std::size_t size, double radius);

// n points uniformly on the unit sphere.
PointCloud sample_unit_sphere(std::size_t n, std::uint64_t seed);

// n evenly spread points on the unit sphere (stratified, equal area per point).
PointCloud even_unit_sphere(std::size_t n);

}  // namespace e2emd::pointcloud
