#include "e2emd/pointcloud/synth_shapes.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "e2emd/common/error.hpp"
#include "e2emd/common/rng.hpp"

namespace e2emd::pointcloud {

using nn::Tensor;

double CellShape::radial_limit(const Vec3& u) const {
  double r = 1;
  for (const auto& b : bumps) {
    const double c = std::clamp(u[0] * b.direction[0] + u[1] * b.direction[1] + u[2] * b.direction[2], -1.0, 1.0);
    const double angle = std::acos(c);
    r += b.amplitude * std::exp(-(angle * angle) / (b.width * b.width));
  }
  return r;
}

namespace {

Vec3 unit_normal(Rng& rng) {
  for (;;) {
    const Vec3 v{rng.normal(), rng.normal(), rng.normal()};
    const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (n > 1e-9) return {v[0] / n, v[1] / n, v[2] / n};
  }
}

// Ray in the shape's normalized frame: q(s) = q0 + s q1, s = camera depth.
struct Ray {
  Vec3 q0, q1;
  Vec3 at(double s) const { return {q0[0] + s * q1[0], q0[1] + s * q1[1], q0[2] + s * q1[2]}; }
};

// Roots of |q(s)|^2 = radius^2, or false when the ray misses.
bool sphere_hits(const Ray& ray, double radius, double& s0, double& s1) {
  const double a = ray.q1[0] * ray.q1[0] + ray.q1[1] * ray.q1[1] + ray.q1[2] * ray.q1[2];
  const double b = 2 * (ray.q0[0] * ray.q1[0] + ray.q0[1] * ray.q1[1] + ray.q0[2] * ray.q1[2]);
  const double c = ray.q0[0] * ray.q0[0] + ray.q0[1] * ray.q0[1] + ray.q0[2] * ray.q0[2] - radius * radius;
  const double disc = b * b - 4 * a * c;
  if (disc < 0) return false;
  const double sq = std::sqrt(disc);
  // Numerically stable pair of roots.
  const double q = b >= 0 ? -0.5 * (b + sq) : -0.5 * (b - sq);
  s0 = q / a;
  s1 = q != 0 ? c / q : s0;
  if (s0 > s1) std::swap(s0, s1);
  return true;
}

bool inside(const CellShape& shape, const Vec3& q) {
  const double n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2]);
  if (n < 1e-12) return true;
  return n <= shape.radial_limit({q[0] / n, q[1] / n, q[2] / n});
}

// First surface depth along the ray, or a negative value for a miss.
double cast(const CellShape& shape, const Ray& ray) {
  double rmax = 1;
  for (const auto& b : shape.bumps) rmax += b.amplitude;
  double s0 = 0, s1 = 0;
  if (!sphere_hits(ray, shape.bumps.empty() ? 1.0 : rmax, s0, s1) || s1 <= 0) return -1;
  if (shape.bumps.empty()) return s0 > 0 ? s0 : -1;
  constexpr int kSteps = 400;
  const double step = (s1 - s0) / kSteps;
  double prev = s0;
  for (int i = 1; i <= kSteps; ++i) {
    const double s = s0 + step * i;
    if (inside(shape, ray.at(s))) {
      double lo = prev, hi = s;
      while (hi - lo > 1e-9) {
        const double mid = 0.5 * (lo + hi);
        (inside(shape, ray.at(mid)) ? hi : lo) = mid;
      }
      return hi;
    }
    prev = s;
  }
  return -1;
}

Ray make_ray(const CellShape& shape, const ViewPose& pose, double u, double v) {
  const Mat3 rt = transpose(pose.rotation);
  const Vec3 c = pose.camera_center();
  const Vec3 d = apply(rt, {(u - pose.cx) / pose.focal, (v - pose.cy) / pose.focal, 1.0});
  const Mat3 st = transpose(shape.rotation);
  Vec3 q0 = apply(st, c), q1 = apply(st, d);
  for (int k = 0; k < 3; ++k) {
    q0[k] /= shape.axes[k];
    q1[k] /= shape.axes[k];
  }
  return {q0, q1};
}

}  // namespace

CellShape random_cell_shape(std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x54a9e));
  CellShape s;
  s.axes = {rng.uniform(0.6, 1.0), rng.uniform(0.6, 1.0), rng.uniform(0.35, 0.7)};
  // Uniform random rotation from a unit quaternion.
  const double u1 = rng.uniform(), u2 = rng.uniform(), u3 = rng.uniform();
  const double a = std::sqrt(1 - u1), b = std::sqrt(u1);
  const double w = a * std::sin(2 * std::numbers::pi * u2), x = a * std::cos(2 * std::numbers::pi * u2);
  const double y = b * std::sin(2 * std::numbers::pi * u3), z = b * std::cos(2 * std::numbers::pi * u3);
  s.rotation = {1 - 2 * (y * y + z * z), 2 * (x * y - z * w),     2 * (x * z + y * w),
                2 * (x * y + z * w),     1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
                2 * (x * z - y * w),     2 * (y * z + x * w),     1 - 2 * (x * x + y * y)};
  const std::size_t bumps = rng.below(4);
  for (std::size_t i = 0; i < bumps; ++i) {
    const Vec3 d = unit_normal(rng);
    s.bumps.push_back({d, rng.uniform(0.05, 0.15), rng.uniform(0.3, 0.6)});
  }
  return s;
}

DepthMapSet render_depths(const CellShape& shape, const std::vector<ViewPose>& poses) {
  if (poses.empty()) throw ConfigError("need at least one pose");
  DepthMapSet set;
  set.poses = poses;
  set.height = poses[0].height;
  set.width = poses[0].width;
  const std::size_t plane = set.height * set.width;
  set.depth.assign(poses.size() * plane, 0.0f);
  set.mask.assign(poses.size() * plane, 0);
#pragma omp parallel for schedule(static)
  for (std::size_t v = 0; v < poses.size(); ++v) {
    for (std::size_t y = 0; y < set.height; ++y) {
      for (std::size_t x = 0; x < set.width; ++x) {
        const double d = cast(shape, make_ray(shape, poses[v], x + 0.5, y + 0.5));
        if (d > 0) {
          set.depth[v * plane + y * set.width + x] = static_cast<float>(d);
          set.mask[v * plane + y * set.width + x] = 1;
        }
      }
    }
  }
  set.validate();
  return set;
}

Tensor render_input_image(const CellShape& shape, std::size_t size, double radius) {
  const ViewPose pose = make_fixed_poses(1, radius, size, size)[0];
  const DepthMapSet front = render_depths(shape, {pose});
  Tensor img({3, size, size});
  const double rgb[3] = {0.85, 0.55, 0.65};
  for (std::size_t i = 0; i < size * size; ++i) {
    if (!front.mask[i]) continue;
    // Nearer surface is brighter; depths span roughly radius -+ 1.2.
    const double shade = std::clamp(0.35 + 0.65 * (radius + 1.2 - front.depth[i]) / 2.4, 0.0, 1.0);
    for (std::size_t c = 0; c < 3; ++c) img[c * size * size + i] = static_cast<float>(rgb[c] * shade);
  }
  return img;
}

PointCloud sample_unit_sphere(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  PointCloud pc;
  pc.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 v = unit_normal(rng);
    pc.points.push_back({static_cast<float>(v[0]), static_cast<float>(v[1]), static_cast<float>(v[2])});
  }
  return pc;
}

PointCloud even_unit_sphere(std::size_t n) {
  PointCloud pc;
  pc.points.reserve(n);
  for (const auto& v : fibonacci_directions(n)) {
    pc.points.push_back({static_cast<float>(v[0]), static_cast<float>(v[1]), static_cast<float>(v[2])});
  }
  return pc;
}

}  // namespace e2emd::pointcloud
