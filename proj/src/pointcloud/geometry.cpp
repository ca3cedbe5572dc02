#include "e2emd/pointcloud/geometry.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "e2emd/common/error.hpp"

namespace e2emd::pointcloud {

namespace {

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

Vec3 normalized(const Vec3& v) {
  const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  return {v[0] / n, v[1] / n, v[2] / n};
}

// Camera at radius * dir looking at the origin. Rows of R are the camera axes
// in world coordinates; +y_world is the preferred "down" direction so that
// dir = (0, 0, -1) yields R = I.
ViewPose look_at_origin(const Vec3& dir, double radius, double focal, std::size_t w, std::size_t h) {
  const Vec3 z = {-dir[0], -dir[1], -dir[2]};
  Vec3 x = cross({0, 1, 0}, z);
  if (std::hypot(x[0], x[1], x[2]) < 1e-9) x = cross({0, 0, 1}, z);
  x = normalized(x);
  const Vec3 y = cross(z, x);
  ViewPose p;
  p.rotation = {x[0], x[1], x[2], y[0], y[1], y[2], z[0], z[1], z[2]};
  const Vec3 c = {radius * dir[0], radius * dir[1], radius * dir[2]};
  const Vec3 rc = apply(p.rotation, c);
  p.translation = {-rc[0], -rc[1], -rc[2]};
  p.focal = focal;
  p.cx = static_cast<double>(w) / 2;
  p.cy = static_cast<double>(h) / 2;
  p.width = w;
  p.height = h;
  return p;
}

}  // namespace

Vec3 ViewPose::camera_center() const {
  const Vec3 c = apply(transpose(rotation), translation);
  return {-c[0], -c[1], -c[2]};
}

Mat3 multiply(const Mat3& a, const Mat3& b) {
  Mat3 out{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) out[i * 3 + j] += a[i * 3 + k] * b[k * 3 + j];
  return out;
}

Mat3 transpose(const Mat3& a) { return {a[0], a[3], a[6], a[1], a[4], a[7], a[2], a[5], a[8]}; }

Vec3 apply(const Mat3& r, const Vec3& v) {
  return {r[0] * v[0] + r[1] * v[1] + r[2] * v[2], r[3] * v[0] + r[4] * v[1] + r[5] * v[2],
          r[6] * v[0] + r[7] * v[1] + r[8] * v[2]};
}

double determinant(const Mat3& a) {
  return a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6]) + a[2] * (a[3] * a[7] - a[4] * a[6]);
}

bool is_rotation(const Mat3& r, double tol) {
  const Mat3 rtr = multiply(transpose(r), r);
  for (int i = 0; i < 9; ++i) {
    if (std::abs(rtr[i] - (i % 4 == 0 ? 1.0 : 0.0)) > tol) return false;
  }
  return std::abs(determinant(r) - 1.0) <= tol;
}

std::vector<Vec3> fibonacci_directions(std::size_t n) {
  const double golden = std::numbers::pi * (3 - std::sqrt(5.0));
  std::vector<Vec3> dirs;
  dirs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double y = 1 - 2 * (i + 0.5) / static_cast<double>(n);
    const double r = std::sqrt(1 - y * y);
    dirs.push_back({r * std::cos(golden * i), y, r * std::sin(golden * i)});
  }
  return dirs;
}

std::vector<ViewPose> make_fixed_poses(std::size_t views, double radius, std::size_t width, std::size_t height,
                                       double fov_deg) {
  if (views < 1) throw ConfigError("need at least one view");
  if (!(radius > 0)) throw ConfigError("camera radius must be positive");
  if (width < 1 || height < 1) throw ConfigError("depth map size must be positive");
  if (!(fov_deg > 0 && fov_deg < 180)) throw ConfigError("field of view must be in (0, 180) degrees");
  const double focal = static_cast<double>(width) / 2 / std::tan(fov_deg * std::numbers::pi / 360);
  std::vector<Vec3> dirs;
  if (views == 1) {
    dirs.push_back({0, 0, -1});
  } else if (views == 8) {
    const double s = 1 / std::sqrt(3.0);
    for (int b = 0; b < 8; ++b) dirs.push_back({b & 4 ? s : -s, b & 2 ? s : -s, b & 1 ? s : -s});
  } else {
    dirs = fibonacci_directions(views);
  }
  std::vector<ViewPose> poses;
  for (const auto& d : dirs) poses.push_back(look_at_origin(d, radius, focal, width, height));
  return poses;
}

void DepthMapSet::validate() const {
  if (poses.empty()) throw DimensionError("depth map set needs at least one view");
  for (const auto& p : poses) {
    if (p.width != width || p.height != height) throw DimensionError("pose image size differs from the depth maps");
    if (!(p.focal > 0)) throw ConfigError("focal length must be positive");
  }
  const std::size_t n = poses.size() * height * width;
  if (depth.size() != n || mask.size() != n) {
    throw DimensionError("depth/mask arrays must hold V x H x W = " + std::to_string(n) + " values");
  }
}

PointCloud fuse(const DepthMapSet& set) {
  set.validate();
  const std::size_t plane = set.height * set.width, views = set.views();
  // Offsets first so that the parallel fill keeps view-major order.
  std::vector<std::size_t> offset(views + 1, 0);
  for (std::size_t v = 0; v < views; ++v) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < plane; ++i) {
      if (!set.mask[v * plane + i]) continue;
      const float d = set.depth[v * plane + i];
      if (!(d > 0.0f) || !std::isfinite(d)) {
        throw DataError("view " + std::to_string(v) + " pixel (" + std::to_string(i % set.width) + ", " +
                        std::to_string(i / set.width) + ") is masked with non-positive depth " + std::to_string(d));
      }
      ++count;
    }
    offset[v + 1] = offset[v] + count;
  }
  PointCloud out;
  out.points.resize(offset[views]);
#pragma omp parallel for schedule(static)
  for (std::size_t v = 0; v < views; ++v) {
    const ViewPose& p = set.poses[v];
    const Mat3 rt = transpose(p.rotation);
    std::size_t k = offset[v];
    for (std::size_t y = 0; y < set.height; ++y) {
      for (std::size_t x = 0; x < set.width; ++x) {
        const std::size_t i = v * plane + y * set.width + x;
        if (!set.mask[i]) continue;
        const double d = set.depth[i];
        const Vec3 cam = {(x + 0.5 - p.cx) * d / p.focal - p.translation[0],
                          (y + 0.5 - p.cy) * d / p.focal - p.translation[1], d - p.translation[2]};
        const Vec3 w = apply(rt, cam);
        out.points[k++] = {static_cast<float>(w[0]), static_cast<float>(w[1]), static_cast<float>(w[2])};
      }
    }
  }
  return out;
}

double chamfer(const PointCloud& a, const PointCloud& b) {
  if (a.empty() || b.empty()) throw DataError("chamfer distance needs two non-empty clouds");
  auto directed = [](const PointCloud& p, const PointCloud& q) {
    std::vector<double> best(p.size());
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double ux = p.points[i][0], uy = p.points[i][1], uz = p.points[i][2];
      double m = std::numeric_limits<double>::infinity();
      for (const auto& v : q.points) {
        const double dx = ux - v[0], dy = uy - v[1], dz = uz - v[2];
        m = std::min(m, dx * dx + dy * dy + dz * dz);
      }
      best[i] = std::sqrt(m);
    }
    double total = 0;
    for (double d : best) total += d;
    return total / static_cast<double>(p.size());
  };
  return directed(a, b) + directed(b, a);
}

}  // namespace e2emd::pointcloud
