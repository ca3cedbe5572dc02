#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace e2emd::pointcloud {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<double, 9>;  // row-major

// World -> camera: x_cam = R x_world + t. Pixel (u, v) has its centre at
// (u + 0.5, v + 0.5); v grows along camera +y.
struct ViewPose {
  Mat3 rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};
  Vec3 translation{0, 0, 0};
  double focal = 1;
  double cx = 0, cy = 0;
  std::size_t width = 1, height = 1;

  Vec3 camera_center() const;  // -R^T t
};

inline constexpr std::size_t kDefaultViews = 8;
inline constexpr double kDefaultRadius = 2.5;
inline constexpr double kDefaultFovDeg = 60.0;

// n equal-area unit directions (golden-angle spiral, y from +1 to -1).
std::vector<Vec3> fibonacci_directions(std::size_t n);

// V cameras on a sphere of the given radius, all looking at the origin.
// V = 1: camera at (0, 0, -r) with R = I. V = 8: the cube-corner directions
// (+-1, +-1, +-1)/sqrt(3) in binary order. Otherwise a Fibonacci sphere.
// Principal point at the image centre; focal from the horizontal field of view.
std::vector<ViewPose> make_fixed_poses(std::size_t views, double radius, std::size_t width = 32,
                                       std::size_t height = 32, double fov_deg = kDefaultFovDeg);

struct DepthMapSet {
  std::vector<ViewPose> poses;
  std::size_t height = 0, width = 0;
  std::vector<float> depth;         // V x H x W camera-frame z
  std::vector<std::uint8_t> mask;   // V x H x W, 1 = emits a point

  std::size_t views() const { return poses.size(); }
  void validate() const;  // sizes agree with the poses
};

struct PointCloud {
  std::vector<std::array<float, 3>> points;
  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

// Inverse projection of every masked pixel, view-major then row-major.
// Throws DataError naming the view and pixel for a non-positive or
// non-finite masked depth.
PointCloud fuse(const DepthMapSet& depths);

// Mean nearest-neighbour distance from a to b plus from b to a. Throws
// DataError when either cloud is empty.
double chamfer(const PointCloud& a, const PointCloud& b);

bool is_rotation(const Mat3& r, double tol = 1e-6);
Mat3 multiply(const Mat3& a, const Mat3& b);
Mat3 transpose(const Mat3& a);
Vec3 apply(const Mat3& r, const Vec3& v);
double determinant(const Mat3& a);

}  // namespace e2emd::pointcloud
