#pragma once

#include <string>
#include <string_view>

#include "e2emd/pointcloud/geometry.hpp"

namespace e2emd::pointcloud {

// Coordinates print with printf "%g" (6 significant digits, shortest form).
std::string format_coord(float v);

// ASCII PCD v0.7 with fields x y z, one "x y z" line per point.
std::string write_pcd(const PointCloud& pc);

// Reads the ASCII x/y/z dialect written above (any header order accepted as
// long as the required fields are present). ParseError code "bad_pcd".
PointCloud read_pcd(std::string_view text);

// Comment header, then one "v x y z" line per point; no faces.
std::string write_obj(const PointCloud& pc);

// Converts PCD text to OBJ, copying each coordinate token verbatim.
std::string pcd_to_obj(std::string_view pcd);

}  // namespace e2emd::pointcloud
