#include "e2emd/pointcloud/formats.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <vector>

#include "e2emd/common/error.hpp"

namespace e2emd::pointcloud {

namespace {

[[noreturn]] void bad(const std::string& why) { throw ParseError("bad_pcd", "malformed PCD: " + why); }

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

float parse_float(std::string_view token) {
  float v = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(v)) {
    bad("coordinate '" + std::string(token) + "' is not a finite number");
  }
  return v;
}

std::size_t parse_count(const std::vector<std::string_view>& f, const char* key) {
  if (f.size() != 2) bad(std::string(key) + " needs one value");
  std::size_t n = 0;
  const auto [ptr, ec] = std::from_chars(f[1].data(), f[1].data() + f[1].size(), n);
  if (ec != std::errc() || ptr != f[1].data() + f[1].size()) bad(std::string(key) + " is not a count");
  return n;
}

std::string obj_header(std::size_t n) { return "# point cloud, vertices only\n# vertices " + std::to_string(n) + "\n"; }

// Parses the PCD and hands each point's three tokens to `emit`.
template <typename Emit>
void scan_pcd(std::string_view text, Emit&& emit) {
  std::map<std::string, std::vector<std::string_view>> header;
  std::size_t pos = 0;
  bool data_seen = false;
  while (pos < text.size() && !data_seen) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_ws(line);
    if (fields.empty()) continue;
    const std::string key(fields[0]);
    if (header.count(key)) bad("repeated " + key + " line");
    header[key] = fields;
    data_seen = key == "DATA";
  }
  if (!data_seen) bad("no DATA line");
  for (const char* key : {"VERSION", "FIELDS", "SIZE", "TYPE", "COUNT", "WIDTH", "HEIGHT", "POINTS"}) {
    if (!header.count(key)) bad(std::string("missing ") + key);
  }
  auto expect = [&](const char* key, std::vector<std::string_view> want) {
    want.insert(want.begin(), key);
    if (header[key] != want) bad(std::string("unsupported ") + key + " line");
  };
  expect("FIELDS", {"x", "y", "z"});
  expect("SIZE", {"4", "4", "4"});
  expect("TYPE", {"F", "F", "F"});
  expect("COUNT", {"1", "1", "1"});
  expect("DATA", {"ascii"});
  const std::size_t points = parse_count(header["POINTS"], "POINTS");
  const std::size_t width = parse_count(header["WIDTH"], "WIDTH");
  const std::size_t height = parse_count(header["HEIGHT"], "HEIGHT");
  if (width * height != points) bad("WIDTH x HEIGHT differs from POINTS");

  std::size_t seen = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto fields = split_ws(text.substr(pos, end - pos));
    pos = end + 1;
    if (fields.empty()) continue;
    if (fields.size() != 3) bad("data line " + std::to_string(seen + 1) + " does not have 3 values");
    if (seen == points) bad("more data lines than POINTS");
    for (const auto& f : fields) parse_float(f);
    emit(fields);
    ++seen;
  }
  if (seen != points) bad("expected " + std::to_string(points) + " points, found " + std::to_string(seen));
}

}  // namespace

std::string format_coord(float v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", static_cast<double>(v));
  return buf;
}

std::string write_pcd(const PointCloud& pc) {
  const std::string n = std::to_string(pc.size());
  std::string out =
      "# .PCD v0.7 - Point Cloud Data file format\n"
      "VERSION 0.7\n"
      "FIELDS x y z\n"
      "SIZE 4 4 4\n"
      "TYPE F F F\n"
      "COUNT 1 1 1\n"
      "WIDTH " + n + "\n"
      "HEIGHT 1\n"
      "VIEWPOINT 0 0 0 1 0 0 0\n"
      "POINTS " + n + "\n"
      "DATA ascii\n";
  for (const auto& p : pc.points) {
    out += format_coord(p[0]) + ' ' + format_coord(p[1]) + ' ' + format_coord(p[2]) + '\n';
  }
  return out;
}

PointCloud read_pcd(std::string_view text) {
  PointCloud pc;
  scan_pcd(text, [&](const std::vector<std::string_view>& f) {
    pc.points.push_back({parse_float(f[0]), parse_float(f[1]), parse_float(f[2])});
  });
  return pc;
}

std::string write_obj(const PointCloud& pc) {
  std::string out = obj_header(pc.size());
  for (const auto& p : pc.points) {
    out += "v " + format_coord(p[0]) + ' ' + format_coord(p[1]) + ' ' + format_coord(p[2]) + '\n';
  }
  return out;
}

std::string pcd_to_obj(std::string_view pcd) {
  std::string body;
  std::size_t n = 0;
  scan_pcd(pcd, [&](const std::vector<std::string_view>& f) {
    body += "v ";
    body.append(f[0]).append(" ").append(f[1]).append(" ").append(f[2]).append("\n");
    ++n;
  });
  return obj_header(n) + body;
}

}  // namespace e2emd::pointcloud
