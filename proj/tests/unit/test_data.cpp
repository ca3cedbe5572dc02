#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "e2emd/common/error.hpp"
#include "e2emd/data/augment.hpp"
#include "e2emd/data/dataset.hpp"
#include "e2emd/data/image.hpp"
#include "e2emd/data/npy.hpp"
#include "e2emd/data/synth_cells.hpp"
#include "e2emd/model/weight_io.hpp"

using namespace e2emd;
using namespace e2emd::nn;
using namespace e2emd::data;
namespace fs = std::filesystem;

namespace {

const fs::path kDataDir = E2EMD_TEST_DATA_DIR;

std::vector<std::uint8_t> fixture(const char* name) { return model::read_file(kDataDir / name); }

std::string parse_code(std::span<const std::uint8_t> bytes) {
  try {
    parse_npy(bytes);
  } catch (const ParseError& e) {
    return e.code();
  }
  return "none";
}

Tensor random_image(std::size_t h, std::size_t w, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t({3, h, w});
  for (auto& v : t) v = static_cast<float>(rng.uniform());
  return t;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("npy: hand-built v1.0 f4 2x2 header") {
  std::string header = "{'descr': '<f4', 'fortran_order': False, 'shape': (2, 2), }";
  header.append(128 - 10 - header.size() - 1, ' ');
  header += '\n';
  std::vector<std::uint8_t> bytes{0x93, 'N', 'U', 'M', 'P', 'Y', 1, 0, static_cast<std::uint8_t>(header.size()), 0};
  bytes.insert(bytes.end(), header.begin(), header.end());
  for (float v : {1.0f, 2.0f, 3.0f, 4.0f}) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes.insert(bytes.end(), p, p + 4);
  }
  const auto arr = parse_npy(bytes);
  CHECK(arr.shape == Shape{2, 2});
  CHECK(arr.dtype == NpyDtype::f4);
  CHECK(arr.data == std::vector<double>{1, 2, 3, 4});
}

TEST_CASE("npy: numpy-written goldens parse to the writer's inputs") {
  const auto f4 = parse_npy(fixture("golden_f4.npy"));
  CHECK(f4.shape == Shape{2, 3, 4});
  REQUIRE(f4.data.size() == 24);
  for (std::size_t i = 0; i < 24; ++i) CHECK(f4.data[i] == static_cast<float>(i) * 0.25f - 1.0f);

  const auto f8 = parse_npy(fixture("golden_f8.npy"));
  CHECK(f8.dtype == NpyDtype::f8);
  CHECK(f8.data == std::vector<double>{0.1, -2.5, 1e300});

  const auto vec = parse_npy(fixture("golden_vec.npy"));
  CHECK(vec.shape == Shape{5});
  CHECK(vec.data[0] == 1.5);
  CHECK(std::signbit(vec.data[1]));
  CHECK(vec.data[4] == static_cast<double>(1e-7f));

  CHECK(parse_code(fixture("golden_fortran.npy")) == "fortran_order");
  CHECK(parse_code(fixture("golden_i4.npy")) == "bad_dtype");
  try {
    parse_npy(fixture("golden_fortran.npy"));
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()) == "fortran order unsupported");
  }
}

TEST_CASE("npy: writer output is byte-identical to numpy") {
  const auto f4 = parse_npy(fixture("golden_f4.npy"));
  std::vector<float> values(f4.data.begin(), f4.data.end());
  CHECK(write_npy(f4.shape, std::span<const float>(values)) == fixture("golden_f4.npy"));
  const auto f8 = parse_npy(fixture("golden_f8.npy"));
  CHECK(write_npy(f8.shape, std::span<const double>(f8.data)) == fixture("golden_f8.npy"));
  const auto vec = parse_npy(fixture("golden_vec.npy"));
  std::vector<float> v(vec.data.begin(), vec.data.end());
  CHECK(write_npy(vec.shape, std::span<const float>(v)) == fixture("golden_vec.npy"));
}

TEST_CASE("npy: every truncation of a valid file is rejected") {
  for (const char* name : {"golden_f4.npy", "golden_f8.npy", "golden_vec.npy"}) {
    const auto bytes = fixture(name);
    for (std::size_t n = 0; n < bytes.size(); ++n) {
      CAPTURE(n);
      CHECK_THROWS_AS(parse_npy(std::span(bytes).first(n)), ParseError);
    }
  }
}

TEST_CASE("npy: distinct error codes") {
  auto bytes = fixture("golden_f4.npy");
  auto b = bytes;
  b[1] = 'X';
  CHECK(parse_code(b) == "bad_magic");
  b = bytes;
  b[6] = 2;
  CHECK(parse_code(b) == "bad_version");
  b = bytes;
  b.push_back(0);
  CHECK(parse_code(b) == "length_mismatch");
  b = bytes;
  // '<f4' -> '>f4'
  const auto pos = std::search(b.begin(), b.end(), std::begin("<f4"), std::begin("<f4") + 3);
  *pos = '>';
  CHECK(parse_code(b) == "bad_dtype");
  b = bytes;
  b[10] = '[';
  CHECK(parse_code(b) == "bad_header");
}

TEST_CASE("png: encode/decode roundtrip at 8-bit precision and bad bytes") {
  const Tensor img = random_image(7, 5, 3);
  const Tensor back = decode_png(encode_png(img));
  REQUIRE(back.shape() == img.shape());
  for (std::size_t i = 0; i < img.size(); ++i) CHECK(std::abs(back[i] - img[i]) <= 0.5f / 255.0f + 1e-6f);
  const std::string text = "hello, not a png";
  try {
    decode_png(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.code() == "bad_image");
  }
  CHECK_THROWS_AS(decode_png({}), ParseError);
}

TEST_CASE("resize: identity at same size, constant stays constant, matches 2x oracle") {
  const Tensor img = random_image(6, 6, 4);
  CHECK(resize_bilinear(img, 6, 6) == img);
  const Tensor flat({3, 5, 7}, 0.4f);
  for (float v : resize_bilinear(flat, 9, 3)) CHECK(v == doctest::Approx(0.4f));
  // Downscale by exactly 2 samples at pixel-pair midpoints: a 2x2 box mean.
  const Tensor half = resize_bilinear(img, 3, 3);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < 3; ++y)
      for (std::size_t x = 0; x < 3; ++x) {
        auto at = [&](std::size_t yy, std::size_t xx) { return img[(c * 6 + yy) * 6 + xx]; };
        const float want = (at(2 * y, 2 * x) + at(2 * y, 2 * x + 1) + at(2 * y + 1, 2 * x) + at(2 * y + 1, 2 * x + 1)) / 4;
        CHECK(half[(c * 3 + y) * 3 + x] == doctest::Approx(want).epsilon(1e-5));
      }
}

TEST_CASE("load_dataset: 2+2 images give labels [0,0,1,1] in sorted order") {
  TempDir tmp("e2emd_test_load");
  fs::create_directories(tmp.path / "Parasitized");
  fs::create_directories(tmp.path / "Uninfected");
  // Written out of order so enumeration order cannot be relied on.
  for (const char* n : {"b.png", "a.png"}) model::write_file(tmp.path / "Uninfected" / n, encode_png(random_image(9, 11, 1)));
  for (const char* n : {"z.png", "c.png"}) model::write_file(tmp.path / "Parasitized" / n, encode_png(random_image(9, 11, 2)));
  model::write_file(tmp.path / "Uninfected" / "Thumbs.db", std::vector<std::uint8_t>{1, 2, 3});
  const auto ds = load_dataset(tmp.path, {3, 8, 8});
  REQUIRE(ds.samples.size() == 4);
  CHECK(labels_of(ds.samples) == std::vector<int>{0, 0, 1, 1});
  CHECK(fs::path(ds.samples[0].source).filename() == "c.png");
  CHECK(fs::path(ds.samples[1].source).filename() == "z.png");
  CHECK(fs::path(ds.samples[2].source).filename() == "a.png");
  CHECK(ds.report.loaded == 4);
  CHECK(ds.report.skipped == 1);
  for (const auto& s : ds.samples) {
    CHECK(s.pixels.shape() == Shape{3, 8, 8});
    for (float v : s.pixels) CHECK((v >= 0.0f && v <= 1.0f));
  }
}

TEST_CASE("load_dataset: missing or empty class directory is a layout error") {
  TempDir tmp("e2emd_test_layout");
  fs::create_directories(tmp.path / "Parasitized");
  model::write_file(tmp.path / "Parasitized" / "a.png", encode_png(random_image(4, 4, 1)));
  CHECK_THROWS_AS(load_dataset(tmp.path, {3, 4, 4}), LayoutError);
  fs::create_directories(tmp.path / "Uninfected");
  try {
    load_dataset(tmp.path, {3, 4, 4});
    FAIL("expected a layout error");
  } catch (const LayoutError& e) {
    CHECK(std::string(e.what()).find("Uninfected") != std::string::npos);
  }
}

TEST_CASE("split: 27,588-image balanced dataset floors to 2758/2758/22072") {
  std::vector<int> labels(27588);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 2;
  const auto s = split(labels, {}, 42);
  CHECK(s.val.size() == 2758);
  CHECK(s.test.size() == 2758);
  CHECK(s.train.size() == 22072);
}

TEST_CASE("split: partition, stratified, deterministic (property)") {
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(300);
    std::vector<int> labels(n);
    for (auto& l : labels) l = static_cast<int>(rng.below(2));
    labels[0] = 0;
    labels[1] = 1;
    const double rv = rng.uniform(0, 0.4), rt = rng.uniform(0, 0.4);
    const SplitRatios r{1 - rv - rt, rv, rt};
    const auto s = split(labels, r, trial);
    std::vector<std::size_t> all;
    for (const auto* part : {&s.train, &s.val, &s.test}) {
      CHECK(std::is_sorted(part->begin(), part->end()));
      all.insert(all.end(), part->begin(), part->end());
    }
    std::sort(all.begin(), all.end());
    REQUIRE(all.size() == n);
    for (std::size_t i = 0; i < n; ++i) REQUIRE(all[i] == i);
    for (int c = 0; c < 2; ++c) {
      const double nc = static_cast<double>(std::count(labels.begin(), labels.end(), c));
      auto in_class = [&](const std::vector<std::size_t>& part) {
        return static_cast<double>(std::count_if(part.begin(), part.end(), [&](std::size_t i) { return labels[i] == c; }));
      };
      CHECK(std::abs(in_class(s.val) - rv * nc) <= 1.0);
      CHECK(std::abs(in_class(s.test) - rt * nc) <= 1.0);
    }
    const auto again = split(labels, r, trial);
    CHECK(again.train == s.train);
    CHECK(again.val == s.val);
    CHECK(again.test == s.test);
  }
}

TEST_CASE("split: all-train ratios, empty class and bad ratios") {
  const std::vector<int> labels{0, 1, 0, 1, 1};
  const auto s = split(labels, {1, 0, 0}, 1);
  CHECK(s.train.size() == 5);
  CHECK(s.val.empty());
  CHECK_THROWS_AS(split({0, 0, 0}, {}, 1), DataError);
  CHECK_THROWS_AS(split(labels, {0.5, 0.5, 0.5}, 1), ConfigError);
}

TEST_CASE("augment: zero config is the identity") {
  const Tensor img = random_image(13, 10, 5);
  Rng rng(1);
  for (int i = 0; i < 5; ++i) CHECK(augment(img, AugmentConfig::none(), rng) == img);
}

TEST_CASE("augment: flip only of a mirror-symmetric image is the identity") {
  Tensor img = random_image(8, 9, 6);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < 8; ++y)
      for (std::size_t x = 0; x < 9; ++x) img[(c * 8 + y) * 9 + x] = img[(c * 8 + y) * 9 + (8 - x)];
  AugmentConfig cfg = AugmentConfig::none();
  cfg.flip_probability = 1.0;
  Rng rng(2);
  CHECK(augment(img, cfg, rng) == img);
  const Tensor asym = random_image(8, 9, 7);
  const Tensor flipped = augment(asym, cfg, rng);
  CHECK(flipped[3] == asym[5]);
}

TEST_CASE("augment: fixed seed is bit-identical, values stay in [0,1]") {
  const Tensor img = random_image(20, 24, 8);
  const AugmentConfig cfg;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng a(seed), b(seed);
    const Tensor x = augment(img, cfg, a), y = augment(img, cfg, b);
    CHECK(x == y);
    for (float v : x) CHECK((v >= 0.0f && v <= 1.0f));
  }
}

TEST_CASE("augment: rotating +r then -r returns a centered disk's interior") {
  const std::size_t n = 48;
  Tensor disk({3, n, n});
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x) {
        const double r = std::hypot(x - 23.5, y - 23.5);
        disk[(c * n + y) * n + x] = static_cast<float>(std::clamp(14.0 - r, 0.0, 1.0) * (0.5 + 0.1 * c));
      }
  for (double angle : {7.0, 20.0, -15.0}) {
    AugmentParams p;
    p.angle_deg = angle;
    const Tensor there = apply_affine(disk, p);
    p.angle_deg = -angle;
    const Tensor back = apply_affine(there, p);
    double worst = 0;
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x) {
          // Interior: at least 2 px inside the disk edge at radius 14.
          if (std::hypot(x - 23.5, y - 23.5) > 12) continue;
          worst = std::max(worst, static_cast<double>(std::abs(back[(c * n + y) * n + x] - disk[(c * n + y) * n + x])));
        }
    CHECK(worst < 0.1);
  }
}

TEST_CASE("augment: quarter turn moves the top-right pixel to the top-left") {
  Tensor img({1, 5, 5});
  img[0 * 5 + 4] = 1.0f;
  AugmentParams p;
  p.angle_deg = 90;
  const Tensor out = apply_affine(img, p);
  // Counter-clockwise on screen: the right edge rotates up to the top, the top
  // edge to the left.
  CHECK(out[0] == doctest::Approx(1.0f).epsilon(1e-5));
  CHECK(std::abs(out[4]) < 1e-5f);
}

TEST_CASE("augment: the draw sequence does not depend on the config") {
  Rng a(5), b(5);
  sample_params(AugmentConfig::none(), 10, 10, a);
  sample_params(AugmentConfig{}, 10, 10, b);
  CHECK(a.next_u64() == b.next_u64());
  CHECK_THROWS_AS((AugmentConfig{-1, 0, 0, 0}.validate()), ConfigError);
  CHECK_THROWS_AS((AugmentConfig{0, 0, 0, 1.5}.validate()), ConfigError);
}

TEST_CASE("synthetic cells: deterministic, in range, written in NIH layout") {
  CHECK(synth_cell(0, 3) == synth_cell(0, 3));
  CHECK_FALSE(synth_cell(0, 3) == synth_cell(1, 3));
  TempDir tmp("e2emd_test_synth");
  write_synth_cells(tmp.path, 3, 11);
  const auto ds = load_dataset(tmp.path, {3, 32, 32});
  CHECK(ds.samples.size() == 6);
  CHECK(labels_of(ds.samples) == std::vector<int>{0, 0, 0, 1, 1, 1});
}

TEST_CASE("stratified_subset: proportions, determinism, bounds") {
  std::vector<int> labels(27558);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i < 13779 ? 0 : 1;
  const auto sub = stratified_subset(labels, 2000, 42);
  REQUIRE(sub.size() == 2000);
  CHECK(std::is_sorted(sub.begin(), sub.end()));
  CHECK(std::adjacent_find(sub.begin(), sub.end()) == sub.end());
  CHECK(std::count_if(sub.begin(), sub.end(), [&](std::size_t i) { return labels[i] == 0; }) == 1000);
  CHECK(stratified_subset(labels, 2000, 42) == sub);
  CHECK(stratified_subset(labels, 2000, 43) != sub);

  const std::vector<int> skewed{0, 1, 1, 1, 1, 1, 1, 1, 1, 1};
  const auto s3 = stratified_subset(skewed, 3, 1);
  CHECK(s3.size() == 3);
  CHECK(std::count_if(s3.begin(), s3.end(), [&](std::size_t i) { return skewed[i] == 0; }) == 1);
  CHECK(stratified_subset(skewed, 10, 1).size() == 10);
  CHECK_THROWS_AS(stratified_subset(skewed, 11, 1), ConfigError);
}

TEST_CASE("load_dataset: a limit decodes only the stratified subset") {
  TempDir tmp("e2emd_test_limit");
  write_synth_cells(tmp.path, 5, 2);
  const auto full = load_dataset(tmp.path, {3, 16, 16});
  const auto part = load_dataset(tmp.path, {3, 16, 16}, 4, 9);
  REQUIRE(part.samples.size() == 4);
  CHECK(labels_of(part.samples) == std::vector<int>{0, 0, 1, 1});
  const auto idx = stratified_subset(labels_of(full.samples), 4, 9);
  for (std::size_t i = 0; i < 4; ++i) CHECK(part.samples[i].source == full.samples[idx[i]].source);
}
