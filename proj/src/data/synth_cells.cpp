#include "e2emd/data/synth_cells.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "e2emd/common/rng.hpp"
#include "e2emd/data/dataset.hpp"
#include "e2emd/data/image.hpp"
#include "e2emd/model/weight_io.hpp"

namespace e2emd::data {

namespace fs = std::filesystem;
using namespace e2emd::nn;

namespace {

struct Spot {
  double x, y, radius;
  bool ring;
  double r, g, b, strength;
};

double smoothstep(double edge0, double edge1, double x) {
  const double t = std::clamp((x - edge0) / (edge1 - edge0), 0.0, 1.0);
  return t * t * (3 - 2 * t);
}

}  // namespace

Tensor synth_cell(int label, std::uint64_t seed) {
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(label), 0xce11));
  const std::size_t h = 100 + rng.below(61), w = std::clamp<std::size_t>(h + rng.below(21) - 10, 90, 170);
  const double cx = w / 2.0 + rng.uniform(-4, 4), cy = h / 2.0 + rng.uniform(-4, 4);
  const double ra = 0.40 * w * rng.uniform(0.9, 1.05), rb = 0.40 * h * rng.uniform(0.85, 1.05);
  const double tilt = rng.uniform(0, std::numbers::pi);
  const double wobble_amp = rng.uniform(0.0, 0.05), wobble_phase = rng.uniform(0, 2 * std::numbers::pi);
  const int wobble_freq = 2 + static_cast<int>(rng.below(4));
  const double base_r = rng.uniform(0.72, 0.86), base_g = rng.uniform(0.45, 0.60), base_b = rng.uniform(0.50, 0.66);
  const double pallor = rng.uniform(0.0, 0.12);

  std::vector<Spot> spots;
  auto place = [&](double max_frac) {
    const double rho = std::sqrt(rng.uniform()) * max_frac, phi = rng.uniform(0, 2 * std::numbers::pi);
    return std::pair{cx + rho * ra * std::cos(phi), cy + rho * rb * std::sin(phi)};
  };
  if (label == 0) {
    const std::size_t count = 1 + rng.below(3);
    for (std::size_t i = 0; i < count; ++i) {
      const auto [x, y] = place(0.75);
      const bool ring = rng.bernoulli(0.4);
      spots.push_back({x, y, rng.uniform(6.0, 14.0), ring, rng.uniform(0.28, 0.42), rng.uniform(0.08, 0.18),
                       rng.uniform(0.36, 0.52), rng.uniform(0.85, 1.0)});
    }
  } else if (rng.bernoulli(0.35)) {
    // Pale platelet-like artefact: the confounder in uninfected crops.
    const auto [x, y] = place(0.8);
    spots.push_back({x, y, rng.uniform(2.0, 5.0), false, 0.80, 0.62, 0.70, rng.uniform(0.3, 0.6)});
  }

  Tensor img({3, h, w});
  const std::size_t plane = h * w;
  const double ct = std::cos(tilt), st = std::sin(tilt);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
      const double u = (ct * dx + st * dy) / ra, v = (-st * dx + ct * dy) / rb;
      const double angle = std::atan2(v, u);
      const double rr = std::sqrt(u * u + v * v) / (1 + wobble_amp * std::sin(wobble_freq * angle + wobble_phase));
      const double inside = 1 - smoothstep(0.96, 1.02, rr);
      if (inside <= 0) continue;
      // Biconcave look: paler centre, darker rim.
      const double shade = 1 + pallor * (1 - smoothstep(0.0, 0.6, rr)) - 0.10 * smoothstep(0.75, 0.98, rr);
      double r = base_r * shade, g = base_g * shade, b = base_b * shade;
      for (const auto& s : spots) {
        const double d = std::hypot(x + 0.5 - s.x, y + 0.5 - s.y);
        double a = s.ring ? 1 - smoothstep(0.6, 1.0, std::abs(d - s.radius) / 3.0) : 1 - smoothstep(s.radius * 0.6, s.radius, d);
        a *= s.strength;
        r = r * (1 - a) + s.r * a;
        g = g * (1 - a) + s.g * a;
        b = b * (1 - a) + s.b * a;
      }
      const double noise = 0.02;
      img[0 * plane + y * w + x] = static_cast<float>(std::clamp(inside * (r + noise * rng.normal()), 0.0, 1.0));
      img[1 * plane + y * w + x] = static_cast<float>(std::clamp(inside * (g + noise * rng.normal()), 0.0, 1.0));
      img[2 * plane + y * w + x] = static_cast<float>(std::clamp(inside * (b + noise * rng.normal()), 0.0, 1.0));
    }
  }
  return img;
}

void write_synth_cells(const fs::path& out, std::size_t per_class, std::uint64_t seed) {
  for (std::size_t label = 0; label < kClassDirs.size(); ++label) {
    fs::create_directories(out / kClassDirs[label]);
  }
  const std::size_t total = per_class * kClassDirs.size();
  std::vector<std::string> errors(total);
#pragma omp parallel for schedule(dynamic, 4)
  for (std::size_t k = 0; k < total; ++k) {
    const std::size_t label = k / per_class, i = k % per_class;
    char name[32];
    std::snprintf(name, sizeof name, "cell_%06zu.png", i);
    try {
      const Tensor img = synth_cell(static_cast<int>(label), derive_seed(seed, i, 0x5e11));
      model::write_file(out / kClassDirs[label] / name, encode_png(img));
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw Error("io_error", "writing synthetic cells failed: " + e);
  }
}

}  // namespace e2emd::data
