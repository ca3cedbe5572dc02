// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.
//
//   acceptance [criterion...]      (default: all, in order)
//
// E2EMD_NIH_DIR points at a Parasitized/Uninfected image tree. Without it the
// classifier criteria run on generated stand-in cells, and every line says so.
// E2EMD_ACCEPT_DIR sets the scratch directory (default: a fresh temp dir).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <future>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <thread>

#include <unistd.h>

#include "e2emd/data/image.hpp"
#include "e2emd/data/synth_cells.hpp"
#include "e2emd/model/predict.hpp"
#include "e2emd/model/weight_io.hpp"
#include "e2emd/nn/kernels.hpp"
#include "e2emd/pointcloud/formats.hpp"
#include "e2emd/pointcloud/generator.hpp"
#include "e2emd/pointcloud/synth_shapes.hpp"
#include "e2emd/service/service.hpp"
#include "e2emd/training/prune.hpp"
#include "gradcheck.hpp"
#include "httplib.h"
#include "oracles.hpp"
#include "weight_fixtures.hpp"

using namespace e2emd;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

constexpr std::uint64_t kSeed = 42;
constexpr std::size_t kDeskSize = 64;
constexpr std::size_t kDeskImages = 2000;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// --- shared state -------------------------------------------------------------

struct Desk {
  model::ModelSpec spec;
  nn::WeightStore weights;
  data::Dataset dataset;
  data::DatasetSplit split;
  training::TrainConfig cfg;
  double val_accuracy = 0;
  training::Metrics test;
  double seconds = 0;
};

struct Context {
  fs::path work;
  fs::path cells;
  bool standin = false;
  std::optional<Desk> desk;

  std::string data_note() const { return standin ? " [synthetic stand-in data, not NIH]" : " [NIH data]"; }
};

fs::path data_root(Context& ctx) {
  if (!ctx.cells.empty()) return ctx.cells;
  if (const char* nih = std::getenv("E2EMD_NIH_DIR"); nih && *nih) {
    ctx.cells = nih;
  } else {
    ctx.standin = true;
    ctx.cells = ctx.work / "cells";
    if (!fs::exists(ctx.cells / "Uninfected")) data::write_synth_cells(ctx.cells, kDeskImages / 2, 2024);
  }
  return ctx.cells;
}

model::ModelSpec mini_spec(std::size_t size) {
  auto spec =
      model::append_transfer_head(model::build_vgg19({3, size, size}, model::Scale::mini), model::kDefaultHeadWidths, false);
  spec.version = "acceptance-mini-" + std::to_string(kSeed);
  return spec;
}

// The default configuration, as `e2emd train --scale mini` runs it.
Desk& desk(Context& ctx) {
  if (ctx.desk) return *ctx.desk;
  const auto t0 = Clock::now();
  Desk d;
  d.spec = mini_spec(kDeskSize);
  d.dataset = data::load_dataset(data_root(ctx), d.spec.network.input, kDeskImages, kSeed);
  d.split = data::split(data::labels_of(d.dataset.samples), {}, kSeed);
  d.cfg.seed = kSeed;
  std::cerr << "desk: " << d.dataset.samples.size() << " images, train " << d.split.train.size() << " val "
            << d.split.val.size() << " test " << d.split.test.size() << "\n";
  auto result = training::train(d.spec, nn::init_weights(d.spec.network, derive_seed(kSeed, 0x1a17)), d.dataset.samples,
                                d.split, d.cfg, [&](const training::EpochRecord& r) {
                                  std::cerr << "  " << training::history_line(r) << " t=" << fmt("%.0f", seconds_since(t0))
                                            << "s\n";
                                });
  d.weights = std::move(result.weights);
  d.val_accuracy = training::evaluate(d.spec, d.weights, d.dataset.samples, d.split.val).metrics.accuracy;
  d.test = training::evaluate(d.spec, d.weights, d.dataset.samples, d.split.test).metrics;
  d.seconds = seconds_since(t0);
  ctx.desk = std::move(d);
  return *ctx.desk;
}

// --- criteria -----------------------------------------------------------------

Outcome gradient_fidelity(Context&) {
  const auto t0 = Clock::now();
  double worst = 0;
  std::string where;
  std::size_t cases = 0, checked = 0;
  for (int kind = 0; kind < gradcheck::kKindCount; ++kind) {
    for (std::uint64_t s = 0; s < 10; ++s, ++cases) {
      const auto r = gradcheck::check(gradcheck::make_smooth_case(kind, 1000 + s));
      checked += r.checked;
      if (r.max_rel_error > worst) {
        worst = r.max_rel_error;
        where = r.worst;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-3 && secs < 120,
          std::to_string(cases) + " cases, " + std::to_string(checked) + " partials, max rel error " +
              fmt("%.2e", worst) + " (" + where + "), " + fmt("%.1f", secs) + " s"};
}

nn::Tensor random_tensor(nn::Shape shape, std::uint64_t seed) {
  const auto v = oracle::random_values(nn::element_count(shape), seed);
  return nn::Tensor(std::move(shape), std::vector<float>(v.begin(), v.end()));
}

oracle::Array as_array(const nn::Tensor& t) { return {t.shape(), std::vector<double>(t.begin(), t.end())}; }

double max_abs_diff(const nn::Tensor& got, const std::vector<double>& want) {
  if (got.size() != want.size()) return INFINITY;
  double worst = 0;
  for (std::size_t i = 0; i < want.size(); ++i) worst = std::max(worst, std::abs(double(got[i]) - want[i]));
  return worst;
}

Outcome oracle_equivalence(Context&) {
  std::mt19937_64 gen(7);
  auto pick = [&](std::size_t lo, std::size_t hi) { return lo + gen() % (hi - lo + 1); };
  double kernel_worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = pick(1, 3), c = pick(1, 4), o = pick(1, 5), kh = pick(1, 3), kw = pick(1, 3);
    const std::size_t s = pick(1, 2), p = pick(0, 2), h = pick(kh, 12), w = pick(kw, 12);
    const auto in = random_tensor({n, c, h, w}, gen()), k = random_tensor({o, c, kh, kw}, gen());
    const auto b = random_tensor({o}, gen());
    const auto conv = oracle::conv2d(as_array(in), as_array(k), as_array(b).data, s, p);
    const std::size_t win = pick(1, std::min<std::size_t>(3, std::min(h, w)));
    const auto pool = oracle::maxpool2d(as_array(in), win, s);
    const std::size_t f = pick(1, 80), g = pick(1, 40);
    const auto x = random_tensor({n, f}, gen()), wd = random_tensor({f, g}, gen()), bd = random_tensor({g}, gen());
    const auto dense = oracle::dense(as_array(x).data, n, f, as_array(wd).data, g, as_array(bd).data);
    for (nn::Exec e : {nn::Exec::reference, nn::Exec::parallel}) {
      kernel_worst = std::max(kernel_worst, max_abs_diff(nn::conv2d_forward(in, k, b, s, p, e), conv.data));
      kernel_worst = std::max(kernel_worst, max_abs_diff(nn::maxpool2d_forward(in, win, s, e).output, pool.data));
      kernel_worst = std::max(kernel_worst, max_abs_diff(nn::dense_forward(x, wd, bd, e), dense));
    }
  }

  std::size_t chamfer_mismatch = 0;
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    pointcloud::PointCloud a, b;
    std::vector<oracle::Point> oa, ob;
    const std::size_t na = 1 + rng.below(200), nb = 1 + rng.below(200);
    for (std::size_t i = 0; i < na + nb; ++i) {
      const std::array<float, 3> q{static_cast<float>(rng.uniform(-1, 1)), static_cast<float>(rng.uniform(-1, 1)),
                                   static_cast<float>(rng.uniform(-1, 1))};
      (i < na ? a : b).points.push_back(q);
      (i < na ? oa : ob).push_back({q[0], q[1], q[2]});
    }
    if (pointcloud::chamfer(a, b) != oracle::chamfer_brute(oa, ob)) ++chamfer_mismatch;
  }

  std::size_t metric_mismatch = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(300);
    std::vector<int> labels(n), preds(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = static_cast<int>(rng.below(2));
      preds[i] = static_cast<int>(rng.below(2));
    }
    const auto want = oracle::confusion(labels, preds);
    const auto m = training::metrics_from(training::confusion_of(labels, preds));
    const double acc = static_cast<double>(want.tp + want.tn) / static_cast<double>(n);
    const double pr = want.tp + want.fp ? static_cast<double>(want.tp) / static_cast<double>(want.tp + want.fp) : 0.0;
    const double rc = want.tp + want.fn ? static_cast<double>(want.tp) / static_cast<double>(want.tp + want.fn) : 0.0;
    const double f1 = pr + rc > 0 ? 2 * pr * rc / (pr + rc) : 0.0;
    const bool same_counts = static_cast<long>(m.confusion.tp) == want.tp && static_cast<long>(m.confusion.fp) == want.fp &&
                             static_cast<long>(m.confusion.fn) == want.fn && static_cast<long>(m.confusion.tn) == want.tn;
    if (!same_counts || m.accuracy != acc || m.f1 != f1) ++metric_mismatch;
  }
  return {kernel_worst < 1e-5 && chamfer_mismatch == 0 && metric_mismatch == 0,
          "kernels max |diff| " + fmt("%.2e", kernel_worst) + " over 200 shapes x 2 paths; chamfer mismatches " +
              std::to_string(chamfer_mismatch) + "/100; metric mismatches " + std::to_string(metric_mismatch) + "/1000"};
}

Outcome overfit(Context& ctx) {
  const auto t0 = Clock::now();
  const auto spec = mini_spec(kDeskSize);
  const auto ds = data::load_dataset(data_root(ctx), spec.network.input, 32, kSeed);
  data::DatasetSplit all;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) all.train.push_back(i);
  training::TrainConfig cfg;
  cfg.epochs = 100;
  cfg.augment = false;  // memorising exact pixels is the point
  cfg.seed = kSeed;
  const auto r = training::train(spec, nn::init_weights(spec.network, derive_seed(kSeed, 0x1a17)), ds.samples, all, cfg);
  const double acc = training::evaluate(spec, r.weights, ds.samples, all.train).metrics.accuracy;
  const double secs = seconds_since(t0);
  return {acc == 1.0 && secs < 300, std::to_string(ds.samples.size()) + " images, 100 epochs: train accuracy " +
                                        fmt("%.4f", acc) + " (first reached at epoch " + std::to_string(r.best_epoch) +
                                        "), " + fmt("%.0f", secs) + " s" + ctx.data_note()};
}

Outcome desk_classification(Context& ctx) {
  const Desk& d = desk(ctx);
  const bool pass = d.test.accuracy >= 0.85 && d.test.f1 >= 0.85 && d.seconds <= 1800;
  return {pass, std::to_string(d.dataset.samples.size()) + " images, 25 epochs: test accuracy " +
                    fmt("%.4f", d.test.accuracy) + ", F1 " + fmt("%.4f", d.test.f1) + ", val accuracy " +
                    fmt("%.4f", d.val_accuracy) + ", " + fmt("%.0f", d.seconds) + " s" + ctx.data_note()};
}

Outcome pruning(Context& ctx) {
  const Desk& d = desk(ctx);
  const auto t0 = Clock::now();
  const auto pruned = training::prune_magnitude(d.weights, {0.5, training::PruneScope::global});
  const auto tuned = training::fine_tune(d.spec, pruned.weights, d.dataset.samples, d.split, 3, d.cfg);
  const double after = training::evaluate(d.spec, tuned, d.dataset.samples, d.split.val).metrics.accuracy;
  const double drop = 100 * (d.val_accuracy - after);
  const double sparsity = model::prunable_sparsity(tuned);
  const double ratio =
      static_cast<double>(model::sparse_encoded_bytes(tuned)) / static_cast<double>(model::dense_encoded_bytes(tuned));
  std::string note;
  // Near-chance baselines make the drop bound uninformative; say so.
  if (d.val_accuracy < 0.6) note = "; note: unpruned baseline is near chance";
  return {drop <= 3 && sparsity >= 0.49 && sparsity <= 0.51 && ratio < 0.6,
          "val accuracy " + fmt("%.4f", d.val_accuracy) + " -> " + fmt("%.4f", after) + " (drop " + fmt("%.2f", drop) +
              " points), sparsity " + fmt("%.4f", sparsity) + ", sparse/dense bytes " + fmt("%.3f", ratio) + ", " +
              fmt("%.0f", seconds_since(t0)) + " s" + note + ctx.data_note()};
}

Outcome weight_format(Context&) {
  std::size_t failures = 0;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const auto store = fixtures::random_store(derive_seed(s, 0xf22));
    const auto bytes = model::encode_weights(store);
    const auto back = model::decode_weights(bytes);
    if (!fixtures::bit_identical(store, back) || model::encode_weights(back) != bytes) ++failures;
  }
  nn::WeightStore single;
  single.emplace("t", nn::Tensor({2, 2}, std::vector<float>{1, 2, 3, 4}));
  const bool golden = model::encode_weights(single) == fixtures::kSingleTensorBytes &&
                      fixtures::bit_identical(model::decode_weights(fixtures::kSingleTensorBytes), single);
  return {failures == 0 && golden, "fuzz roundtrip failures " + std::to_string(failures) + "/1000, single-tensor golden " +
                                       (golden ? "matches" : "differs")};
}

std::string slurp(const fs::path& p) {
  const auto b = model::read_file(p);
  return std::string(b.begin(), b.end());
}

Outcome geometry(Context&) {
  using namespace pointcloud;
  const auto poses = make_fixed_poses(kDefaultViews, kDefaultRadius, 192, 192);
  const PointCloud pc = fuse(render_depths(unit_sphere(), poses));
  double off = 0;
  for (const auto& p : pc.points) off = std::max(off, std::abs(std::hypot(double(p[0]), double(p[1]), double(p[2])) - 1));
  const double even = chamfer(pc, even_unit_sphere(10000));
  const double iid = chamfer(pc, sample_unit_sphere(10000, 5));

  const fs::path dir = E2EMD_TEST_DATA_DIR;
  const std::string pcd = slurp(dir / "four_points.pcd");
  bool golden = write_pcd(read_pcd(pcd)) == pcd && pcd_to_obj(pcd) == slurp(dir / "four_points.obj");
  golden = golden && write_obj(read_pcd(pcd)) == slurp(dir / "four_points.obj");
  golden = golden && write_pcd(PointCloud{{{0, 0, 0}}}) == slurp(dir / "single_point.pcd");
  golden = golden && write_pcd(PointCloud{}) == slurp(dir / "empty.pcd") && write_obj(PointCloud{}) == slurp(dir / "empty.obj");
  return {off < 1e-3 && even < 0.02 && golden,
          std::to_string(pc.size()) + " points from 8 views at 192x192, max |r - 1| " + fmt("%.2e", off) +
              ", chamfer vs even sphere sample " + fmt("%.4f", even) + " (vs i.i.d. sample " + fmt("%.4f", iid) +
              "), PCD/OBJ goldens " + (golden ? "match" : "differ")};
}

double mean_chamfer(const pointcloud::GeneratorSpec& spec, const nn::WeightStore& w, const pointcloud::GeneratorData& d) {
  const std::size_t per = nn::element_count(spec.encoder.input);
  double total = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    nn::Tensor img(spec.encoder.input);
    std::copy(d.images.ptr() + i * per, d.images.ptr() + (i + 1) * per, img.begin());
    const auto pred = pointcloud::generate(spec, w, img);
    // An empty prediction cannot be scored; count it as a miss.
    total += pred.empty() ? INFINITY : pointcloud::chamfer(pred, pointcloud::fuse(pointcloud::target_depths(spec, d.targets, i)));
  }
  return total / static_cast<double>(d.size());
}

Outcome generator(Context&) {
  using namespace pointcloud;
  const auto t0 = Clock::now();
  const auto spec = build_generator();
  const auto init = init_generator(spec, derive_seed(kSeed, 0x9e17));

  const auto one = synth_generator_data(spec, 1, 11);
  GeneratorTrainConfig single;
  single.epochs = 500;  // one sample, batch 1: one step per epoch
  single.batch_size = 1;
  const auto fit = train_generator(spec, init, one, nullptr, single);
  const double overfit = mean_chamfer(spec, fit.weights, one);
  const double t_overfit = seconds_since(t0);

  const auto train = synth_generator_data(spec, 200, 12);
  const auto val = synth_generator_data(spec, 20, 13);
  const auto held = synth_generator_data(spec, 20, 14);
  GeneratorTrainConfig cfg;
  cfg.epochs = 40;
  cfg.batch_size = 8;
  const auto gen = train_generator(spec, init, train, &val, cfg);
  const double heldout = mean_chamfer(spec, gen.weights, held);
  const double secs = seconds_since(t0);
  return {overfit < 0.05 && heldout < 0.15 && secs <= 1200,
          "single shape 500 steps: chamfer " + fmt("%.4f", overfit) + " (" + fmt("%.0f", t_overfit) +
              " s); 200 shapes, 40 epochs: held-out chamfer " + fmt("%.4f", heldout) + " on 20 unseen shapes; " +
              fmt("%.0f", secs) + " s total"};
}

Outcome service_criterion(Context& ctx) {
  const Desk& d = desk(ctx);
  const fs::path w = ctx.work / "desk.e2ew";
  model::save_weights(d.weights, w);
  model::save_spec(d.spec, model::spec_path_for(w));
  service::ServiceConfig cfg;
  cfg.port = 0;
  cfg.classifier_weights = w;
  cfg.threads = 16;
  service::Service svc(cfg);
  svc.load();
  const int port = svc.bind();
  std::thread server([&] { svc.listen(); });

  std::vector<std::string> pngs;
  for (std::size_t i = 0; i < 20 && i < d.split.test.size(); ++i) pngs.push_back(slurp(d.dataset.samples[d.split.test[i]].source));

  httplib::Client client("127.0.0.1", port);
  client.set_read_timeout(30, 0);
  std::vector<double> latencies;
  std::size_t mismatched = 0, failed = 0;
  for (int round = 0; round < 5; ++round) {
    for (const auto& png : pngs) {
      const auto t0 = Clock::now();
      const auto res = client.Post("/api/diagnose", png, "image/png");
      latencies.push_back(seconds_since(t0));
      if (!res || res->status != 200) {
        ++failed;
        continue;
      }
      const auto bytes = std::vector<std::uint8_t>(png.begin(), png.end());
      const auto offline = model::predict(d.spec, d.weights, data::preprocess_png(bytes, d.spec.network.input));
      const auto want = model::to_json(model::Diagnosis{offline.label, offline.confidence, d.spec.version}).dump();
      if (res->body != want) ++mismatched;
    }
  }
  std::sort(latencies.begin(), latencies.end());
  const double p95 = latencies[static_cast<std::size_t>(std::ceil(0.95 * latencies.size())) - 1];

  std::vector<std::future<std::string>> futures;
  for (int i = 0; i < 16; ++i) {
    futures.push_back(std::async(std::launch::async, [&] {
      httplib::Client c("127.0.0.1", port);
      c.set_read_timeout(60, 0);
      const auto res = c.Post("/api/diagnose", pngs.front(), "image/png");
      return res && res->status == 200 ? res->body : std::string("<failed>");
    }));
  }
  std::vector<std::string> bodies;
  for (auto& f : futures) bodies.push_back(f.get());
  const bool identical = bodies.front() != "<failed>" && std::all_of(bodies.begin(), bodies.end(),
                                                                       [&](const std::string& b) { return b == bodies.front(); });
  svc.stop();
  server.join();
  return {p95 < 2.0 && mismatched == 0 && failed == 0 && identical,
          std::to_string(latencies.size()) + " requests: p95 " + fmt("%.3f", p95) + " s, offline mismatches " +
              std::to_string(mismatched) + ", failures " + std::to_string(failed) + "; 16 concurrent bodies " +
              (identical ? "identical" : "differ") + "; built without the web UI"};
}

struct Criterion {
  const char* name;
  Outcome (*run)(Context&);
};

constexpr Criterion kCriteria[] = {
    {"gradient-fidelity", gradient_fidelity}, {"oracle-equivalence", oracle_equivalence},
    {"overfit", overfit},                     {"desk-classification", desk_classification},
    {"pruning", pruning},                     {"weight-format", weight_format},
    {"geometry", geometry},                   {"generator", generator},
    {"service", service_criterion},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> wanted(argv + 1, argv + argc);
  for (const auto& w : wanted) {
    if (std::none_of(std::begin(kCriteria), std::end(kCriteria), [&](const Criterion& c) { return w == c.name; })) {
      std::cerr << "unknown criterion " << w << "; known:";
      for (const auto& c : kCriteria) std::cerr << " " << c.name;
      std::cerr << "\n";
      return 2;
    }
  }
  Context ctx;
  if (const char* dir = std::getenv("E2EMD_ACCEPT_DIR"); dir && *dir) {
    ctx.work = dir;
  } else {
    ctx.work = fs::temp_directory_path() / ("e2emd_acceptance_" + std::to_string(::getpid()));
  }
  fs::create_directories(ctx.work);

  int failed = 0;
  for (const auto& c : kCriteria) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.name) == wanted.end()) continue;
    Outcome o;
    try {
      o = c.run(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << c.name << ": " << o.detail << std::endl;
  }
  return failed ? 1 : 0;
}
