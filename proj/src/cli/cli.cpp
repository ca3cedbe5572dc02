#include "e2emd/cli/cli.hpp"

#include <csignal>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "e2emd/data/image.hpp"
#include "e2emd/data/npy.hpp"
#include "e2emd/data/synth_cells.hpp"
#include "e2emd/model/predict.hpp"
#include "e2emd/model/weight_io.hpp"
#include "e2emd/pointcloud/formats.hpp"
#include "e2emd/pointcloud/generator.hpp"
#include "e2emd/service/service.hpp"
#include "e2emd/training/prune.hpp"

namespace e2emd::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Seed fan-out: every stream below derives from the one --seed value.
constexpr std::uint64_t kInitStream = 0x1a17;
constexpr std::uint64_t kGenInitStream = 0x9e17;

// "W.e2ew" -> "W<suffix>".
fs::path sibling(const fs::path& weights, const std::string& suffix) {
  fs::path p = weights;
  p.replace_extension();
  p += suffix;
  return p;
}

void banner(std::ostream& err, const std::string& command, const json& config) {
  err << "e2emd " << command << " config " << config.dump() << "\n";
}

void write_text(const fs::path& path, const std::string& text) {
  model::write_file(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text(const fs::path& path) {
  const auto bytes = model::read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

nn::Tensor read_image(const fs::path& path, const nn::Shape& input) { return data::preprocess_png(model::read_file(path), input); }

// How a classifier was trained; written next to its weights so evaluate and
// prune rebuild the same split without repeating every flag.
struct RunInfo {
  fs::path data;
  std::size_t limit = 0;
  std::uint64_t seed = 42;

  json to_json() const { return {{"data", data.string()}, {"limit", limit}, {"seed", seed}}; }
};

std::optional<RunInfo> read_run_info(const fs::path& weights) {
  const fs::path p = sibling(weights, ".run.json");
  if (!fs::exists(p)) return std::nullopt;
  const json j = json::parse(read_text(p));
  return RunInfo{j.at("data").get<std::string>(), j.at("limit").get<std::size_t>(), j.at("seed").get<std::uint64_t>()};
}

struct LoadedData {
  data::Dataset dataset;
  data::DatasetSplit split;
};

LoadedData load_split(const RunInfo& info, const nn::Shape& input, std::ostream& err) {
  LoadedData d{data::load_dataset(info.data, input, info.limit, info.seed), {}};
  for (const auto& w : d.dataset.report.warnings) err << "warning: skipped " << w << "\n";
  d.split = data::split(data::labels_of(d.dataset.samples), {}, info.seed);
  err << "data " << d.dataset.report.loaded << " images (train " << d.split.train.size() << ", val "
      << d.split.val.size() << ", test " << d.split.test.size() << ")\n";
  return d;
}

const std::vector<std::size_t>& split_part(const LoadedData& d, const std::string& name) {
  if (name == "train") return d.split.train;
  if (name == "val") return d.split.val;
  return d.split.test;
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
  fs::path data, out, pretrained;
  std::string scale = "mini", version;
  std::size_t size = 0, limit = 0, epochs = training::kDefaultEpochs, batch = 32;
  std::uint64_t seed = 42;
  double lr = 1e-4;
  bool no_augment = false, train_features = false, reference = false;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const model::Scale scale = model::parse_scale(a.scale);
  const std::size_t size = a.size ? a.size : scale == model::Scale::mini ? 64 : 224;
  const bool freeze = !a.pretrained.empty() && !a.train_features;
  training::TrainConfig cfg;
  cfg.epochs = a.epochs;
  cfg.batch_size = a.batch;
  cfg.seed = a.seed;
  cfg.adam.learning_rate = a.lr;
  cfg.augment = !a.no_augment;
  cfg.exec = a.reference ? nn::Exec::reference : nn::Exec::parallel;
  cfg.validate();
  const std::string version = a.version.empty() ? "e2emd-" + a.scale + "-" + std::to_string(a.seed) : a.version;
  banner(err, "train",
         {{"data", a.data.string()}, {"out", a.out.string()}, {"scale", a.scale}, {"size", size}, {"limit", a.limit},
          {"epochs", cfg.epochs}, {"batch", cfg.batch_size}, {"lr", cfg.adam.learning_rate}, {"seed", a.seed},
          {"augment", cfg.augment}, {"pretrained", a.pretrained.string()}, {"frozen_features", freeze},
          {"version", version}, {"exec", a.reference ? "reference" : "parallel"}});

  model::ModelSpec spec =
      model::append_transfer_head(model::build_vgg19({3, size, size}, scale), model::kDefaultHeadWidths, freeze);
  spec.version = version;
  nn::WeightStore weights = nn::init_weights(spec.network, derive_seed(a.seed, kInitStream));
  if (!a.pretrained.empty()) {
    for (auto& [name, t] : model::load_weights(a.pretrained)) {
      auto it = weights.find(name);
      if (it == weights.end()) throw ConfigError("pretrained tensor " + name + " is not part of the model");
      if (it->second.shape() != t.shape()) {
        throw DimensionError("pretrained tensor " + name + " has shape " + nn::shape_string(t.shape()) + ", model needs " +
                             nn::shape_string(it->second.shape()));
      }
      it->second = std::move(t);
    }
  }

  const RunInfo info{fs::absolute(a.data), a.limit, a.seed};
  const LoadedData d = load_split(info, spec.network.input, err);
  std::ofstream history(sibling(a.out, ".history.jsonl"), std::ios::trunc);
  if (!history) throw Error("io_error", "cannot write the history log next to " + a.out.string());
  auto result = training::train(spec, std::move(weights), d.dataset.samples, d.split, cfg,
                                [&](const training::EpochRecord& r) {
                                  const std::string line = training::history_line(r);
                                  history << line << "\n" << std::flush;
                                  err << line << "\n";
                                });
  model::save_weights(result.weights, a.out);
  model::save_spec(spec, model::spec_path_for(a.out));
  write_text(sibling(a.out, ".run.json"), info.to_json().dump(2) + "\n");
  json summary{{"weights", a.out.string()}, {"best_epoch", result.best_epoch}, {"epochs", result.history.size()}};
  // Tiny datasets can floor the test split to nothing.
  summary["test"] = d.split.test.empty()
                        ? json(nullptr)
                        : training::to_json(
                              training::evaluate(spec, result.weights, d.dataset.samples, d.split.test, cfg.exec).metrics);
  out << summary.dump() << "\n";
  return kOk;
}

// --- evaluate ---------------------------------------------------------------

struct EvalArgs {
  fs::path weights, data;
  std::string split = "test";
  std::size_t limit = 0;
  std::uint64_t seed = 42;
  bool limit_set = false, seed_set = false;
};

RunInfo resolve_info(const fs::path& weights, const fs::path& data, std::size_t limit, bool limit_set,
                     std::uint64_t seed, bool seed_set) {
  RunInfo info = read_run_info(weights).value_or(RunInfo{});
  if (!data.empty()) info.data = data;
  if (limit_set) info.limit = limit;
  if (seed_set) info.seed = seed;
  if (info.data.empty()) throw ConfigError("--data is required (no run record next to " + weights.string() + ")");
  return info;
}

int cmd_evaluate(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const RunInfo info = resolve_info(a.weights, a.data, a.limit, a.limit_set, a.seed, a.seed_set);
  banner(err, "evaluate",
         {{"weights", a.weights.string()}, {"data", info.data.string()}, {"split", a.split}, {"limit", info.limit},
          {"seed", info.seed}});
  const auto spec = model::load_spec(model::spec_path_for(a.weights));
  const auto weights = model::load_weights(a.weights);
  nn::check_weights(spec.network, weights);
  const LoadedData d = load_split(info, spec.network.input, err);
  std::vector<std::size_t> indices;
  if (a.split == "all") {
    for (std::size_t i = 0; i < d.dataset.samples.size(); ++i) indices.push_back(i);
  } else {
    indices = split_part(d, a.split);
  }
  if (indices.empty()) throw DataError("the " + a.split + " split is empty");
  out << training::to_json(training::evaluate(spec, weights, d.dataset.samples, indices).metrics).dump() << "\n";
  return kOk;
}

// --- prune ------------------------------------------------------------------

struct PruneArgs {
  fs::path weights, data, out;
  double sparsity = 0.5;
  std::string scope = "global";
  std::size_t fine_tune = 3, limit = 0;
  std::uint64_t seed = 42;
  bool limit_set = false, seed_set = false;
};

int cmd_prune(const PruneArgs& a, std::ostream& out, std::ostream& err) {
  const fs::path dest = a.out.empty() ? sibling(a.weights, ".pruned.e2ew") : a.out;
  const training::PruneConfig pcfg{a.sparsity, training::parse_scope(a.scope)};
  if (!(a.sparsity >= 0 && a.sparsity <= 1)) throw ConfigError("--sparsity must be in [0, 1]");
  std::optional<RunInfo> info;
  if (a.fine_tune > 0 || !a.data.empty()) info = resolve_info(a.weights, a.data, a.limit, a.limit_set, a.seed, a.seed_set);
  banner(err, "prune",
         {{"weights", a.weights.string()}, {"out", dest.string()}, {"sparsity", a.sparsity}, {"scope", a.scope},
          {"fine_tune", a.fine_tune}, {"data", info ? info->data.string() : ""}, {"seed", info ? info->seed : a.seed}});

  const auto spec = model::load_spec(model::spec_path_for(a.weights));
  const auto weights = model::load_weights(a.weights);
  nn::check_weights(spec.network, weights);
  auto pruned = training::prune_magnitude(weights, pcfg);
  json result{{"prune", training::to_json(pruned.report)}};
  nn::WeightStore final_weights = pruned.weights;
  if (info) {
    const LoadedData d = load_split(*info, spec.network.input, err);
    const auto& held = d.split.val.empty() ? d.split.train : d.split.val;
    const double before = training::evaluate(spec, weights, d.dataset.samples, held).metrics.accuracy;
    training::TrainConfig cfg;
    cfg.seed = info->seed;
    final_weights = training::fine_tune(spec, pruned.weights, d.dataset.samples, d.split, a.fine_tune, cfg,
                                        [&](const training::EpochRecord& r) { err << training::history_line(r) << "\n"; });
    const double after = training::evaluate(spec, final_weights, d.dataset.samples, held).metrics.accuracy;
    result["val_accuracy_before"] = before;
    result["val_accuracy_after"] = after;
    result["achieved_after_fine_tune"] = model::prunable_sparsity(final_weights);
  }
  model::save_weights(final_weights, dest);
  model::save_spec(spec, model::spec_path_for(dest));
  if (info) write_text(sibling(dest, ".run.json"), info->to_json().dump(2) + "\n");
  result["weights"] = dest.string();
  write_text(sibling(dest, ".prune.json"), result.dump(2) + "\n");
  out << result.dump() << "\n";
  return kOk;
}

// --- predict / reconstruct --------------------------------------------------

int cmd_predict(const fs::path& weights_path, const fs::path& image, std::ostream& out, std::ostream& err) {
  banner(err, "predict", {{"weights", weights_path.string()}, {"image", image.string()}});
  const auto spec = model::load_spec(model::spec_path_for(weights_path));
  const auto weights = model::load_weights(weights_path);
  nn::check_weights(spec.network, weights);
  const auto d = model::predict(spec, weights, read_image(image, spec.network.input));
  out << model::to_json(model::Diagnosis{d.label, d.confidence, spec.version}).dump() << "\n";
  return kOk;
}

int cmd_reconstruct(const fs::path& gen_weights, const fs::path& image, const std::string& format,
                    const fs::path& dest, std::ostream& out, std::ostream& err) {
  if (format != "obj" && format != "pcd") throw ConfigError("--format must be obj or pcd");
  banner(err, "reconstruct",
         {{"gen_weights", gen_weights.string()}, {"image", image.string()}, {"format", format}, {"out", dest.string()}});
  const auto spec = pointcloud::load_generator_spec(model::spec_path_for(gen_weights));
  const auto weights = model::load_weights(gen_weights);
  nn::check_weights(spec.combined(), weights);
  const auto pc = pointcloud::generate(spec, weights, read_image(image, spec.encoder.input));
  write_text(dest, format == "obj" ? pointcloud::write_obj(pc) : pointcloud::write_pcd(pc));
  out << json{{"out", dest.string()}, {"points", pc.size()}, {"format", format}}.dump() << "\n";
  return kOk;
}

// --- synth ------------------------------------------------------------------

struct SynthArgs {
  std::string kind = "depths";
  std::size_t count = 200, views = pointcloud::kDefaultViews, size = 32, input = 64;
  fs::path out;
  std::uint64_t seed = 42;
};

int cmd_synth(const SynthArgs& a, std::ostream& out, std::ostream& err) {
  banner(err, "synth",
         {{"kind", a.kind}, {"count", a.count}, {"out", a.out.string()}, {"seed", a.seed}, {"views", a.views},
          {"size", a.size}, {"input", a.input}});
  if (a.count == 0) throw ConfigError("--count must be positive");
  if (a.kind == "cells") {
    data::write_synth_cells(a.out, a.count, a.seed);
    out << json{{"out", a.out.string()}, {"per_class", a.count}}.dump() << "\n";
    return kOk;
  }
  if (a.kind != "depths") throw ConfigError("--kind must be depths or cells");
  const auto spec = pointcloud::build_generator({3, a.input, a.input}, a.views, a.size);
  const auto d = pointcloud::synth_generator_data(spec, a.count, a.seed);
  pointcloud::save_generator_data(d, a.views, a.out);
  out << json{{"out", a.out.string()},
              {"images", pointcloud::images_path_for(a.out).string()},
              {"samples", a.count},
              {"shape", {a.count, a.views, 2, a.size, a.size}}}
             .dump()
      << "\n";
  return kOk;
}

// --- train-gen --------------------------------------------------------------

struct TrainGenArgs {
  fs::path data, out, val;
  std::size_t epochs = 100, batch = 8, latent = 128;
  double lr = 1e-3, radius = pointcloud::kDefaultRadius;
  std::uint64_t seed = 42;
};

int cmd_train_gen(const TrainGenArgs& a, std::ostream& out, std::ostream& err) {
  const auto depth = data::parse_npy(model::read_file(a.data));
  const auto images = data::parse_npy(model::read_file(pointcloud::images_path_for(a.data)));
  if (depth.shape.size() != 5 || depth.shape[3] != depth.shape[4] || images.shape.size() != 4) {
    throw DataError("expected depths (samples, V, 2, H, H) and images (samples, C, H, W)");
  }
  const std::size_t views = depth.shape[1], size = depth.shape[3];
  const nn::Shape input{images.shape[1], images.shape[2], images.shape[3]};
  auto spec = pointcloud::build_generator(input, views, size, a.latent, a.radius);
  spec.version = "e2emd-gen-" + std::to_string(a.seed);
  pointcloud::GeneratorTrainConfig cfg;
  cfg.epochs = a.epochs;
  cfg.batch_size = a.batch;
  cfg.seed = a.seed;
  cfg.adam.learning_rate = a.lr;
  banner(err, "train-gen",
         {{"data", a.data.string()}, {"val", a.val.string()}, {"out", a.out.string()}, {"epochs", a.epochs},
          {"batch", a.batch}, {"lr", a.lr}, {"seed", a.seed}, {"views", views}, {"size", size}, {"latent", a.latent},
          {"input", input}});
  const auto train = pointcloud::load_generator_data(spec, a.data);
  std::optional<pointcloud::GeneratorData> val;
  if (!a.val.empty()) val = pointcloud::load_generator_data(spec, a.val);
  std::ofstream history(sibling(a.out, ".history.jsonl"), std::ios::trunc);
  auto result = pointcloud::train_generator(spec, pointcloud::init_generator(spec, derive_seed(a.seed, kGenInitStream)),
                                            train, val ? &*val : nullptr, cfg, [&](const pointcloud::GeneratorEpoch& e) {
                                              const std::string line =
                                                  json{{"epoch", e.epoch}, {"loss", e.loss}, {"val_loss", e.val_loss}}.dump();
                                              history << line << "\n" << std::flush;
                                              err << line << "\n";
                                            });
  model::save_weights(result.weights, a.out);
  pointcloud::save_generator_spec(spec, model::spec_path_for(a.out));
  out << json{{"weights", a.out.string()},
              {"best_epoch", result.best_epoch},
              {"val_loss", result.history.at(result.best_epoch - 1).val_loss}}
             .dump()
      << "\n";
  return kOk;
}

// --- serve ------------------------------------------------------------------

service::Service* g_serving = nullptr;

extern "C" void on_signal(int) {
  if (g_serving) g_serving->stop();
}

struct ServeArgs {
  fs::path config, weights, gen_weights;
  std::string host;
  int port = -1;
};

int cmd_serve(const ServeArgs& a, std::ostream& err) {
  service::ServiceConfig cfg = a.config.empty() ? service::ServiceConfig{} : service::load_config(a.config);
  service::apply_env(cfg);
  if (!a.host.empty()) cfg.host = a.host;
  if (a.port >= 0) cfg.port = a.port;
  if (!a.weights.empty()) cfg.classifier_weights = a.weights;
  if (!a.gen_weights.empty()) cfg.generator_weights = a.gen_weights;
  cfg.validate();
  banner(err, "serve", service::to_json(cfg));
  // Weights parse before the socket opens, so no request ever sees a
  // half-configured service.
  auto models = service::load_models(cfg);
  service::Service svc(cfg);
  svc.install(std::move(models));
  const int port = svc.bind();
  err << "listening on " << cfg.host << ":" << port << "\n" << std::flush;
  g_serving = &svc;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  svc.listen();
  g_serving = nullptr;
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Malaria cell diagnosis: train, prune, predict, reconstruct, serve", "e2emd"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train the classifier on a Parasitized/Uninfected directory");
  train->add_option("--data", ta.data, "Dataset root")->required();
  train->add_option("--out", ta.out, "Output weight file (.e2ew)")->required();
  train->add_option("--scale", ta.scale, "Model scale")->check(CLI::IsMember({"mini", "full"}))->capture_default_str();
  train->add_option("--size", ta.size, "Input height = width (default 64 mini, 224 full)");
  train->add_option("--limit", ta.limit, "Train on a stratified subset of this many images (0 = all)");
  train->add_option("--epochs", ta.epochs)->capture_default_str()->check(CLI::PositiveNumber);
  train->add_option("--batch", ta.batch)->capture_default_str()->check(CLI::PositiveNumber);
  train->add_option("--lr", ta.lr, "Adam learning rate")->capture_default_str();
  train->add_option("--seed", ta.seed)->capture_default_str();
  train->add_option("--pretrained", ta.pretrained, "Feature weights to start from; freezes the features");
  train->add_option("--version", ta.version, "model_version string");
  train->add_flag("--no-augment", ta.no_augment);
  train->add_flag("--train-features", ta.train_features, "Fine-tune pretrained features instead of freezing them");
  train->add_flag("--reference", ta.reference, "Use the serial reference kernels");

  EvalArgs ea;
  auto* evaluate = app.add_subcommand("evaluate", "Print metrics of a trained classifier");
  evaluate->add_option("--weights", ea.weights)->required();
  evaluate->add_option("--data", ea.data, "Dataset root (default: from the run record)");
  evaluate->add_option("--split", ea.split)->check(CLI::IsMember({"train", "val", "test", "all"}))->capture_default_str();
  auto* eval_limit = evaluate->add_option("--limit", ea.limit);
  auto* eval_seed = evaluate->add_option("--seed", ea.seed);

  PruneArgs pa;
  auto* prune = app.add_subcommand("prune", "Magnitude-prune a classifier, then fine-tune");
  prune->add_option("--weights", pa.weights)->required();
  prune->add_option("--sparsity", pa.sparsity)->capture_default_str();
  prune->add_option("--scope", pa.scope)->check(CLI::IsMember({"global", "per-tensor"}))->capture_default_str();
  prune->add_option("--fine-tune", pa.fine_tune, "Fine-tuning epochs")->capture_default_str();
  prune->add_option("--data", pa.data, "Dataset root (default: from the run record)");
  prune->add_option("--out", pa.out, "Output weights (default W.pruned.e2ew)");
  auto* prune_limit = prune->add_option("--limit", pa.limit);
  auto* prune_seed = prune->add_option("--seed", pa.seed);

  fs::path pw, pimg;
  auto* predict = app.add_subcommand("predict", "Diagnose one PNG");
  predict->add_option("--weights", pw)->required();
  predict->add_option("--image", pimg)->required();

  fs::path rw, rimg, rout;
  std::string rformat = "obj";
  auto* reconstruct = app.add_subcommand("reconstruct", "Write the point cloud of one PNG");
  reconstruct->add_option("--gen-weights", rw)->required();
  reconstruct->add_option("--image", rimg)->required();
  reconstruct->add_option("--format", rformat)->check(CLI::IsMember({"obj", "pcd"}))->capture_default_str();
  reconstruct->add_option("--out", rout)->required();

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Write synthetic generator data (NPY) or cell images");
  synth->add_option("--kind", sa.kind)->check(CLI::IsMember({"depths", "cells"}))->capture_default_str();
  synth->add_option("--count", sa.count, "Samples (depths) or images per class (cells)")->capture_default_str();
  synth->add_option("--out", sa.out, "D.npy for depths, a directory for cells")->required();
  synth->add_option("--seed", sa.seed)->capture_default_str();
  synth->add_option("--views", sa.views)->capture_default_str()->check(CLI::PositiveNumber);
  synth->add_option("--size", sa.size, "Depth map size")->capture_default_str();
  synth->add_option("--input", sa.input, "Input image size")->capture_default_str();

  TrainGenArgs ga;
  auto* train_gen = app.add_subcommand("train-gen", "Train the point-cloud generator on NPY depth data");
  train_gen->add_option("--data", ga.data)->required();
  train_gen->add_option("--val", ga.val, "Validation NPY");
  train_gen->add_option("--out", ga.out)->required();
  train_gen->add_option("--epochs", ga.epochs)->capture_default_str()->check(CLI::PositiveNumber);
  train_gen->add_option("--batch", ga.batch)->capture_default_str()->check(CLI::PositiveNumber);
  train_gen->add_option("--lr", ga.lr)->capture_default_str();
  train_gen->add_option("--latent", ga.latent)->capture_default_str();
  train_gen->add_option("--seed", ga.seed)->capture_default_str();

  ServeArgs va;
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--config", va.config, "Service JSON config");
  serve->add_option("--host", va.host);
  serve->add_option("--port", va.port);
  serve->add_option("--weights", va.weights, "Classifier weights (overrides the config)");
  serve->add_option("--gen-weights", va.gen_weights);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsageError;
  }

  try {
    if (*train) return cmd_train(ta, out, err);
    if (*evaluate) {
      ea.limit_set = eval_limit->count() > 0;
      ea.seed_set = eval_seed->count() > 0;
      return cmd_evaluate(ea, out, err);
    }
    if (*prune) {
      pa.limit_set = prune_limit->count() > 0;
      pa.seed_set = prune_seed->count() > 0;
      return cmd_prune(pa, out, err);
    }
    if (*predict) return cmd_predict(pw, pimg, out, err);
    if (*reconstruct) return cmd_reconstruct(rw, rimg, rformat, rout, out, err);
    if (*synth) return cmd_synth(sa, out, err);
    if (*train_gen) return cmd_train_gen(ga, out, err);
    if (*serve) return cmd_serve(va, err);
  } catch (const Error& e) {
    err << "error [" << e.code() << "]: " << e.what() << "\n";
    return kRuntimeError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kUsageError;
}

}  // namespace e2emd::cli
