#include "e2emd/pointcloud/generator.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "e2emd/common/rng.hpp"
#include "e2emd/data/npy.hpp"
#include "e2emd/model/model_spec.hpp"
#include "e2emd/model/weight_io.hpp"
#include "e2emd/pointcloud/synth_shapes.hpp"

namespace e2emd::pointcloud {

using namespace e2emd::nn;

namespace {

constexpr const char* kOutputConv = "dec_conv3";

Tensor sample_slice(const Tensor& t, std::size_t first, std::size_t count) {
  Shape shape = t.shape();
  const std::size_t per = t.size() / shape[0];
  shape[0] = count;
  return Tensor(shape, std::vector<float>(t.ptr() + first * per, t.ptr() + (first + count) * per));
}

Tensor gather(const Tensor& t, const std::vector<std::size_t>& idx) {
  Shape shape = t.shape();
  const std::size_t per = t.size() / shape[0];
  shape[0] = idx.size();
  Tensor out(shape);
  for (std::size_t i = 0; i < idx.size(); ++i) std::memcpy(out.ptr() + i * per, t.ptr() + idx[i] * per, per * sizeof(float));
  return out;
}

}  // namespace

Network GeneratorSpec::combined() const {
  Network net{encoder.input, encoder.layers};
  net.layers.insert(net.layers.end(), decoder.layers.begin(), decoder.layers.end());
  return net;
}

std::vector<ViewPose> GeneratorSpec::poses() const { return make_fixed_poses(views, radius, width, height, fov_deg); }

void GeneratorSpec::validate() const {
  if (views < 1 || height < 1 || width < 1) throw ConfigError("generator needs V, H, W >= 1");
  if (!(mask_threshold > 0 && mask_threshold < 1)) throw ConfigError("mask threshold must be in (0, 1)");
  const Shape latent = infer_shapes(encoder).back();
  if (decoder.input != latent) {
    throw DimensionError("decoder input " + shape_string(decoder.input) + " differs from encoder output " +
                         shape_string(latent));
  }
  const Shape out = infer_shapes(decoder).back();
  if (out != Shape{2 * views, height, width}) {
    throw DimensionError("decoder output " + shape_string(out) + " must be V*2 x H x W = " +
                         shape_string({2 * views, height, width}));
  }
  make_fixed_poses(views, radius, width, height, fov_deg);
}

GeneratorSpec build_generator(const Shape& input, std::size_t views, std::size_t size, std::size_t latent,
                              double radius) {
  if (input.size() != 3 || input[1] % 8 != 0 || input[2] % 8 != 0) {
    throw ConfigError("generator input must be C x H x W with H, W divisible by 8, got " + shape_string(input));
  }
  if (size % 4 != 0 || size < 4) throw ConfigError("depth map size must be a positive multiple of 4");
  GeneratorSpec g;
  g.views = views;
  g.height = g.width = size;
  g.radius = radius;
  g.encoder.input = input;
  g.encoder.layers = {
      {"enc_conv1", Conv2D{16, 3, 3, 1, 1}}, {"enc_relu1", ReLU{}}, {"enc_pool1", MaxPool2D{2, 2}},
      {"enc_conv2", Conv2D{32, 3, 3, 1, 1}}, {"enc_relu2", ReLU{}}, {"enc_pool2", MaxPool2D{2, 2}},
      {"enc_conv3", Conv2D{64, 3, 3, 1, 1}}, {"enc_relu3", ReLU{}}, {"enc_pool3", MaxPool2D{2, 2}},
      {"enc_flatten", Flatten{}},            {"enc_fc", Dense{latent}}, {"enc_relu4", ReLU{}}};
  const std::size_t s = size / 4;
  g.decoder.input = {latent};
  g.decoder.layers = {{"dec_fc", Dense{32 * s * s}},
                      {"dec_relu1", ReLU{}},
                      {"dec_reshape", Reshape{{32, s, s}}},
                      {"dec_up1", Upsample2D{2}},
                      {"dec_conv1", Conv2D{32, 3, 3, 1, 1}},
                      {"dec_relu2", ReLU{}},
                      {"dec_up2", Upsample2D{2}},
                      {"dec_conv2", Conv2D{32, 3, 3, 1, 1}},
                      {"dec_relu3", ReLU{}},
                      {kOutputConv, Conv2D{2 * views, 3, 3, 1, 1}}};
  g.validate();
  return g;
}

WeightStore init_generator(const GeneratorSpec& spec, std::uint64_t seed) {
  WeightStore w = init_weights(spec.combined(), seed);
  Tensor& bias = w.at(std::string(kOutputConv) + "/bias");
  for (std::size_t v = 0; v < spec.views; ++v) bias[2 * v] = static_cast<float>(spec.radius);
  return w;
}

nlohmann::json to_json(const GeneratorSpec& spec) {
  return {{"encoder", model::network_to_json(spec.encoder)},
          {"decoder", model::network_to_json(spec.decoder)},
          {"views", spec.views},
          {"height", spec.height},
          {"width", spec.width},
          {"radius", spec.radius},
          {"fov_deg", spec.fov_deg},
          {"mask_threshold", spec.mask_threshold},
          {"version", spec.version}};
}

GeneratorSpec generator_from_json(const nlohmann::json& j) {
  GeneratorSpec g;
  try {
    g.encoder = model::network_from_json(j.at("encoder"));
    g.decoder = model::network_from_json(j.at("decoder"));
    g.views = j.at("views");
    g.height = j.at("height");
    g.width = j.at("width");
    g.radius = j.at("radius");
    g.fov_deg = j.value("fov_deg", kDefaultFovDeg);
    g.mask_threshold = j.value("mask_threshold", 0.5);
    g.version = j.value("version", std::string("unversioned"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed generator spec: ") + e.what());
  }
  g.validate();
  return g;
}

void save_generator_spec(const GeneratorSpec& spec, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("io_error", "cannot write " + path.string());
  out << to_json(spec).dump(2) << '\n';
}

GeneratorSpec load_generator_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io_error", "cannot read generator spec " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("generator spec " + path.string() + " is not valid JSON: " + e.what());
  }
  return generator_from_json(j);
}

GeneratorLoss generator_loss(const Tensor& pred, const Tensor& target, double l1_weight, double bce_weight) {
  if (pred.shape() != target.shape() || pred.rank() != 4 || pred.dim(1) % 2 != 0) {
    throw DimensionError("generator prediction " + shape_string(pred.shape()) + " vs target " +
                         shape_string(target.shape()));
  }
  const std::size_t n = pred.dim(0), channels = pred.dim(1), plane = pred.dim(2) * pred.dim(3);
  const std::size_t views = channels / 2;
  GeneratorLoss out;
  out.grad = Tensor(pred.shape());
  std::size_t masked = 0;
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t v = 0; v < views; ++v) {
      const float* m = target.ptr() + (s * channels + 2 * v + 1) * plane;
      for (std::size_t i = 0; i < plane; ++i) masked += m[i] > 0.5f;
    }
  const double l1_scale = l1_weight / static_cast<double>(std::max<std::size_t>(masked, 1));
  const double bce_scale = bce_weight / static_cast<double>(n * views * plane);
  double l1 = 0, bce = 0;
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t v = 0; v < views; ++v) {
      const std::size_t d0 = (s * channels + 2 * v) * plane, m0 = d0 + plane;
      for (std::size_t i = 0; i < plane; ++i) {
        if (target[m0 + i] > 0.5f) {
          const double diff = static_cast<double>(pred[d0 + i]) - target[d0 + i];
          l1 += std::abs(diff);
          out.grad[d0 + i] = static_cast<float>(l1_scale * ((diff > 0) - (diff < 0)));
        }
        const double z = pred[m0 + i], t = target[m0 + i];
        bce += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
        out.grad[m0 + i] = static_cast<float>(bce_scale * (1 / (1 + std::exp(-z)) - t));
      }
    }
  }
  out.l1 = l1 / static_cast<double>(std::max<std::size_t>(masked, 1));
  out.bce = bce / static_cast<double>(n * views * plane);
  out.loss = l1_weight * out.l1 + bce_weight * out.bce;
  return out;
}

GeneratorData synth_generator_data(const GeneratorSpec& spec, std::size_t count, std::uint64_t seed) {
  spec.validate();
  const Shape& in = spec.encoder.input;
  if (in[0] != 3 || in[1] != in[2]) throw ConfigError("synthetic generator data needs a square 3-channel input");
  const auto poses = spec.poses();
  const std::size_t plane = spec.height * spec.width;
  GeneratorData data{Tensor(batched(count, in)), Tensor({count, 2 * spec.views, spec.height, spec.width})};
  const std::size_t per_image = element_count(in), per_target = 2 * spec.views * plane;
  for (std::size_t i = 0; i < count; ++i) {
    const CellShape shape = random_cell_shape(derive_seed(seed, i, 0x9e));
    const Tensor img = render_input_image(shape, in[1], spec.radius);
    std::memcpy(data.images.ptr() + i * per_image, img.ptr(), per_image * sizeof(float));
    const DepthMapSet d = render_depths(shape, poses);
    for (std::size_t v = 0; v < spec.views; ++v) {
      float* dst = data.targets.ptr() + i * per_target + 2 * v * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        dst[p] = d.depth[v * plane + p];
        dst[plane + p] = d.mask[v * plane + p];
      }
    }
  }
  return data;
}

std::filesystem::path images_path_for(const std::filesystem::path& depth_npy) {
  auto p = depth_npy;
  p.replace_extension(".images.npy");
  return p;
}

void save_generator_data(const GeneratorData& data, std::size_t views, const std::filesystem::path& depth_npy) {
  const Tensor& t = data.targets;
  if (t.rank() != 4 || t.dim(1) != 2 * views) throw DimensionError("targets must be N x 2V x H x W");
  model::write_file(depth_npy, data::write_npy({t.dim(0), views, 2, t.dim(2), t.dim(3)}, std::span<const float>(t.ptr(), t.size())));
  model::write_file(images_path_for(depth_npy),
                    data::write_npy(data.images.shape(), std::span<const float>(data.images.ptr(), data.images.size())));
}

GeneratorData load_generator_data(const GeneratorSpec& spec, const std::filesystem::path& depth_npy) {
  const auto depth = data::parse_npy(model::read_file(depth_npy));
  const auto images = data::parse_npy(model::read_file(images_path_for(depth_npy)));
  if (depth.shape.size() != 5 || depth.shape[1] != spec.views || depth.shape[2] != 2 ||
      depth.shape[3] != spec.height || depth.shape[4] != spec.width || depth.shape[0] == 0) {
    throw DataError("depth array " + shape_string(depth.shape) + " must be (samples, " + std::to_string(spec.views) +
                    ", 2, " + std::to_string(spec.height) + ", " + std::to_string(spec.width) + ")");
  }
  if (images.shape != batched(depth.shape[0], spec.encoder.input)) {
    throw DataError("image array " + shape_string(images.shape) + " must be (samples, " +
                    shape_string(spec.encoder.input) + ") with " + std::to_string(depth.shape[0]) + " samples");
  }
  const std::size_t n = depth.shape[0];
  GeneratorData out{images.to_tensor(), depth.to_tensor().reshaped({n, 2 * spec.views, spec.height, spec.width})};
  return out;
}

double evaluate_generator_loss(const GeneratorSpec& spec, const WeightStore& weights, const GeneratorData& data,
                               const GeneratorTrainConfig& cfg) {
  const Network net = spec.combined();
  double total = 0;
  constexpr std::size_t kChunk = 16;
  for (std::size_t s = 0; s < data.size(); s += kChunk) {
    const std::size_t m = std::min(kChunk, data.size() - s);
    const Tensor out = infer(net, weights, sample_slice(data.images, s, m), {Mode::inference, cfg.exec, 0});
    total += generator_loss(out, sample_slice(data.targets, s, m), cfg.l1_weight, cfg.bce_weight).loss * m;
  }
  return total / static_cast<double>(data.size());
}

GeneratorTrainResult train_generator(const GeneratorSpec& spec, WeightStore weights, const GeneratorData& train,
                                     const GeneratorData* val, const GeneratorTrainConfig& cfg,
                                     const std::function<void(const GeneratorEpoch&)>& on_epoch) {
  spec.validate();
  if (cfg.epochs < 1 || cfg.batch_size < 1) throw ConfigError("generator training needs epochs, batch >= 1");
  validate(cfg.adam);
  if (train.size() == 0) throw DataError("generator training set is empty");
  if (train.images.shape() != batched(train.size(), spec.encoder.input) ||
      train.targets.shape() != Shape{train.size(), 2 * spec.views, spec.height, spec.width}) {
    throw DataError("generator training data does not match the spec");
  }
  const Network net = spec.combined();
  check_weights(net, weights);
  AdamState state = AdamState::init(weights, trainable_names(net));
  const GeneratorData& held = val && val->size() > 0 ? *val : train;

  GeneratorTrainResult result;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(cfg.seed, epoch, 0x9e4));
    rng.shuffle(std::span(order));
    double loss_sum = 0;
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_no) {
      const std::vector<std::size_t> idx(order.begin() + start,
                                         order.begin() + std::min(order.size(), start + cfg.batch_size));
      const PassOptions opts{Mode::train, cfg.exec, 0};
      const auto trace = forward(net, weights, gather(train.images, idx), opts);
      auto loss = generator_loss(trace.output(), gather(train.targets, idx), cfg.l1_weight, cfg.bce_weight);
      if (!std::isfinite(loss.loss)) {
        throw DivergenceError("non-finite generator loss at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(batch_no + 1));
      }
      const auto grads = backward(net, weights, trace, std::move(loss.grad), net.layers.size(), opts);
      adam_step(weights, grads, state, cfg.adam);
      loss_sum += loss.loss * idx.size();
    }
    const GeneratorEpoch rec{epoch, loss_sum / train.size(), evaluate_generator_loss(spec, weights, held, cfg)};
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (rec.val_loss < best) {
      best = rec.val_loss;
      result.best_epoch = epoch;
      result.weights = weights;
    }
  }
  return result;
}

DepthMapSet decode_depths(const GeneratorSpec& spec, const float* output) {
  DepthMapSet set;
  set.poses = spec.poses();
  set.height = spec.height;
  set.width = spec.width;
  const std::size_t plane = spec.height * spec.width;
  set.depth.resize(spec.views * plane);
  set.mask.resize(spec.views * plane);
  for (std::size_t v = 0; v < spec.views; ++v) {
    for (std::size_t i = 0; i < plane; ++i) {
      const float depth = output[2 * v * plane + i];
      const double z = output[(2 * v + 1) * plane + i];
      // A surface point at or behind the camera cannot be fused; drop it.
      const bool usable = std::isfinite(depth) && depth > 0;
      set.depth[v * plane + i] = usable ? depth : 0.0f;
      set.mask[v * plane + i] = usable && 1 / (1 + std::exp(-z)) > spec.mask_threshold;
    }
  }
  return set;
}

DepthMapSet target_depths(const GeneratorSpec& spec, const Tensor& targets, std::size_t sample) {
  const std::size_t per = 2 * spec.views * spec.height * spec.width;
  if (targets.size() < (sample + 1) * per) throw IndexError("target sample " + std::to_string(sample) + " out of range");
  DepthMapSet set = decode_depths(spec, targets.ptr() + sample * per);
  const std::size_t plane = spec.height * spec.width;
  for (std::size_t v = 0; v < spec.views; ++v)
    for (std::size_t i = 0; i < plane; ++i) set.mask[v * plane + i] = targets[sample * per + (2 * v + 1) * plane + i] > 0.5f;
  return set;
}

PointCloud generate(const GeneratorSpec& spec, const WeightStore& weights, const Tensor& image, Exec exec) {
  if (image.shape() != spec.encoder.input) {
    throw DimensionError("image shape " + shape_string(image.shape()) + " does not match generator input " +
                         shape_string(spec.encoder.input));
  }
  const Tensor out = infer(spec.combined(), weights, image.reshaped(batched(1, image.shape())), {Mode::inference, exec, 0});
  return fuse(decode_depths(spec, out.ptr()));
}

}  // namespace e2emd::pointcloud
