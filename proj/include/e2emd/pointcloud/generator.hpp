#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "e2emd/nn/adam.hpp"
#include "e2emd/nn/pass.hpp"
#include "e2emd/pointcloud/geometry.hpp"
#include "json.hpp"

namespace e2emd::pointcloud {

// Encoder (image -> latent) and decoder (latent -> V*2 x H x W; channel 2v
// is view v's depth, channel 2v+1 its mask logit).
struct GeneratorSpec {
  nn::Network encoder;
  nn::Network decoder;
  std::size_t views = kDefaultViews;
  std::size_t height = 32, width = 32;
  double radius = kDefaultRadius;
  double fov_deg = kDefaultFovDeg;
  double mask_threshold = 0.5;
  std::string version = "unversioned";

  // Encoder layers followed by decoder layers, as one network.
  nn::Network combined() const;
  std::vector<ViewPose> poses() const;
  void validate() const;
};

GeneratorSpec build_generator(const nn::Shape& input = {3, 64, 64}, std::size_t views = kDefaultViews,
                              std::size_t size = 32, std::size_t latent = 128, double radius = kDefaultRadius);

// He-uniform weights, with the depth channels' output bias set to the camera
// radius so that untrained depths start near the object.
nn::WeightStore init_generator(const GeneratorSpec& spec, std::uint64_t seed);

nlohmann::json to_json(const GeneratorSpec& spec);
GeneratorSpec generator_from_json(const nlohmann::json& j);
void save_generator_spec(const GeneratorSpec& spec, const std::filesystem::path& path);
GeneratorSpec load_generator_spec(const std::filesystem::path& path);

struct GeneratorLoss {
  double loss = 0, l1 = 0, bce = 0;
  nn::Tensor grad;  // d loss / d prediction
};

// l1: mean |depth error| over target-masked pixels; bce: mean binary cross
// entropy of the mask logits over all pixels. loss = l1_weight * l1 +
// bce_weight * bce.
GeneratorLoss generator_loss(const nn::Tensor& prediction, const nn::Tensor& target, double l1_weight = 1.0,
                             double bce_weight = 1.0);

// Paired training data: images N x C x H x W, targets N x 2V x h x w.
struct GeneratorData {
  nn::Tensor images;
  nn::Tensor targets;
  std::size_t size() const { return images.dim(0); }
};

// Procedural ellipsoid cells rendered into the spec's views.
GeneratorData synth_generator_data(const GeneratorSpec& spec, std::size_t count, std::uint64_t seed);

// The depth file holds (samples, V, 2, H, W); the images live in a sibling
// "<stem>.images.npy" holding (samples, C, H, W).
std::filesystem::path images_path_for(const std::filesystem::path& depth_npy);
void save_generator_data(const GeneratorData& data, std::size_t views, const std::filesystem::path& depth_npy);
// Throws DataError when the arrays do not match the spec.
GeneratorData load_generator_data(const GeneratorSpec& spec, const std::filesystem::path& depth_npy);

struct GeneratorTrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 8;
  std::uint64_t seed = 42;
  nn::AdamConfig adam{1e-3};
  double l1_weight = 1.0, bce_weight = 1.0;
  nn::Exec exec = nn::Exec::parallel;
};

struct GeneratorEpoch {
  std::size_t epoch = 0;
  double loss = 0;      // mean training loss
  double val_loss = 0;  // on the validation samples (training samples when none)
};

struct GeneratorTrainResult {
  nn::WeightStore weights;  // lowest validation loss, ties -> earlier epoch
  std::vector<GeneratorEpoch> history;
  std::size_t best_epoch = 0;
};

GeneratorTrainResult train_generator(const GeneratorSpec& spec, nn::WeightStore weights, const GeneratorData& train,
                                     const GeneratorData* val, const GeneratorTrainConfig& cfg,
                                     const std::function<void(const GeneratorEpoch&)>& on_epoch = {});

double evaluate_generator_loss(const GeneratorSpec& spec, const nn::WeightStore& weights, const GeneratorData& data,
                               const GeneratorTrainConfig& cfg);

// Depth maps and masks (sigmoid(logit) > threshold) of one decoded sample.
// Pixels with a non-positive or non-finite predicted depth are unmasked.
DepthMapSet decode_depths(const GeneratorSpec& spec, const float* output);

// Target array of one sample back to depth maps (mask channel > 0.5).
DepthMapSet target_depths(const GeneratorSpec& spec, const nn::Tensor& targets, std::size_t sample);

PointCloud generate(const GeneratorSpec& spec, const nn::WeightStore& weights, const nn::Tensor& image,
                    nn::Exec exec = nn::Exec::parallel);

}  // namespace e2emd::pointcloud
