#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "e2emd/data/augment.hpp"
#include "e2emd/data/dataset.hpp"
#include "e2emd/model/model_spec.hpp"
#include "e2emd/nn/adam.hpp"
#include "e2emd/nn/pass.hpp"
#include "e2emd/training/metrics.hpp"

namespace e2emd::training {

inline constexpr std::size_t kDefaultEpochs = 25;

struct TrainConfig {
  std::size_t epochs = kDefaultEpochs;
  std::size_t batch_size = 32;
  std::uint64_t seed = 42;
  nn::AdamConfig adam{};
  bool augment = true;
  data::AugmentConfig augmentation{};
  nn::Exec exec = nn::Exec::parallel;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double loss = 0;        // mean training loss over the epoch's samples
  double val_accuracy = 0;
  double val_f1 = 0;
};

struct TrainResult {
  nn::WeightStore weights;  // from the best-val-accuracy epoch (ties -> earlier)
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
};

// Positions allowed to change: 1 keeps a parameter trainable, 0 pins it at
// zero. Tensors absent from the mask are unconstrained.
using WeightMask = std::map<std::string, std::vector<std::uint8_t>>;

using EpochCallback = std::function<void(const EpochRecord&)>;

// Epoch e shuffles split.train with stream (seed:shuffle, e); sample i of
// that epoch is augmented with stream (seed:augment, e, i); dropout in batch
// b uses stream (seed:dropout, e, b). Validation uses split.val, or split.train when val is empty.
// Throws DivergenceError naming the epoch and batch on a non-finite loss.
TrainResult train(const model::ModelSpec& spec, nn::WeightStore weights, const std::vector<data::LabeledImage>& samples,
                  const data::DatasetSplit& split, const TrainConfig& cfg, const EpochCallback& on_epoch = {},
                  const WeightMask* mask = nullptr);

struct Evaluation {
  Metrics metrics;
  std::vector<int> predictions;
};

// Inference-mode predictions for samples[indices]; the confusion counts do
// not depend on chunking or thread count.
Evaluation evaluate(const model::ModelSpec& spec, const nn::WeightStore& weights,
                    const std::vector<data::LabeledImage>& samples, const std::vector<std::size_t>& indices,
                    nn::Exec exec = nn::Exec::parallel);

// One history record as a single JSON line.
std::string history_line(const EpochRecord& r);

}  // namespace e2emd::training
