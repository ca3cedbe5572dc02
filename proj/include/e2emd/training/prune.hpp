#pragma once

#include "e2emd/training/train.hpp"
#include "json.hpp"

namespace e2emd::training {

enum class PruneScope { global, per_tensor };

struct PruneConfig {
  double sparsity = 0.5;
  PruneScope scope = PruneScope::global;
};

struct PruneReport {
  double target = 0;
  double achieved = 0;  // zero fraction over the prunable tensors
  std::size_t prunable = 0;
  std::size_t zeroed = 0;
  std::size_t dense_bytes = 0;
  std::size_t sparse_bytes = 0;
  std::size_t bytes_saved() const { return dense_bytes > sparse_bytes ? dense_bytes - sparse_bytes : 0; }
};

struct PruneResult {
  nn::WeightStore weights;
  PruneReport report;
};

// Zeroes the k = floor(s * n) smallest-magnitude kernel elements of each
// scope (all kernels together, or each kernel separately). Ties are broken
// by (tensor name, flat index). Biases are never touched.
PruneResult prune_magnitude(const nn::WeightStore& weights, const PruneConfig& cfg);

// Mask of the currently nonzero elements of every prunable tensor.
WeightMask zero_mask(const nn::WeightStore& weights);

// Retrains with pruned positions held at zero. 0 epochs returns the input.
nn::WeightStore fine_tune(const model::ModelSpec& spec, const nn::WeightStore& pruned,
                          const std::vector<data::LabeledImage>& samples, const data::DatasetSplit& split,
                          std::size_t epochs, TrainConfig cfg, const EpochCallback& on_epoch = {});

nlohmann::json to_json(const PruneReport& r);

PruneScope parse_scope(const std::string& text);

}  // namespace e2emd::training
