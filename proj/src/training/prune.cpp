#include "e2emd/training/prune.hpp"

#include <algorithm>
#include <cmath>

#include "e2emd/model/weight_io.hpp"

namespace e2emd::training {

using namespace e2emd::nn;

namespace {

struct Entry {
  float magnitude;
  std::uint32_t tensor;  // rank in name order
  std::uint32_t index;
};

// Smallest magnitude first; ties by (tensor name, flat index).
bool before(const Entry& a, const Entry& b) {
  if (a.magnitude != b.magnitude) return a.magnitude < b.magnitude;
  if (a.tensor != b.tensor) return a.tensor < b.tensor;
  return a.index < b.index;
}

std::size_t prune_count(double s, std::size_t n) {
  // The epsilon keeps e.g. 0.29 * 100 from flooring to 28.
  return std::min(n, static_cast<std::size_t>(std::floor(s * static_cast<double>(n) + 1e-9)));
}

void zero_smallest(std::vector<Entry>& entries, double s, std::vector<Tensor*>& tensors) {
  const std::size_t k = prune_count(s, entries.size());
  if (k == 0) return;
  if (k < entries.size()) std::nth_element(entries.begin(), entries.begin() + (k - 1), entries.end(), before);
  for (std::size_t i = 0; i < k; ++i) (*tensors[entries[i].tensor])[entries[i].index] = 0.0f;
}

}  // namespace

PruneResult prune_magnitude(const WeightStore& weights, const PruneConfig& cfg) {
  if (!(cfg.sparsity >= 0.0 && cfg.sparsity <= 1.0)) throw ConfigError("sparsity must be in [0, 1]");
  PruneResult out{weights, {}};
  std::vector<Tensor*> tensors;
  for (auto& [name, t] : out.weights) {
    if (!model::is_prunable(name)) continue;
    if (t.size() > std::numeric_limits<std::uint32_t>::max()) throw DimensionError("tensor " + name + " too large to prune");
    tensors.push_back(&t);
  }
  auto entries_of = [&](std::uint32_t k) {
    std::vector<Entry> e(tensors[k]->size());
    for (std::uint32_t i = 0; i < e.size(); ++i) e[i] = {std::abs((*tensors[k])[i]), k, i};
    return e;
  };
  if (cfg.scope == PruneScope::global) {
    std::vector<Entry> all;
    for (std::uint32_t k = 0; k < tensors.size(); ++k) {
      auto e = entries_of(k);
      all.insert(all.end(), e.begin(), e.end());
    }
    zero_smallest(all, cfg.sparsity, tensors);
  } else {
    for (std::uint32_t k = 0; k < tensors.size(); ++k) {
      auto e = entries_of(k);
      zero_smallest(e, cfg.sparsity, tensors);
    }
  }

  auto& r = out.report;
  r.target = cfg.sparsity;
  for (const Tensor* t : tensors) {
    r.prunable += t->size();
    r.zeroed += static_cast<std::size_t>(std::count(t->begin(), t->end(), 0.0f));
  }
  r.achieved = model::prunable_sparsity(out.weights);
  r.dense_bytes = model::dense_encoded_bytes(out.weights);
  r.sparse_bytes = model::sparse_encoded_bytes(out.weights);
  return out;
}

WeightMask zero_mask(const WeightStore& weights) {
  WeightMask mask;
  for (const auto& [name, t] : weights) {
    if (!model::is_prunable(name)) continue;
    auto& keep = mask[name];
    keep.resize(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) keep[i] = t[i] != 0.0f;
  }
  return mask;
}

WeightStore fine_tune(const model::ModelSpec& spec, const WeightStore& pruned,
                      const std::vector<data::LabeledImage>& samples, const data::DatasetSplit& split,
                      std::size_t epochs, TrainConfig cfg, const EpochCallback& on_epoch) {
  if (epochs == 0) return pruned;
  cfg.epochs = epochs;
  const WeightMask mask = zero_mask(pruned);
  return train(spec, pruned, samples, split, cfg, on_epoch, &mask).weights;
}

nlohmann::json to_json(const PruneReport& r) {
  return {{"target_sparsity", r.target},   {"achieved_sparsity", r.achieved}, {"prunable", r.prunable},
          {"zeroed", r.zeroed},            {"dense_bytes", r.dense_bytes},    {"sparse_bytes", r.sparse_bytes},
          {"bytes_saved", r.bytes_saved()}};
}

PruneScope parse_scope(const std::string& text) {
  if (text == "global") return PruneScope::global;
  if (text == "per-tensor") return PruneScope::per_tensor;
  throw ConfigError("unknown prune scope '" + text + "' (expected global or per-tensor)");
}

}  // namespace e2emd::training
