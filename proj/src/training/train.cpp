#include "e2emd/training/train.hpp"

#include <cmath>
#include <cstring>

#include "e2emd/model/predict.hpp"

namespace e2emd::training {

using namespace e2emd::nn;
using data::LabeledImage;

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  nn::validate(adam);
  augmentation.validate();
}

namespace {

void apply_mask(WeightStore& store, const WeightMask& mask) {
  for (const auto& [name, keep] : mask) {
    auto it = store.find(name);
    if (it == store.end()) continue;
    if (keep.size() != it->second.size()) throw ConsistencyError("mask for " + name + " has the wrong length");
    for (std::size_t i = 0; i < keep.size(); ++i) {
      if (!keep[i]) it->second[i] = 0.0f;
    }
  }
}

}  // namespace

TrainResult train(const model::ModelSpec& spec, WeightStore weights, const std::vector<LabeledImage>& samples,
                  const data::DatasetSplit& split, const TrainConfig& cfg, const EpochCallback& on_epoch,
                  const WeightMask* mask) {
  cfg.validate();
  model::validate(spec);
  check_weights(spec.network, weights);
  if (split.train.empty()) throw DataError("training split is empty");
  for (const auto* part : {&split.train, &split.val}) {
    for (std::size_t i : *part) {
      if (i >= samples.size()) throw IndexError("split index " + std::to_string(i) + " out of range");
      if (samples[i].pixels.shape() != spec.network.input) {
        throw DimensionError("sample " + samples[i].source + " has shape " + shape_string(samples[i].pixels.shape()) +
                             ", model expects " + shape_string(spec.network.input));
      }
    }
  }
  const std::vector<std::size_t>& val = split.val.empty() ? split.train : split.val;
  if (mask) apply_mask(weights, *mask);

  const auto trainable = trainable_names(spec.network);
  AdamState state = AdamState::init(weights, trainable);
  const Shape& input = spec.network.input;
  const std::size_t per = element_count(input);

  // Separate key spaces so batch and sample numbers never collide.
  const std::uint64_t shuffle_seed = derive_seed(cfg.seed, 0x5f), augment_seed = derive_seed(cfg.seed, 0xa6),
                      dropout_seed = derive_seed(cfg.seed, 0xd0);

  TrainResult result;
  double best_accuracy = -1;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<std::size_t> order = split.train;
    Rng shuffle_rng(derive_seed(shuffle_seed, epoch));
    shuffle_rng.shuffle(std::span(order));

    double loss_sum = 0;
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_no) {
      const std::size_t m = std::min(cfg.batch_size, order.size() - start);
      Tensor batch(batched(m, input));
      std::vector<int> labels(m);
#pragma omp parallel for schedule(static)
      for (std::size_t j = 0; j < m; ++j) {
        const std::size_t idx = order[start + j];
        const LabeledImage& s = samples[idx];
        labels[j] = s.label;
        if (cfg.augment) {
          Rng rng(derive_seed(augment_seed, epoch, idx));
          const Tensor aug = data::augment(s.pixels, cfg.augmentation, rng);
          std::memcpy(batch.ptr() + j * per, aug.ptr(), per * sizeof(float));
        } else {
          std::memcpy(batch.ptr() + j * per, s.pixels.ptr(), per * sizeof(float));
        }
      }

      const PassOptions opts{Mode::train, cfg.exec, derive_seed(dropout_seed, epoch, batch_no)};
      auto res = backprop(spec.network, weights, batch, labels, opts);
      if (!std::isfinite(res.loss)) {
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(batch_no + 1));
      }
      for (const auto& [name, g] : res.grads) {
        if (!g.all_finite()) {
          throw DivergenceError("non-finite gradient for " + name + " at epoch " + std::to_string(epoch) +
                                ", batch " + std::to_string(batch_no + 1));
        }
      }
      if (mask) apply_mask(res.grads, *mask);
      adam_step(weights, res.grads, state, cfg.adam);
      if (mask) apply_mask(weights, *mask);
      loss_sum += static_cast<double>(res.loss) * m;
    }

    const Evaluation ev = evaluate(spec, weights, samples, val, cfg.exec);
    const EpochRecord rec{epoch, loss_sum / order.size(), ev.metrics.accuracy, ev.metrics.f1};
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (rec.val_accuracy > best_accuracy) {
      best_accuracy = rec.val_accuracy;
      result.best_epoch = epoch;
      result.weights = weights;
    }
  }
  return result;
}

Evaluation evaluate(const model::ModelSpec& spec, const WeightStore& weights, const std::vector<LabeledImage>& samples,
                    const std::vector<std::size_t>& indices, Exec exec) {
  if (indices.empty()) throw DataError("cannot evaluate on an empty sample set");
  Evaluation out;
  std::vector<int> labels;
  labels.reserve(indices.size());
  constexpr std::size_t kChunk = 64;
  for (std::size_t s = 0; s < indices.size(); s += kChunk) {
    const std::vector<std::size_t> part(indices.begin() + s, indices.begin() + std::min(indices.size(), s + kChunk));
    const Tensor probs = model::predict_probs(spec, weights, data::stack(samples, part), kChunk, exec);
    const std::size_t classes = spec.classes.size();
    for (std::size_t j = 0; j < part.size(); ++j) {
      out.predictions.push_back(static_cast<int>(model::argmax(probs.ptr() + j * classes, classes)));
      labels.push_back(samples[part[j]].label);
    }
  }
  out.metrics = metrics_from(confusion_of(labels, out.predictions));
  return out;
}

std::string history_line(const EpochRecord& r) {
  return nlohmann::json{{"epoch", r.epoch}, {"loss", r.loss}, {"val_accuracy", r.val_accuracy}, {"val_f1", r.val_f1}}
      .dump();
}

}  // namespace e2emd::training
