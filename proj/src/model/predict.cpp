#include "e2emd/model/predict.hpp"

#include <algorithm>
#include <cstring>

namespace e2emd::model {

using namespace e2emd::nn;

std::size_t argmax(const float* values, std::size_t count) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < count; ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

Diagnosis diagnosis_from_probs(const float* probs, const std::vector<std::string>& classes,
                               const std::string& model_version) {
  const std::size_t k = argmax(probs, classes.size());
  return {classes[k], probs[k], model_version, k};
}

Diagnosis predict(const ModelSpec& spec, const WeightStore& weights, const Tensor& image, Exec exec) {
  if (image.shape() != spec.network.input) {
    throw DimensionError("image shape " + shape_string(image.shape()) + " does not match model input " +
                         shape_string(spec.network.input));
  }
  const Tensor probs = infer(spec.network, weights, image.reshaped(batched(1, image.shape())),
                             PassOptions{Mode::inference, exec, 0});
  return diagnosis_from_probs(probs.ptr(), spec.classes, spec.version);
}

Tensor predict_probs(const ModelSpec& spec, const WeightStore& weights, const Tensor& batch, std::size_t chunk,
                     Exec exec) {
  if (batch.rank() != spec.network.input.size() + 1 ||
      !std::equal(spec.network.input.begin(), spec.network.input.end(), batch.shape().begin() + 1)) {
    throw DimensionError("batch shape " + shape_string(batch.shape()) + " does not match model input " +
                         shape_string(spec.network.input));
  }
  chunk = std::max<std::size_t>(chunk, 1);
  const std::size_t n = batch.dim(0), per = batch.size() / n, classes = spec.classes.size();
  Tensor out({n, classes});
  for (std::size_t s = 0; s < n; s += chunk) {
    const std::size_t m = std::min(chunk, n - s);
    std::vector<float> part(batch.ptr() + s * per, batch.ptr() + (s + m) * per);
    const Tensor probs =
        infer(spec.network, weights, Tensor(batched(m, spec.network.input), std::move(part)), {Mode::inference, exec, 0});
    std::memcpy(out.ptr() + s * classes, probs.ptr(), m * classes * sizeof(float));
  }
  return out;
}

nlohmann::json to_json(const Diagnosis& d) {
  return {{"confidence", d.confidence}, {"label", d.label}, {"model_version", d.model_version}};
}

}  // namespace e2emd::model
