#pragma once

#include <string>
#include <vector>

#include "e2emd/model/model_spec.hpp"
#include "e2emd/nn/pass.hpp"
#include "json.hpp"

namespace e2emd::model {

struct Diagnosis {
  std::string label;
  float confidence = 0.0f;
  std::string model_version;
  std::size_t class_index = 0;
};

// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(const float* values, std::size_t count);

Diagnosis diagnosis_from_probs(const float* probs, const std::vector<std::string>& classes,
                               const std::string& model_version);

// Inference-mode forward pass on one C x H x W image.
Diagnosis predict(const ModelSpec& spec, const nn::WeightStore& weights, const nn::Tensor& image,
                  nn::Exec exec = nn::Exec::parallel);

// Class probabilities for a batch N x C x H x W, evaluated in chunks of
// `chunk` samples. Row i depends only on sample i.
nn::Tensor predict_probs(const ModelSpec& spec, const nn::WeightStore& weights, const nn::Tensor& batch,
                         std::size_t chunk = 64, nn::Exec exec = nn::Exec::parallel);

// Wire form: {"confidence", "label", "model_version"} (keys sorted).
nlohmann::json to_json(const Diagnosis& d);

}  // namespace e2emd::model
