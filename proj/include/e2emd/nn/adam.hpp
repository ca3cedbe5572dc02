#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "e2emd/nn/network.hpp"

namespace e2emd::nn {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

void validate(const AdamConfig& cfg);

// First/second moment estimates for each trainable tensor, plus the step
// counter.
template <typename T>
struct BasicAdamState {
  BasicWeightStore<T> first_moment;
  BasicWeightStore<T> second_moment;
  std::uint64_t step = 0;

  // Zero moments for the named tensors of `weights`.
  static BasicAdamState init(const BasicWeightStore<T>& weights, const std::vector<std::string>& trainable);
};

using AdamState = BasicAdamState<float>;

// Bias-corrected Adam update of every tensor tracked by `state`:
//   m = b1 m + (1-b1) g,  v = b2 v + (1-b2) g^2
//   w -= lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
// Throws ConsistencyError when a tracked tensor has no gradient.
template <typename T>
void adam_step(BasicWeightStore<T>& weights, const BasicWeightStore<T>& grads, BasicAdamState<T>& state,
               const AdamConfig& cfg);

}  // namespace e2emd::nn
