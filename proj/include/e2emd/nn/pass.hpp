#pragma once

#include <cstdint>
#include <vector>

#include "e2emd/nn/kernels.hpp"
#include "e2emd/nn/network.hpp"

namespace e2emd::nn {

enum class Mode { inference, train };

struct PassOptions {
  Mode mode = Mode::inference;
  Exec exec = Exec::parallel;
  // Dropout masks are drawn from streams derived from (seed, layer index).
  std::uint64_t dropout_seed = 0;
};

// Everything a backward pass needs from the forward pass.
template <typename T>
struct Trace {
  // values[0] is the input batch; values[i + 1] is the output of layer i.
  std::vector<BasicTensor<T>> values;
  std::vector<std::vector<std::size_t>> pool_argmax;
  // Inverted-dropout multipliers (0 or 1/(1-rate)); empty when inactive.
  std::vector<std::vector<T>> dropout_scale;

  const BasicTensor<T>& output() const { return values.back(); }
};

// Runs the whole stack on a batch whose shape is N x net.input.
template <typename T>
Trace<T> forward(const Network& net, const BasicWeightStore<T>& weights, BasicTensor<T> batch,
                 const PassOptions& opts = {});

// Forward pass that keeps only the final output.
template <typename T>
BasicTensor<T> infer(const Network& net, const BasicWeightStore<T>& weights, BasicTensor<T> batch,
                     const PassOptions& opts = {});

// Gradients of every trainable parameter in layers [0, end_layer), given the
// gradient of the loss with respect to trace.values[end_layer]. Frozen
// parameters get no entry; propagation stops below the lowest trainable layer.
template <typename T>
BasicWeightStore<T> backward(const Network& net, const BasicWeightStore<T>& weights, const Trace<T>& trace,
                             BasicTensor<T> grad, std::size_t end_layer, const PassOptions& opts = {});

template <typename T>
struct BackpropResult {
  T loss = 0;
  BasicWeightStore<T> grads;
  BasicTensor<T> probs;
};

// Cross-entropy training step gradients for a network ending in Softmax.
// The softmax/cross-entropy pair is differentiated jointly:
// d loss / d logits = (p - onehot) / N.
template <typename T>
BackpropResult<T> backprop(const Network& net, const BasicWeightStore<T>& weights, const BasicTensor<T>& batch,
                           const std::vector<int>& labels, const PassOptions& opts = {Mode::train});

// Prepends the batch axis to a per-sample shape.
inline Shape batched(std::size_t n, const Shape& sample) {
  Shape s{n};
  s.insert(s.end(), sample.begin(), sample.end());
  return s;
}

}  // namespace e2emd::nn
