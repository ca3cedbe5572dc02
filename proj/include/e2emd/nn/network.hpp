#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "e2emd/nn/tensor.hpp"

namespace e2emd::nn {

struct Conv2D {
  std::size_t out_channels = 1;
  std::size_t kernel_h = 3;
  std::size_t kernel_w = 3;
  std::size_t stride = 1;
  std::size_t padding = 0;
};

struct MaxPool2D {
  std::size_t window = 2;
  std::size_t stride = 2;
};

struct ReLU {};
struct Flatten {};

struct Dense {
  std::size_t out_features = 1;
};

// Inverted dropout: kept activations are scaled by 1/(1-rate) at train time.
struct Dropout {
  float rate = 0.5f;
};

struct Softmax {};

// Reinterprets the per-sample activation with a new shape of equal size.
struct Reshape {
  Shape shape;
};

// Nearest-neighbour upsampling of both spatial axes by an integer factor.
struct Upsample2D {
  std::size_t factor = 2;
};

using LayerKind = std::variant<Conv2D, MaxPool2D, ReLU, Flatten, Dense, Dropout, Softmax, Reshape, Upsample2D>;

std::string kind_name(const LayerKind& kind);

struct Layer {
  std::string name;
  LayerKind kind;
  bool frozen = false;
};

// Fixed-topology feed-forward stack. Shapes are per sample (no batch axis).
struct Network {
  Shape input;
  std::vector<Layer> layers;
};

template <typename T>
using BasicWeightStore = std::map<std::string, BasicTensor<T>>;
using WeightStore = BasicWeightStore<float>;
using WeightStore64 = BasicWeightStore<double>;

template <typename To, typename From>
BasicWeightStore<To> cast_store(const BasicWeightStore<From>& store) {
  BasicWeightStore<To> out;
  for (const auto& [name, t] : store) out.emplace(name, t.template cast<To>());
  return out;
}

struct ParamInfo {
  std::string name;  // "<layer>/kernel" or "<layer>/bias"
  Shape shape;
  std::size_t layer_index = 0;
  bool trainable = true;
  bool is_bias = false;
};

void validate_kind(const LayerKind& kind);

// Per-sample output shape of `kind` applied to `in`; throws DimensionError.
Shape output_shape(const LayerKind& kind, const Shape& in);

// Output shape of every layer, in order. Throws DimensionError naming the
// first layer whose input does not compose.
std::vector<Shape> infer_shapes(const Network& net);

std::vector<ParamInfo> parameters(const Network& net);

// Names of the parameters that receive gradients.
std::vector<std::string> trainable_names(const Network& net);

// Checks `weights` holds every parameter of `net` with matching shape.
template <typename T>
void check_weights(const Network& net, const BasicWeightStore<T>& weights);

// He-uniform kernels (limit sqrt(6 / fan_in)), zero biases.
WeightStore init_weights(const Network& net, std::uint64_t seed);

}  // namespace e2emd::nn
