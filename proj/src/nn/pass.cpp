#include "e2emd/nn/pass.hpp"

#include <algorithm>

#include "e2emd/common/rng.hpp"

namespace e2emd::nn {

namespace {

template <typename T>
const BasicTensor<T>& param(const BasicWeightStore<T>& weights, const std::string& name) {
  auto it = weights.find(name);
  if (it == weights.end()) throw ConsistencyError("weight store is missing parameter " + name);
  return it->second;
}

void check_batch(const Network& net, const Shape& batch) {
  if (batch.size() != net.input.size() + 1 || !std::equal(net.input.begin(), net.input.end(), batch.begin() + 1)) {
    throw DimensionError("batch shape " + shape_string(batch) + " does not match network input " +
                         shape_string(batched(0, net.input)).replace(1, 1, "N"));
  }
}

std::size_t lowest_trainable_layer(const Network& net) {
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& kind = net.layers[i].kind;
    if (!net.layers[i].frozen && (std::holds_alternative<Conv2D>(kind) || std::holds_alternative<Dense>(kind))) return i;
  }
  return net.layers.size();
}

template <typename T>
BasicTensor<T> apply_layer(const Layer& layer, std::size_t index, const BasicWeightStore<T>& weights,
                           const BasicTensor<T>& x, const PassOptions& opts, std::vector<std::size_t>* argmax,
                           std::vector<T>* dropout_scale) {
  const std::size_t n = x.dim(0);
  if (const auto* c = std::get_if<Conv2D>(&layer.kind)) {
    return conv2d_forward(x, param(weights, layer.name + "/kernel"), param(weights, layer.name + "/bias"), c->stride,
                          c->padding, opts.exec);
  }
  if (const auto* p = std::get_if<MaxPool2D>(&layer.kind)) {
    auto res = maxpool2d_forward(x, p->window, p->stride, opts.exec);
    if (argmax) *argmax = std::move(res.argmax);
    return std::move(res.output);
  }
  if (std::holds_alternative<ReLU>(layer.kind)) {
    BasicTensor<T> y = x;
    for (T& v : y) v = v > T{0} ? v : T{0};
    return y;
  }
  if (std::holds_alternative<Flatten>(layer.kind)) return x.reshaped({n, x.size() / n});
  if (std::holds_alternative<Dense>(layer.kind)) {
    return dense_forward(x, param(weights, layer.name + "/kernel"), param(weights, layer.name + "/bias"), opts.exec);
  }
  if (const auto* d = std::get_if<Dropout>(&layer.kind)) {
    if (opts.mode == Mode::inference || d->rate == 0.0f) return x;
    const T keep_scale = T{1} / (T{1} - static_cast<T>(d->rate));
    Rng rng(derive_seed(opts.dropout_seed, index, 0xd0));
    std::vector<T> scale(x.size());
    for (T& s : scale) s = rng.bernoulli(d->rate) ? T{0} : keep_scale;
    BasicTensor<T> y = x;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= scale[i];
    if (dropout_scale) *dropout_scale = std::move(scale);
    return y;
  }
  if (std::holds_alternative<Softmax>(layer.kind)) return softmax(x);
  if (const auto* r = std::get_if<Reshape>(&layer.kind)) return x.reshaped(batched(n, r->shape));
  if (const auto* u = std::get_if<Upsample2D>(&layer.kind)) return upsample2d_forward(x, u->factor);
  throw ConfigError("unsupported layer kind " + kind_name(layer.kind));
}

}  // namespace

template <typename T>
Trace<T> forward(const Network& net, const BasicWeightStore<T>& weights, BasicTensor<T> batch, const PassOptions& opts) {
  check_batch(net, batch.shape());
  Trace<T> trace;
  const std::size_t count = net.layers.size();
  trace.values.reserve(count + 1);
  trace.pool_argmax.resize(count);
  trace.dropout_scale.resize(count);
  trace.values.push_back(std::move(batch));
  for (std::size_t i = 0; i < count; ++i) {
    trace.values.push_back(apply_layer(net.layers[i], i, weights, trace.values.back(), opts, &trace.pool_argmax[i],
                                       &trace.dropout_scale[i]));
  }
  return trace;
}

template <typename T>
BasicTensor<T> infer(const Network& net, const BasicWeightStore<T>& weights, BasicTensor<T> batch,
                     const PassOptions& opts) {
  check_batch(net, batch.shape());
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    batch = apply_layer<T>(net.layers[i], i, weights, batch, opts, nullptr, nullptr);
  }
  return batch;
}

template <typename T>
BasicWeightStore<T> backward(const Network& net, const BasicWeightStore<T>& weights, const Trace<T>& trace,
                             BasicTensor<T> grad, std::size_t end_layer, const PassOptions& opts) {
  if (end_layer > net.layers.size() || trace.values.size() != net.layers.size() + 1) {
    throw ConsistencyError("backward called with a trace that does not belong to this network");
  }
  if (grad.shape() != trace.values[end_layer].shape()) {
    throw DimensionError("output gradient shape " + shape_string(grad.shape()) + " does not match activation " +
                         shape_string(trace.values[end_layer].shape()));
  }
  BasicWeightStore<T> grads;
  const std::size_t lowest = lowest_trainable_layer(net);
  for (std::size_t i = end_layer; i-- > lowest;) {
    const Layer& layer = net.layers[i];
    const BasicTensor<T>& x = trace.values[i];
    const bool need_input = i > lowest;
    if (const auto* c = std::get_if<Conv2D>(&layer.kind)) {
      auto g = conv2d_backward(x, param(weights, layer.name + "/kernel"), grad, c->stride, c->padding, need_input,
                               opts.exec);
      if (!layer.frozen) {
        grads.insert_or_assign(layer.name + "/kernel", std::move(g.kernel));
        grads.insert_or_assign(layer.name + "/bias", std::move(g.bias));
      }
      grad = std::move(g.input);
    } else if (std::holds_alternative<Dense>(layer.kind)) {
      auto g = dense_backward(x, param(weights, layer.name + "/kernel"), grad, need_input, opts.exec);
      if (!layer.frozen) {
        grads.insert_or_assign(layer.name + "/kernel", std::move(g.weights));
        grads.insert_or_assign(layer.name + "/bias", std::move(g.bias));
      }
      grad = std::move(g.input);
    } else if (std::holds_alternative<MaxPool2D>(layer.kind)) {
      grad = maxpool2d_backward(grad, trace.pool_argmax[i], x.shape());
    } else if (std::holds_alternative<ReLU>(layer.kind)) {
      for (std::size_t k = 0; k < grad.size(); ++k) {
        if (!(x[k] > T{0})) grad[k] = T{0};
      }
    } else if (std::holds_alternative<Flatten>(layer.kind) || std::holds_alternative<Reshape>(layer.kind)) {
      grad = std::move(grad).reshaped(x.shape());
    } else if (std::holds_alternative<Dropout>(layer.kind)) {
      const auto& scale = trace.dropout_scale[i];
      if (!scale.empty()) {
        for (std::size_t k = 0; k < grad.size(); ++k) grad[k] *= scale[k];
      }
    } else if (std::holds_alternative<Softmax>(layer.kind)) {
      const BasicTensor<T>& p = trace.values[i + 1];
      const std::size_t n = p.dim(0), c = p.dim(1);
      for (std::size_t r = 0; r < n; ++r) {
        T dot = 0;
        for (std::size_t j = 0; j < c; ++j) dot += grad[r * c + j] * p[r * c + j];
        for (std::size_t j = 0; j < c; ++j) grad[r * c + j] = p[r * c + j] * (grad[r * c + j] - dot);
      }
    } else if (const auto* u = std::get_if<Upsample2D>(&layer.kind)) {
      grad = upsample2d_backward(grad, u->factor);
    }
  }
  return grads;
}

template <typename T>
BackpropResult<T> backprop(const Network& net, const BasicWeightStore<T>& weights, const BasicTensor<T>& batch,
                           const std::vector<int>& labels, const PassOptions& opts) {
  if (net.layers.empty() || !std::holds_alternative<Softmax>(net.layers.back().kind)) {
    throw ConfigError("backprop needs a network ending in Softmax");
  }
  if (batch.rank() == 0 || batch.dim(0) != labels.size()) {
    throw DimensionError("batch of " + std::to_string(batch.rank() ? batch.dim(0) : 0) + " samples has " +
                         std::to_string(labels.size()) + " labels");
  }
  Trace<T> trace = forward(net, weights, batch, opts);
  BackpropResult<T> res;
  res.probs = trace.output();
  res.loss = cross_entropy_loss(res.probs, labels);
  const std::size_t last = net.layers.size() - 1;
  if (lowest_trainable_layer(net) >= last) return res;
  const std::size_t n = res.probs.dim(0), c = res.probs.dim(1);
  BasicTensor<T> grad = res.probs;
  const T inv_n = T{1} / static_cast<T>(n);
  for (std::size_t i = 0; i < n; ++i) {
    grad[i * c + labels[i]] -= T{1};
    for (std::size_t j = 0; j < c; ++j) grad[i * c + j] *= inv_n;
  }
  res.grads = backward(net, weights, trace, std::move(grad), last, opts);
  return res;
}

#define E2EMD_INSTANTIATE(T)                                                                                        \
  template Trace<T> forward<T>(const Network&, const BasicWeightStore<T>&, BasicTensor<T>, const PassOptions&);     \
  template BasicTensor<T> infer<T>(const Network&, const BasicWeightStore<T>&, BasicTensor<T>, const PassOptions&); \
  template BasicWeightStore<T> backward<T>(const Network&, const BasicWeightStore<T>&, const Trace<T>&,             \
                                           BasicTensor<T>, std::size_t, const PassOptions&);                        \
  template BackpropResult<T> backprop<T>(const Network&, const BasicWeightStore<T>&, const BasicTensor<T>&,         \
                                         const std::vector<int>&, const PassOptions&);

E2EMD_INSTANTIATE(float)
E2EMD_INSTANTIATE(double)

#undef E2EMD_INSTANTIATE

}  // namespace e2emd::nn
