#include "e2emd/nn/network.hpp"

#include <cmath>
#include <sstream>

#include "e2emd/common/rng.hpp"

namespace e2emd::nn {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

void require_rank(const std::string& what, const Shape& in, std::size_t rank) {
  if (in.size() != rank) {
    throw DimensionError(what + " expects a rank-" + std::to_string(rank) + " input, got " + shape_string(in));
  }
}

}  // namespace

std::string kind_name(const LayerKind& kind) {
  return std::visit(Overloaded{
                        [](const Conv2D&) { return std::string("Conv2D"); },
                        [](const MaxPool2D&) { return std::string("MaxPool2D"); },
                        [](const ReLU&) { return std::string("ReLU"); },
                        [](const Flatten&) { return std::string("Flatten"); },
                        [](const Dense&) { return std::string("Dense"); },
                        [](const Dropout&) { return std::string("Dropout"); },
                        [](const Softmax&) { return std::string("Softmax"); },
                        [](const Reshape&) { return std::string("Reshape"); },
                        [](const Upsample2D&) { return std::string("Upsample2D"); },
                    },
                    kind);
}

void validate_kind(const LayerKind& kind) {
  std::visit(Overloaded{
                 [](const Conv2D& c) {
                   if (c.out_channels < 1 || c.kernel_h < 1 || c.kernel_w < 1 || c.stride < 1)
                     throw ConfigError("Conv2D needs out_channels, kernel dims and stride >= 1");
                 },
                 [](const MaxPool2D& p) {
                   if (p.window < 1 || p.stride < 1) throw ConfigError("MaxPool2D needs window and stride >= 1");
                 },
                 [](const Dense& d) {
                   if (d.out_features < 1) throw ConfigError("Dense needs out_features >= 1");
                 },
                 [](const Dropout& d) {
                   if (!(d.rate >= 0.0f && d.rate < 1.0f)) throw ConfigError("Dropout rate must lie in [0, 1)");
                 },
                 [](const Upsample2D& u) {
                   if (u.factor < 1) throw ConfigError("Upsample2D factor must be >= 1");
                 },
                 [](const auto&) {},
             },
             kind);
}

Shape output_shape(const LayerKind& kind, const Shape& in) {
  validate_kind(kind);
  return std::visit(
      Overloaded{
          [&](const Conv2D& c) -> Shape {
            require_rank("Conv2D", in, 3);
            const std::size_t h = in[1] + 2 * c.padding, w = in[2] + 2 * c.padding;
            if (h < c.kernel_h || w < c.kernel_w) {
              throw DimensionError("Conv2D kernel " + std::to_string(c.kernel_h) + "x" + std::to_string(c.kernel_w) +
                                   " exceeds padded spatial dims (H,W) of input " + shape_string(in));
            }
            return {c.out_channels, (h - c.kernel_h) / c.stride + 1, (w - c.kernel_w) / c.stride + 1};
          },
          [&](const MaxPool2D& p) -> Shape {
            require_rank("MaxPool2D", in, 3);
            if (in[1] < p.window || in[2] < p.window) {
              throw DimensionError("MaxPool2D window " + std::to_string(p.window) +
                                   " exceeds spatial dims (H,W) of input " + shape_string(in));
            }
            return {in[0], (in[1] - p.window) / p.stride + 1, (in[2] - p.window) / p.stride + 1};
          },
          [&](const Flatten&) -> Shape { return {element_count(in)}; },
          [&](const Dense& d) -> Shape {
            require_rank("Dense", in, 1);
            return {d.out_features};
          },
          [&](const Softmax&) -> Shape {
            require_rank("Softmax", in, 1);
            if (in[0] < 2) throw DimensionError("Softmax needs at least 2 classes");
            return in;
          },
          [&](const Reshape& r) -> Shape {
            if (element_count(r.shape) != element_count(in)) {
              throw DimensionError("Reshape " + shape_string(in) + " -> " + shape_string(r.shape) +
                                   " changes the element count");
            }
            return r.shape;
          },
          [&](const Upsample2D& u) -> Shape {
            require_rank("Upsample2D", in, 3);
            return {in[0], in[1] * u.factor, in[2] * u.factor};
          },
          [&](const auto&) -> Shape { return in; },
      },
      kind);
}

std::vector<Shape> infer_shapes(const Network& net) {
  std::vector<Shape> shapes;
  shapes.reserve(net.layers.size());
  Shape cur = net.input;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    try {
      cur = output_shape(net.layers[i].kind, cur);
    } catch (const DimensionError& e) {
      throw DimensionError("layer " + std::to_string(i) + " (" + net.layers[i].name + "): " + e.what());
    }
    shapes.push_back(cur);
  }
  return shapes;
}

std::vector<ParamInfo> parameters(const Network& net) {
  std::vector<ParamInfo> out;
  Shape cur = net.input;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const Layer& layer = net.layers[i];
    const Shape next = output_shape(layer.kind, cur);
    if (const auto* c = std::get_if<Conv2D>(&layer.kind)) {
      out.push_back({layer.name + "/kernel", {c->out_channels, cur[0], c->kernel_h, c->kernel_w}, i, !layer.frozen, false});
      out.push_back({layer.name + "/bias", {c->out_channels}, i, !layer.frozen, true});
    } else if (const auto* d = std::get_if<Dense>(&layer.kind)) {
      out.push_back({layer.name + "/kernel", {cur[0], d->out_features}, i, !layer.frozen, false});
      out.push_back({layer.name + "/bias", {d->out_features}, i, !layer.frozen, true});
    }
    cur = next;
  }
  return out;
}

std::vector<std::string> trainable_names(const Network& net) {
  std::vector<std::string> names;
  for (const auto& p : parameters(net)) {
    if (p.trainable) names.push_back(p.name);
  }
  return names;
}

template <typename T>
void check_weights(const Network& net, const BasicWeightStore<T>& weights) {
  for (const auto& p : parameters(net)) {
    auto it = weights.find(p.name);
    if (it == weights.end()) throw ConsistencyError("weight store is missing parameter " + p.name);
    if (it->second.shape() != p.shape) {
      throw DimensionError("parameter " + p.name + " has shape " + shape_string(it->second.shape()) + ", expected " +
                           shape_string(p.shape));
    }
  }
}

template void check_weights<float>(const Network&, const WeightStore&);
template void check_weights<double>(const Network&, const WeightStore64&);

WeightStore init_weights(const Network& net, std::uint64_t seed) {
  WeightStore store;
  const auto params = parameters(net);
  for (std::size_t k = 0; k < params.size(); ++k) {
    const ParamInfo& p = params[k];
    Tensor t(p.shape);
    if (!p.is_bias) {
      // Kernel layouts are O x I x Kh x Kw (conv) and F x G (dense).
      const std::size_t fan_in = p.shape.size() == 4 ? p.shape[1] * p.shape[2] * p.shape[3] : p.shape[0];
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
      Rng rng(derive_seed(seed, k, 0x11));
      for (float& v : t) v = static_cast<float>(rng.uniform(-limit, limit));
    }
    store.emplace(p.name, std::move(t));
  }
  return store;
}

}  // namespace e2emd::nn
