#include "e2emd/model/model_spec.hpp"

#include <algorithm>
#include <fstream>

namespace e2emd::model {

using nlohmann::json;
using namespace e2emd::nn;

std::string to_string(Scale scale) { return scale == Scale::full ? "full" : "mini"; }

Scale parse_scale(const std::string& text) {
  if (text == "full") return Scale::full;
  if (text == "mini") return Scale::mini;
  throw ConfigError("unknown model scale '" + text + "' (expected full or mini)");
}

ModelSpec build_vgg19(const Shape& input, Scale scale) {
  struct Block {
    std::size_t convs, channels;
  };
  const std::vector<Block> blocks = scale == Scale::full
                                        ? std::vector<Block>{{2, 64}, {2, 128}, {4, 256}, {4, 512}, {4, 512}}
                                        : std::vector<Block>{{1, 16}, {1, 32}, {2, 64}};
  if (input.size() != 3 || input[0] == 0) throw ConfigError("model input must be C x H x W, got " + shape_string(input));
  const std::size_t divisor = std::size_t{1} << blocks.size();
  if (input[1] % divisor != 0 || input[2] % divisor != 0) {
    throw ConfigError("input " + shape_string(input) + " must have H and W divisible by " + std::to_string(divisor) +
                      " for the " + to_string(scale) + " model");
  }
  ModelSpec spec;
  spec.network.input = input;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const std::string block = std::to_string(b + 1);
    for (std::size_t i = 0; i < blocks[b].convs; ++i) {
      const std::string id = block + "_" + std::to_string(i + 1);
      spec.network.layers.push_back({"conv" + id, Conv2D{blocks[b].channels, 3, 3, 1, 1}});
      spec.network.layers.push_back({"relu" + id, ReLU{}});
    }
    spec.network.layers.push_back({"pool" + block, MaxPool2D{2, 2}});
  }
  return spec;
}

bool has_head(const ModelSpec& spec) {
  for (const auto& layer : spec.network.layers) {
    if (std::holds_alternative<Flatten>(layer.kind) || std::holds_alternative<Dense>(layer.kind) ||
        std::holds_alternative<Softmax>(layer.kind)) {
      return true;
    }
  }
  return false;
}

ModelSpec append_transfer_head(ModelSpec spec, const std::vector<std::size_t>& widths, bool freeze_features) {
  if (widths.size() != 5) {
    throw ConfigError("transfer head needs exactly 5 dense widths, got " + std::to_string(widths.size()));
  }
  if (widths.back() != spec.classes.size()) {
    throw ConfigError("final head width " + std::to_string(widths.back()) + " must equal the class count " +
                      std::to_string(spec.classes.size()));
  }
  if (has_head(spec)) throw ConfigError("model already has a classification head");
  if (freeze_features) {
    for (auto& layer : spec.network.layers) layer.frozen = true;
  }
  auto& layers = spec.network.layers;
  layers.push_back({"flatten", Flatten{}});
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const std::string id = std::to_string(i + 1);
    layers.push_back({"fc" + id, Dense{widths[i]}});
    if (i + 1 < widths.size()) {
      layers.push_back({"relu_fc" + id, ReLU{}});
      layers.push_back({"dropout_fc" + id, Dropout{0.5f}});
    }
  }
  layers.push_back({"softmax", Softmax{}});
  validate(spec);
  return spec;
}

std::size_t count_layers(const Network& net, const std::string& kind) {
  return static_cast<std::size_t>(std::count_if(net.layers.begin(), net.layers.end(),
                                                [&](const Layer& l) { return kind_name(l.kind) == kind; }));
}

void validate(const ModelSpec& spec) {
  if (spec.classes.size() < 2) throw ConfigError("class table needs at least 2 entries");
  const auto shapes = infer_shapes(spec.network);
  const auto& layers = spec.network.layers;
  if (count_layers(spec.network, "Softmax") != 1 || !std::holds_alternative<Softmax>(layers.back().kind)) {
    throw ConfigError("classifier must end in exactly one Softmax layer");
  }
  if (shapes.back() != Shape{spec.classes.size()}) {
    throw ConfigError("classifier output " + shape_string(shapes.back()) + " does not match " +
                      std::to_string(spec.classes.size()) + " classes");
  }
}

json network_to_json(const Network& net) {
  json layers = json::array();
  for (const auto& layer : net.layers) {
    json l{{"name", layer.name}, {"kind", kind_name(layer.kind)}, {"frozen", layer.frozen}};
    std::visit(
        [&](const auto& k) {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, Conv2D>) {
            l["out_channels"] = k.out_channels;
            l["kernel"] = {k.kernel_h, k.kernel_w};
            l["stride"] = k.stride;
            l["padding"] = k.padding;
          } else if constexpr (std::is_same_v<K, MaxPool2D>) {
            l["window"] = k.window;
            l["stride"] = k.stride;
          } else if constexpr (std::is_same_v<K, Dense>) {
            l["out_features"] = k.out_features;
          } else if constexpr (std::is_same_v<K, Dropout>) {
            l["rate"] = k.rate;
          } else if constexpr (std::is_same_v<K, Reshape>) {
            l["shape"] = k.shape;
          } else if constexpr (std::is_same_v<K, Upsample2D>) {
            l["factor"] = k.factor;
          }
        },
        layer.kind);
    layers.push_back(std::move(l));
  }
  return {{"input", net.input}, {"layers", std::move(layers)}};
}

Network network_from_json(const json& j) {
  try {
    Network net;
    net.input = j.at("input").get<Shape>();
    for (const auto& l : j.at("layers")) {
      Layer layer;
      layer.name = l.at("name").get<std::string>();
      layer.frozen = l.value("frozen", false);
      const auto kind = l.at("kind").get<std::string>();
      if (kind == "Conv2D") {
        const auto k = l.at("kernel").get<std::vector<std::size_t>>();
        if (k.size() != 2) throw ConfigError("Conv2D kernel must list 2 dims");
        layer.kind = Conv2D{l.at("out_channels"), k[0], k[1], l.value("stride", std::size_t{1}),
                            l.value("padding", std::size_t{0})};
      } else if (kind == "MaxPool2D") {
        layer.kind = MaxPool2D{l.at("window"), l.at("stride")};
      } else if (kind == "ReLU") {
        layer.kind = ReLU{};
      } else if (kind == "Flatten") {
        layer.kind = Flatten{};
      } else if (kind == "Dense") {
        layer.kind = Dense{l.at("out_features")};
      } else if (kind == "Dropout") {
        layer.kind = Dropout{l.at("rate").get<float>()};
      } else if (kind == "Softmax") {
        layer.kind = Softmax{};
      } else if (kind == "Reshape") {
        layer.kind = Reshape{l.at("shape").get<Shape>()};
      } else if (kind == "Upsample2D") {
        layer.kind = Upsample2D{l.at("factor")};
      } else {
        throw ConfigError("unknown layer kind '" + kind + "'");
      }
      net.layers.push_back(std::move(layer));
    }
    infer_shapes(net);
    return net;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed network description: ") + e.what());
  }
}

json spec_to_json(const ModelSpec& spec) {
  return {{"network", network_to_json(spec.network)}, {"classes", spec.classes}, {"version", spec.version}};
}

ModelSpec spec_from_json(const json& j) {
  ModelSpec spec;
  try {
    spec.network = network_from_json(j.at("network"));
    spec.classes = j.at("classes").get<std::vector<std::string>>();
    spec.version = j.value("version", std::string("unversioned"));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed model spec: ") + e.what());
  }
  validate(spec);
  return spec;
}

void save_spec(const ModelSpec& spec, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("io_error", "cannot write " + path.string());
  out << spec_to_json(spec).dump(2) << '\n';
}

ModelSpec load_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io_error", "cannot read model spec " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("model spec " + path.string() + " is not valid JSON: " + e.what());
  }
  return spec_from_json(j);
}

std::filesystem::path spec_path_for(const std::filesystem::path& weights_path) {
  auto p = weights_path;
  p.replace_extension(".spec.json");
  return p;
}

}  // namespace e2emd::model
