#include "cadnet/model.hpp"

namespace cadnet {

namespace {

nlohmann::json layer_to_json(const LayerDesc& d) {
  nlohmann::json j;
  j["name"] = d.name;
  j["kind"] = std::string(to_string(d.kind));
  switch (d.kind) {
    case LayerKind::Rescale:
      j["factor"] = d.factor;
      break;
    case LayerKind::Conv2d:
      j["out_channels"] = d.out_channels;
      j["kernel_h"] = d.kernel_h;
      j["kernel_w"] = d.kernel_w;
      break;
    case LayerKind::Pool:
      j["mode"] = std::string(to_string(d.pool_mode));
      j["window_h"] = d.window_h;
      j["window_w"] = d.window_w;
      j["stride"] = d.stride;
      break;
    case LayerKind::Dense:
      j["units"] = d.units;
      break;
    case LayerKind::Residual: {
      nlohmann::json body = nlohmann::json::array();
      for (const LayerDesc& inner : d.body) {
        body.push_back(layer_to_json(inner));
      }
      j["body"] = std::move(body);
      break;
    }
    default:
      break;
  }
  return j;
}

LayerDesc layer_from_json(const nlohmann::json& j) {
  LayerDesc d;
  d.name = j.at("name").get<std::string>();
  d.kind = layer_kind_from_string(j.at("kind").get<std::string>());
  switch (d.kind) {
    case LayerKind::Rescale:
      d.factor = j.at("factor").get<double>();
      break;
    case LayerKind::Conv2d:
      d.out_channels = j.at("out_channels").get<Index>();
      d.kernel_h = j.at("kernel_h").get<Index>();
      d.kernel_w = j.at("kernel_w").get<Index>();
      break;
    case LayerKind::Pool:
      d.pool_mode = pool_mode_from_string(j.at("mode").get<std::string>());
      d.window_h = j.at("window_h").get<Index>();
      d.window_w = j.at("window_w").get<Index>();
      d.stride = j.at("stride").get<Index>();
      break;
    case LayerKind::Dense:
      d.units = j.at("units").get<Index>();
      break;
    case LayerKind::Residual:
      for (const nlohmann::json& inner : j.at("body")) {
        d.body.push_back(layer_from_json(inner));
      }
      break;
    default:
      break;
  }
  return d;
}

}  // namespace

nlohmann::json spec_to_json(const ModelSpec& spec) {
  nlohmann::json j;
  j["name"] = spec.name;
  j["input_shape"] = spec.input_shape.dims();
  j["num_classes"] = spec.num_classes;
  j["layers"] = nlohmann::json::array();
  for (const LayerDesc& d : spec.layers) {
    j["layers"].push_back(layer_to_json(d));
  }
  return j;
}

ModelSpec spec_from_json(const nlohmann::json& j) {
  try {
    ModelSpec spec;
    spec.name = j.at("name").get<std::string>();
    spec.input_shape = Shape(j.at("input_shape").get<std::vector<Index>>());
    spec.num_classes = j.at("num_classes").get<Index>();
    for (const nlohmann::json& layer : j.at("layers")) {
      spec.layers.push_back(layer_from_json(layer));
    }
    validate_spec(spec);
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw BuildError(std::string("bad model spec JSON: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw BuildError(std::string("bad model spec: ") + e.what());
  }
}

}  // namespace cadnet
