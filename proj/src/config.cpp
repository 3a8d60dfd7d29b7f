#include "cadnet/config.hpp"

#include <set>

#include "cadnet/errors.hpp"
#include "cadnet/io.hpp"

namespace cadnet {

std::string_view to_string(ClassMode mode) {
  switch (mode) {
    case ClassMode::Four: return "four";
    case ClassMode::ThreeDropModerate: return "three_drop_moderate";
    case ClassMode::TwoMerged: return "two_merged";
    case ClassMode::Custom: return "custom";
  }
  return "?";
}

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Proposed: return "proposed";
    case ModelKind::VggStyle: return "vgg_style";
    case ModelKind::ResidualStyle: return "residual_style";
  }
  return "?";
}

namespace {

ClassMode class_mode_from_string(const std::string& s) {
  if (s == "four") return ClassMode::Four;
  if (s == "three_drop_moderate") return ClassMode::ThreeDropModerate;
  if (s == "two_merged") return ClassMode::TwoMerged;
  if (s == "custom") return ClassMode::Custom;
  throw ConfigError("unknown class_mode '" + s + "'");
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "proposed") return ModelKind::Proposed;
  if (s == "vgg_style") return ModelKind::VggStyle;
  if (s == "residual_style") return ModelKind::ResidualStyle;
  throw ConfigError("unknown model '" + s + "'");
}

void reject_unknown_keys(const nlohmann::json& j,
                         const std::set<std::string>& known,
                         const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.contains(it.key())) {
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
  }
}

template <typename T>
T get_as(const nlohmann::json& j, const std::string& key, const char* type) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("key '" + key + "' must be a " + type);
  }
}

}  // namespace

ExperimentConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known = {
      "seed",          "data_root",     "class_mode", "class_map",
      "model",         "freeze_boundary", "pretrained_weights",
      "input_size",    "epochs",        "batch_size", "learning_rate",
      "optimizer",     "val",           "augment",    "out_dir"};
  reject_unknown_keys(j, known, "config");

  ExperimentConfig c;
  if (j.contains("seed")) c.seed = get_as<std::uint64_t>(j, "seed", "number");
  if (j.contains("data_root")) {
    c.data_root = get_as<std::string>(j, "data_root", "string");
  }
  if (j.contains("class_mode")) {
    c.class_mode =
        class_mode_from_string(get_as<std::string>(j, "class_mode", "string"));
  }
  if (j.contains("class_map")) {
    if (c.class_mode != ClassMode::Custom) {
      throw ConfigError("class_map requires class_mode \"custom\"");
    }
    const nlohmann::json& m = j.at("class_map");
    if (!m.is_object()) throw ConfigError("class_map must be an object");
    for (auto it = m.begin(); it != m.end(); ++it) {
      if (!it.value().is_string()) {
        throw ConfigError("class_map values must be strings");
      }
      c.class_map[it.key()] = it.value().get<std::string>();
    }
  } else if (c.class_mode == ClassMode::Custom) {
    throw ConfigError("class_mode \"custom\" requires class_map");
  }
  if (j.contains("model")) {
    c.model = model_kind_from_string(get_as<std::string>(j, "model", "string"));
  }
  if (j.contains("freeze_boundary")) {
    c.freeze_boundary = get_as<std::string>(j, "freeze_boundary", "string");
  }
  if (j.contains("pretrained_weights")) {
    c.pretrained_weights =
        std::filesystem::path(get_as<std::string>(j, "pretrained_weights", "string"));
  }
  if (j.contains("input_size")) {
    c.input_size = get_as<Index>(j, "input_size", "number");
  }
  if (j.contains("epochs")) c.epochs = get_as<Index>(j, "epochs", "number");
  if (j.contains("batch_size")) {
    c.batch_size = get_as<Index>(j, "batch_size", "number");
  }
  if (j.contains("learning_rate")) {
    c.learning_rate = get_as<double>(j, "learning_rate", "number");
  }
  if (j.contains("optimizer")) {
    try {
      c.optimizer =
          optimizer_from_string(get_as<std::string>(j, "optimizer", "string"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (j.contains("val")) {
    const nlohmann::json& v = j.at("val");
    if (!v.is_object()) {
      throw ConfigError("val must be an object with fraction or fixed_per_class");
    }
    reject_unknown_keys(v, {"fraction", "fixed_per_class"}, "val");
    if (v.contains("fraction") == v.contains("fixed_per_class")) {
      throw ConfigError("val needs exactly one of fraction or fixed_per_class");
    }
    if (v.contains("fraction")) {
      c.val.kind = ValSpec::Kind::Fraction;
      c.val.fraction = get_as<double>(v, "fraction", "number");
    } else {
      c.val.kind = ValSpec::Kind::FixedPerClass;
      c.val.per_class = get_as<Index>(v, "fixed_per_class", "number");
    }
  }
  if (j.contains("augment")) {
    const nlohmann::json& a = j.at("augment");
    if (!a.is_object()) throw ConfigError("augment must be an object of flags");
    reject_unknown_keys(a, {"crop", "flip_h", "flip_v", "grayscale", "rotate"},
                        "augment");
    auto flag = [&a](const char* key) {
      if (!a.contains(key)) return false;
      if (!a.at(key).is_boolean()) {
        throw ConfigError(std::string("augment.") + key + " must be a boolean");
      }
      return a.at(key).get<bool>();
    };
    c.augment.crop = flag("crop");
    c.augment.flip_h = flag("flip_h");
    c.augment.flip_v = flag("flip_v");
    c.augment.grayscale = flag("grayscale");
    c.augment.rotate = flag("rotate");
  }
  if (j.contains("out_dir")) {
    c.out_dir = get_as<std::string>(j, "out_dir", "string");
  }

  if (c.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (c.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (c.input_size < 1) throw ConfigError("input_size must be >= 1");
  if (!(c.learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
  if (c.val.kind == ValSpec::Kind::Fraction &&
      !(c.val.fraction > 0.0 && c.val.fraction < 1.0)) {
    throw ConfigError("val.fraction must be in (0, 1)");
  }
  if (c.val.kind == ValSpec::Kind::FixedPerClass && c.val.per_class < 1) {
    throw ConfigError("val.fixed_per_class must be >= 1");
  }
  return c;
}

ExperimentConfig load_config_file(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    const std::vector<std::uint8_t> bytes = read_file(path);
    j = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(j);
}

nlohmann::json resolved_config_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["seed"] = c.seed;
  j["data_root"] = c.data_root.string();
  j["class_mode"] = std::string(to_string(c.class_mode));
  if (c.class_mode == ClassMode::Custom) {
    nlohmann::json m = nlohmann::json::object();
    for (const auto& [from, to] : c.class_map) m[from] = to;
    j["class_map"] = std::move(m);
  }
  j["model"] = std::string(to_string(c.model));
  if (c.freeze_boundary) j["freeze_boundary"] = *c.freeze_boundary;
  if (c.pretrained_weights) {
    j["pretrained_weights"] = c.pretrained_weights->string();
  }
  j["input_size"] = c.input_size;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["optimizer"] = std::string(to_string(c.optimizer));
  if (c.val.kind == ValSpec::Kind::Fraction) {
    j["val"] = {{"fraction", c.val.fraction}};
  } else {
    j["val"] = {{"fixed_per_class", c.val.per_class}};
  }
  j["augment"] = {{"crop", c.augment.crop},
                  {"flip_h", c.augment.flip_h},
                  {"flip_v", c.augment.flip_v},
                  {"grayscale", c.augment.grayscale},
                  {"rotate", c.augment.rotate}};
  j["out_dir"] = c.out_dir.string();
  return j;
}

std::map<std::string, std::string> class_mode_mapping(
    const ExperimentConfig& config, const LabelMap& labels) {
  std::map<std::string, std::string> mapping;
  switch (config.class_mode) {
    case ClassMode::Four:
      for (const std::string& n : labels.names()) mapping[n] = n;
      break;
    case ClassMode::ThreeDropModerate:
      for (const std::string& n : labels.names()) {
        mapping[n] = (n == "ModerateDemented") ? std::string(kDropClass) : n;
      }
      if (!labels.index_of("ModerateDemented")) {
        throw DataError(
            "class_mode three_drop_moderate needs a ModerateDemented class; "
            "dataset has none");
      }
      break;
    case ClassMode::TwoMerged:
      if (!labels.index_of("NonDemented")) {
        throw DataError(
            "class_mode two_merged needs a NonDemented class; dataset has none");
      }
      for (const std::string& n : labels.names()) {
        mapping[n] = (n == "NonDemented") ? "NonDemented" : "Demented";
      }
      break;
    case ClassMode::Custom:
      mapping = config.class_map;
      break;
  }
  return mapping;
}

LabeledDataset apply_class_mode(const ExperimentConfig& config,
                                const LabeledDataset& ds) {
  if (config.class_mode == ClassMode::Four) return ds;
  return merge_classes(ds, class_mode_mapping(config, ds.labels()));
}

}  // namespace cadnet
