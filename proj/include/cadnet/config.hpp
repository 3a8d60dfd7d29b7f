#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "cadnet/dataset.hpp"
#include "cadnet/training.hpp"

namespace cadnet {

enum class ClassMode { Four, ThreeDropModerate, TwoMerged, Custom };
enum class ModelKind { Proposed, VggStyle, ResidualStyle };

std::string_view to_string(ClassMode mode);
std::string_view to_string(ModelKind kind);

/// Validation split request: a fraction of each class, or a fixed per-class
/// count.
struct ValSpec {
  enum class Kind { Fraction, FixedPerClass };
  Kind kind = Kind::Fraction;
  double fraction = 0.2;
  Index per_class = 0;
};

/// One experiment, fully determined by this struct plus the dataset bytes.
/// Defaults follow the training protocol the models were designed around:
/// 70 epochs, batch 128, Adam at 1e-3, 20% validation fraction, 224-pixel
/// inputs (244 selectable).
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::filesystem::path data_root;
  ClassMode class_mode = ClassMode::Four;
  std::map<std::string, std::string> class_map;  // custom mode only
  ModelKind model = ModelKind::Proposed;
  std::optional<std::string> freeze_boundary;
  std::optional<std::filesystem::path> pretrained_weights;
  Index input_size = 224;
  Index epochs = 70;
  Index batch_size = 128;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::Adam;
  ValSpec val;
  AugmentFlags augment;
  std::filesystem::path out_dir;
};

/// Strict parse: unknown keys anywhere are a hard error, so typos in sweep
/// scripts fail loudly. Throws ConfigError.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config_file(const std::filesystem::path& path);

/// Every field, including applied defaults, so a run is self-describing.
nlohmann::json resolved_config_json(const ExperimentConfig& config);

/// The class-mode relabeling for the standard four-class layout
/// (MildDemented, ModerateDemented, NonDemented, VeryMildDemented).
/// Four is the identity; ThreeDropModerate drops ModerateDemented;
/// TwoMerged maps everything demented to "Demented". Custom uses class_map.
std::map<std::string, std::string> class_mode_mapping(
    const ExperimentConfig& config, const LabelMap& labels);

/// Applies the class mode; the identity Four mode returns the input as-is.
LabeledDataset apply_class_mode(const ExperimentConfig& config,
                                const LabeledDataset& ds);

}  // namespace cadnet
