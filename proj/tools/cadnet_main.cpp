// cadnet command-line harness: train / evaluate / predict / filter / split.
//
// Exit codes: 0 success, 2 config or usage error, 3 data error, 4 shape or
// build error, 5 weight-archive mismatch, 1 anything unexpected.
#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>

#include "cadnet/archive.hpp"
#include "cadnet/builders.hpp"
#include "cadnet/config.hpp"
#include "cadnet/errors.hpp"
#include "cadnet/io.hpp"
#include "cadnet/metrics.hpp"
#include "cadnet/training.hpp"

namespace fs = std::filesystem;
using namespace cadnet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitBuild = 4;
constexpr int kExitArchive = 5;

std::string format_prob(double v) {
  std::ostringstream s;
  s.precision(9);
  s << std::fixed << v;
  return s.str();
}

/// A trained model on disk: a directory holding model.json, or the
/// model.json path itself. The JSON carries the spec, the label names, and
/// the weight file name (relative to the JSON).
struct ModelRef {
  ModelSpec spec;
  LabelMap labels;
  Model<float> model;
};

nlohmann::json model_json(const ModelSpec& spec, const LabelMap& labels,
                          const std::string& weights_name) {
  nlohmann::json j;
  j["format"] = "cadnet-model";
  j["version"] = 1;
  j["spec"] = spec_to_json(spec);
  j["labels"] = labels.names();
  j["weights"] = weights_name;
  return j;
}

ModelRef load_model_ref(const fs::path& given) {
  fs::path json_path = given;
  if (fs::is_directory(given)) json_path = given / "model.json";
  nlohmann::json j;
  try {
    const auto bytes = read_file(json_path);
    j = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const DataError& e) {
    throw ArchiveError(e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ArchiveError(json_path.string() + ": " + e.what());
  }
  ModelRef ref;
  try {
    if (j.at("format") != "cadnet-model" || j.at("version") != 1) {
      throw ArchiveError(json_path.string() + ": not a cadnet model");
    }
    ref.spec = spec_from_json(j.at("spec"));
    ref.labels = LabelMap(j.at("labels").get<std::vector<std::string>>());
  } catch (const nlohmann::json::exception& e) {
    throw ArchiveError(json_path.string() + ": " + e.what());
  }
  if (ref.labels.size() != ref.spec.num_classes) {
    throw ArchiveError(json_path.string() +
                       ": label count does not match the head width");
  }
  const fs::path weights =
      json_path.parent_path() / j.at("weights").get<std::string>();
  ref.model = load_model(ref.spec, weights);
  return ref;
}

ModelSpec spec_for(ModelKind kind, const Shape& input, Index k) {
  switch (kind) {
    case ModelKind::Proposed: return proposed_cnn_spec(input, k);
    case ModelKind::VggStyle: return vgg_style_spec(input, k);
    case ModelKind::ResidualStyle: return residual_style_spec(input, k);
  }
  throw BuildError("unknown model kind");
}

void write_metrics_artifacts(const fs::path& out_dir,
                             const ConfusionMatrix& cm,
                             const MetricsReport& report,
                             const LabelMap& labels) {
  write_file_atomic(out_dir / "metrics.json",
                    metrics_to_json(report).dump(2) + "\n");
  write_file_atomic(out_dir / "metrics.csv", metrics_to_csv(report));
  write_file_atomic(out_dir / "confusion_matrix.txt",
                    format_confusion(cm, labels));
}

void print_measures(const MetricsReport& report) {
  auto line = [](const char* name, const std::optional<double>& v) {
    std::cout << name << ": " << (v ? format_prob(*v) : "undefined") << "\n";
  };
  line("accuracy", report.accuracy);
  line("sensitivity", report.sensitivity);
  line("specificity", report.specificity);
  line("precision", report.precision);
  line("f_measure", report.f_measure);
}

int cmd_train(const fs::path& config_path) {
  ExperimentConfig config = load_config_file(config_path);
  if (config.data_root.empty()) throw ConfigError("data_root is required");
  if (config.out_dir.empty()) throw ConfigError("out_dir is required");

  LoadStats stats;
  const LabeledDataset full = load_dataset_dir(config.data_root, {}, &stats);
  if (stats.skipped > 0) {
    std::cerr << "warning: skipped " << stats.skipped
              << " undecodable file(s)\n";
  }
  const LabeledDataset mapped = apply_class_mode(config, full);
  const Index k = mapped.labels().size();

  RngState rng(config.seed);
  auto [train_ds, val_ds] =
      config.val.kind == ValSpec::Kind::Fraction
          ? stratified_split_fraction(mapped, config.val.fraction, rng)
          : stratified_split_fixed(mapped, config.val.per_class, rng);
  if (config.augment.any()) {
    train_ds = augment_dataset(train_ds, config.augment, rng);
  }

  const Shape input{1, config.input_size, config.input_size};
  Model<float> model;
  if (config.pretrained_weights) {
    // Transfer surgery: load the source model, give it a fresh head for this
    // label set, optionally freeze the feature stack. Archive problems here
    // are build failures for the train command.
    try {
      ModelRef source = load_model_ref(*config.pretrained_weights);
      if (source.spec.input_shape != input) {
        throw BuildError("pretrained model expects input " +
                         source.spec.input_shape.to_string() + ", config has " +
                         input.to_string());
      }
      model = replace_head(source.model, k, rng);
    } catch (const ArchiveError& e) {
      throw BuildError(e.what());
    }
  } else {
    model = build_model<float>(spec_for(config.model, input, k), rng);
  }
  if (config.freeze_boundary) {
    freeze_features(model, *config.freeze_boundary);
  }

  FitOptions options;
  options.epochs = config.epochs;
  options.batch_size = config.batch_size;
  options.optimizer = config.optimizer;
  options.learning_rate = config.learning_rate;
  const TrainReport report = fit(model, train_ds, val_ds, options, rng);

  fs::create_directories(config.out_dir);
  save_weights(model, config.out_dir / "weights.nnwa");
  write_file_atomic(
      config.out_dir / "model.json",
      model_json(model.spec(), mapped.labels(), "weights.nnwa").dump(2) + "\n");
  write_file_atomic(config.out_dir / "resolved_config.json",
                    resolved_config_json(config).dump(2) + "\n");
  write_file_atomic(config.out_dir / "train_report.csv", report_to_csv(report));
  write_file_atomic(config.out_dir / "train_report.json",
                    report_to_json(report));

  const auto [cm, metrics] = evaluate(model, val_ds);
  write_metrics_artifacts(config.out_dir, cm, metrics, mapped.labels());

  std::cout << "trained " << std::string(to_string(config.model)) << " on "
            << train_ds.size() << " samples (" << k << " classes), "
            << config.epochs << " epoch(s); artifacts in "
            << config.out_dir.string() << "\n";
  if (!report.rows.empty()) {
    std::cout << "final train_acc " << format_prob(report.rows.back().train_acc)
              << ", val_acc " << format_prob(report.rows.back().val_acc)
              << "\n";
  }
  return kExitOk;
}

int cmd_evaluate(const fs::path& model_path, const fs::path& data_path,
                 const std::string& class_mode, const fs::path& out_dir) {
  ModelRef ref = load_model_ref(model_path);

  ExperimentConfig mode_only;
  {
    nlohmann::json j;
    j["class_mode"] = class_mode;
    mode_only = parse_config(j);
  }
  const LabeledDataset full = load_dataset_dir(data_path);
  const LabeledDataset mapped = apply_class_mode(mode_only, full);

  if (mapped.labels().size() != ref.spec.num_classes) {
    const std::string head = ref.spec.layers[ref.spec.layers.size() - 2].name;
    throw ArchiveError("model head '" + head + "' is " +
                       std::to_string(ref.spec.num_classes) +
                       "-way but the dataset has " +
                       std::to_string(mapped.labels().size()) + " classes");
  }

  const auto [cm, metrics] = evaluate(ref.model, mapped);
  fs::create_directories(out_dir);
  write_metrics_artifacts(out_dir, cm, metrics, mapped.labels());
  print_measures(metrics);
  return kExitOk;
}

int cmd_predict(const fs::path& model_path, const fs::path& image_path) {
  ModelRef ref = load_model_ref(model_path);
  const Image img = decode_image_file(image_path);
  const Shape& in = ref.spec.input_shape;
  const Tensor<float> x = image_to_tensor(img, in.dim(0), in.dim(1), in.dim(2));
  const Tensor<float> probs = ref.model.forward(x);
  const Index best = argmax(probs);
  std::cout << "prediction: " << ref.labels.name(best) << "\n";
  for (Index i = 0; i < probs.size(); ++i) {
    std::cout << "p(" << ref.labels.name(i)
              << ") = " << format_prob(static_cast<double>(probs[i])) << "\n";
  }
  return kExitOk;
}

int cmd_filter(const std::string& name, const fs::path& in_path,
               const fs::path& out_path) {
  if (!find_filter(name)) {
    throw ConfigError("unknown filter '" + name + "'");
  }
  const Image img = decode_image_file(in_path);
  write_image_file(apply_filter(img, name), out_path);
  std::cout << "wrote " << out_path.string() << "\n";
  return kExitOk;
}

int cmd_split(const fs::path& data_path, double fraction, Index per_class,
              std::uint64_t seed, const fs::path& out_dir) {
  const LabeledDataset ds = load_dataset_dir(data_path);
  RngState rng(seed);
  const auto [train_ds, val_ds] =
      per_class > 0 ? stratified_split_fixed(ds, per_class, rng)
                    : stratified_split_fraction(ds, fraction, rng);
  fs::create_directories(out_dir);
  write_file_atomic(out_dir / "train_manifest.tsv",
                    dataset_manifest(train_ds, data_path));
  write_file_atomic(out_dir / "val_manifest.tsv",
                    dataset_manifest(val_ds, data_path));
  std::cout << "train " << train_ds.size() << " / val " << val_ds.size()
            << " samples; manifests in " << out_dir.string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cadnet: CNN training and inference for grayscale image "
               "classification"};
  app.require_subcommand(1);

  std::string config_path;
  auto* train = app.add_subcommand("train", "Train a model from a config file");
  train->add_option("--config", config_path, "Experiment config JSON")
      ->required();

  std::string eval_model, eval_data, eval_mode = "four", eval_out = ".";
  auto* evaluate_cmd =
      app.add_subcommand("evaluate", "Evaluate a trained model on a dataset");
  evaluate_cmd->add_option("--model", eval_model,
                           "Model directory or model.json")->required();
  evaluate_cmd->add_option("--data", eval_data, "Dataset root")->required();
  evaluate_cmd->add_option("--class-mode", eval_mode,
                           "four | three_drop_moderate | two_merged");
  evaluate_cmd->add_option("--out", eval_out, "Output directory");

  std::string predict_model, predict_image;
  auto* predict =
      app.add_subcommand("predict", "Classify a single image");
  predict->add_option("--model", predict_model,
                      "Model directory or model.json")->required();
  predict->add_option("--image", predict_image, "PGM/PPM image")->required();

  std::string filter_name, filter_in, filter_out;
  auto* filter = app.add_subcommand("filter", "Apply a standard filter");
  filter->add_option("--name", filter_name, "Filter name")->required();
  filter->add_option("--in", filter_in, "Input image")->required();
  filter->add_option("--out", filter_out, "Output PGM")->required();

  std::string split_data, split_out;
  double split_fraction = 0.0;
  Index split_per_class = 0;
  std::uint64_t split_seed = 0;
  auto* split = app.add_subcommand("split", "Write stratified split manifests");
  split->add_option("--data", split_data, "Dataset root")->required();
  auto* frac_opt =
      split->add_option("--fraction", split_fraction, "Validation fraction");
  auto* fixed_opt = split->add_option("--per-class", split_per_class,
                                      "Fixed validation count per class");
  frac_opt->excludes(fixed_opt);
  split->add_option("--seed", split_seed, "Split seed");
  split->add_option("--out", split_out, "Manifest directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*train) return cmd_train(config_path);
    if (*evaluate_cmd) {
      return cmd_evaluate(eval_model, eval_data, eval_mode, eval_out);
    }
    if (*predict) return cmd_predict(predict_model, predict_image);
    if (*filter) return cmd_filter(filter_name, filter_in, filter_out);
    if (*split) {
      if ((split_fraction > 0.0) == (split_per_class > 0)) {
        throw ConfigError("split needs exactly one of --fraction/--per-class");
      }
      return cmd_split(split_data, split_fraction, split_per_class, split_seed,
                       split_out);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const BuildError& e) {
    std::cerr << "build error: " << e.what() << "\n";
    return kExitBuild;
  } catch (const ArchiveError& e) {
    std::cerr << "archive error: " << e.what() << "\n";
    return kExitArchive;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
