#include "cadnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>

#include "cadnet/errors.hpp"

namespace cadnet {

LabelMap::LabelMap(std::vector<std::string> names) : names_(std::move(names)) {
  std::set<std::string_view> seen;
  for (const std::string& n : names_) {
    if (n.empty()) throw DataError("LabelMap: empty class name");
    if (!seen.insert(n).second) {
      throw DataError("LabelMap: duplicate class name '" + n + "'");
    }
  }
}

std::optional<Index> LabelMap::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return static_cast<Index>(i);
  }
  return std::nullopt;
}

LabeledDataset::LabeledDataset(LabelMap labels, std::vector<Sample> samples)
    : labels_(std::move(labels)), samples_(std::move(samples)) {
  for (const Sample& s : samples_) {
    if (s.label < 0 || s.label >= labels_.size()) {
      throw DataError("dataset: label index " + std::to_string(s.label) +
                      " outside the label map");
    }
  }
}

std::vector<Index> LabeledDataset::class_counts() const {
  std::vector<Index> counts(static_cast<std::size_t>(labels_.size()), 0);
  for (const Sample& s : samples_) {
    ++counts[static_cast<std::size_t>(s.label)];
  }
  return counts;
}

LabeledDataset load_dataset_dir(const std::filesystem::path& root,
                                const std::optional<LabelMap>& labels,
                                LoadStats* stats) {
  if (!std::filesystem::is_directory(root)) {
    throw DataError("dataset root " + root.string() + " is not a directory");
  }
  std::vector<std::string> class_dirs;
  for (const auto& entry : std::filesystem::directory_iterator(root)) {
    if (entry.is_directory()) {
      class_dirs.push_back(entry.path().filename().string());
    }
  }
  if (class_dirs.empty()) {
    throw DataError("dataset root " + root.string() +
                    " has no class directories");
  }
  std::sort(class_dirs.begin(), class_dirs.end());

  LabelMap map = labels ? *labels : LabelMap(class_dirs);
  if (labels) {
    for (const std::string& dir : class_dirs) {
      if (!map.index_of(dir)) {
        throw DataError("dataset: directory '" + dir +
                        "' is not a class in the given label map");
      }
    }
  }

  LoadStats local;
  std::vector<Sample> samples;
  for (const std::string& dir : class_dirs) {
    const Index label = *map.index_of(dir);
    std::vector<std::filesystem::path> files;
    for (const auto& entry :
         std::filesystem::directory_iterator(root / dir)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(),
              [](const auto& a, const auto& b) { return a.string() < b.string(); });
    Index decoded = 0;
    for (const std::filesystem::path& file : files) {
      try {
        Sample s;
        s.image = decode_image_file(file);
        s.label = label;
        s.source = file;
        samples.push_back(std::move(s));
        ++local.loaded;
        ++decoded;
      } catch (const DataError& e) {
        std::cerr << "warning: skipping undecodable file: " << e.what()
                  << "\n";
        ++local.skipped;
      }
    }
    if (decoded == 0) {
      std::cerr << "warning: class '" << dir << "' has no images\n";
    }
  }
  if (stats) *stats = local;
  return LabeledDataset(std::move(map), std::move(samples));
}

namespace {

std::pair<LabeledDataset, LabeledDataset> split_by_val_counts(
    const LabeledDataset& ds, const std::vector<Index>& val_counts,
    RngState& rng) {
  const Index k = ds.labels().size();
  // Per class: shuffle that class's sample indices, mark the first n as val.
  std::vector<char> in_val(static_cast<std::size_t>(ds.size()), 0);
  for (Index c = 0; c < k; ++c) {
    std::vector<Index> members;
    for (Index i = 0; i < ds.size(); ++i) {
      if (ds.sample(i).label == c) members.push_back(i);
    }
    for (std::size_t i = members.size(); i > 1; --i) {
      const std::size_t j =
          static_cast<std::size_t>(rng.bounded(static_cast<std::uint64_t>(i)));
      std::swap(members[i - 1], members[j]);
    }
    for (Index n = 0; n < val_counts[static_cast<std::size_t>(c)]; ++n) {
      in_val[static_cast<std::size_t>(members[static_cast<std::size_t>(n)])] = 1;
    }
  }
  std::vector<Sample> train_samples, val_samples;
  for (Index i = 0; i < ds.size(); ++i) {
    if (in_val[static_cast<std::size_t>(i)]) {
      val_samples.push_back(ds.sample(i));
    } else {
      train_samples.push_back(ds.sample(i));
    }
  }
  return {LabeledDataset(ds.labels(), std::move(train_samples)),
          LabeledDataset(ds.labels(), std::move(val_samples))};
}

}  // namespace

std::pair<LabeledDataset, LabeledDataset> stratified_split_fraction(
    const LabeledDataset& ds, double fraction, RngState& rng) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw DataError("stratified split: fraction must be in (0, 1)");
  }
  const std::vector<Index> counts = ds.class_counts();
  std::vector<Index> val_counts(counts.size());
  for (std::size_t c = 0; c < counts.size(); ++c) {
    val_counts[c] = static_cast<Index>(
        std::floor(static_cast<double>(counts[c]) * fraction));
  }
  return split_by_val_counts(ds, val_counts, rng);
}

std::pair<LabeledDataset, LabeledDataset> stratified_split_fixed(
    const LabeledDataset& ds, Index val_per_class, RngState& rng) {
  if (val_per_class < 0) {
    throw DataError("stratified split: per-class count must be >= 0");
  }
  const std::vector<Index> counts = ds.class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] < val_per_class) {
      throw DataError("stratified split: class '" +
                      ds.labels().name(static_cast<Index>(c)) + "' has " +
                      std::to_string(counts[c]) + " samples, fewer than " +
                      std::to_string(val_per_class));
    }
  }
  std::vector<Index> val_counts(counts.size(), val_per_class);
  return split_by_val_counts(ds, val_counts, rng);
}

LabeledDataset merge_classes(
    const LabeledDataset& ds,
    const std::map<std::string, std::string>& mapping) {
  // Every present class must be mapped.
  for (const std::string& name : ds.labels().names()) {
    if (!mapping.contains(name)) {
      throw DataError("merge_classes: class '" + name + "' is unmapped");
    }
  }
  std::set<std::string> target_names;
  for (const std::string& name : ds.labels().names()) {
    const std::string& target = mapping.at(name);
    if (target != kDropClass) target_names.insert(target);
  }
  if (target_names.empty()) {
    throw DataError("merge_classes: every class was dropped");
  }
  LabelMap new_map(
      std::vector<std::string>(target_names.begin(), target_names.end()));

  std::vector<Sample> samples;
  for (const Sample& s : ds.samples()) {
    const std::string& target = mapping.at(ds.labels().name(s.label));
    if (target == kDropClass) continue;
    Sample copy = s;
    copy.label = *new_map.index_of(target);
    samples.push_back(std::move(copy));
  }
  return LabeledDataset(std::move(new_map), std::move(samples));
}

std::string dataset_manifest(const LabeledDataset& ds,
                             const std::filesystem::path& root) {
  std::string out;
  for (const Sample& s : ds.samples()) {
    const std::filesystem::path rel =
        s.source.lexically_relative(root);
    out += rel.generic_string();
    out += '\t';
    out += ds.labels().name(s.label);
    out += '\n';
  }
  return out;
}

Tensor<float> image_to_tensor(const Image& img, Index channels, Index height,
                              Index width) {
  Image prepared = img;
  if (channels == 1 && prepared.channels != 1) {
    prepared = to_grayscale(prepared);
  } else if (channels == 3 && prepared.channels == 1) {
    Image rgb = Image::filled(prepared.height, prepared.width, 3, 0);
    for (Index y = 0; y < prepared.height; ++y) {
      for (Index x = 0; x < prepared.width; ++x) {
        for (Index c = 0; c < 3; ++c) rgb.at(y, x, c) = prepared.at(y, x);
      }
    }
    prepared = std::move(rgb);
  }
  if (prepared.height != height || prepared.width != width) {
    prepared = resize_bilinear(prepared, height, width);
  }
  Tensor<float> out(Shape{channels, height, width});
  for (Index c = 0; c < channels; ++c) {
    for (Index y = 0; y < height; ++y) {
      for (Index x = 0; x < width; ++x) {
        out(c, y, x) = static_cast<float>(prepared.at(y, x, c));
      }
    }
  }
  return out;
}

LabeledDataset augment_dataset(const LabeledDataset& ds,
                               const AugmentFlags& flags, RngState& rng) {
  std::vector<Sample> samples(ds.samples());
  auto add = [&samples](const Sample& base, Image img, const char* tag) {
    Sample s;
    s.image = std::move(img);
    s.label = base.label;
    s.source = base.source.string() + "#" + tag;
    samples.push_back(std::move(s));
  };
  for (const Sample& s : ds.samples()) {
    const Image& img = s.image;
    if (flags.crop) {
      const Index ch = std::max<Index>(1, img.height * 7 / 8);
      const Index cw = std::max<Index>(1, img.width * 7 / 8);
      Image cropped = random_crop(img, ch, cw, rng);
      add(s, resize_bilinear(cropped, img.height, img.width), "crop");
    }
    if (flags.flip_h) add(s, flip_horizontal(img), "flip_h");
    if (flags.flip_v) add(s, flip_vertical(img), "flip_v");
    if (flags.grayscale) add(s, to_grayscale(img), "grayscale");
    if (flags.rotate) {
      const double angle = -15.0 + 30.0 * rng.next_unit_double();
      add(s, rotate(img, angle), "rotate");
    }
  }
  return LabeledDataset(ds.labels(), std::move(samples));
}

}  // namespace cadnet
