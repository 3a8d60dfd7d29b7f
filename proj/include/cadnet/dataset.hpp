#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cadnet/image.hpp"
#include "cadnet/rng.hpp"
#include "cadnet/tensor.hpp"

namespace cadnet {

/// Ordered class names mapped to contiguous indices starting at 0.
class LabelMap {
 public:
  LabelMap() = default;
  explicit LabelMap(std::vector<std::string> names);

  Index size() const { return static_cast<Index>(names_.size()); }
  const std::string& name(Index index) const {
    return names_.at(static_cast<std::size_t>(index));
  }
  const std::vector<std::string>& names() const { return names_; }
  std::optional<Index> index_of(std::string_view name) const;

  bool operator==(const LabelMap& other) const {
    return names_ == other.names_;
  }

 private:
  std::vector<std::string> names_;
};

struct Sample {
  Image image;
  Index label = 0;
  std::filesystem::path source;  // provenance
};

/// Labeled image collection plus its LabelMap. Sample order is part of the
/// determinism contract: loaders emit (class, then filename) lexicographic
/// order, and splits preserve relative order.
class LabeledDataset {
 public:
  LabeledDataset() = default;
  LabeledDataset(LabelMap labels, std::vector<Sample> samples);

  Index size() const { return static_cast<Index>(samples_.size()); }
  const Sample& sample(Index i) const {
    return samples_.at(static_cast<std::size_t>(i));
  }
  const std::vector<Sample>& samples() const { return samples_; }
  const LabelMap& labels() const { return labels_; }

  /// Number of samples per class index.
  std::vector<Index> class_counts() const;

 private:
  LabelMap labels_;
  std::vector<Sample> samples_;
};

struct LoadStats {
  Index loaded = 0;
  Index skipped = 0;  // undecodable files
};

/// Loads `<root>/<ClassName>/<file>`: every immediate subdirectory is one
/// class. Without an explicit LabelMap the classes are the subdirectory
/// names sorted lexicographically. Undecodable files are skipped with a
/// warning on stderr and counted in stats. An empty subdirectory yields a
/// class with count 0.
LabeledDataset load_dataset_dir(const std::filesystem::path& root,
                                const std::optional<LabelMap>& labels = {},
                                LoadStats* stats = nullptr);

/// Per-class sampling without replacement into (train, val); the val side
/// takes floor(count * fraction) per class. Both sides share the input's
/// LabelMap; together they partition the input exactly.
std::pair<LabeledDataset, LabeledDataset> stratified_split_fraction(
    const LabeledDataset& ds, double fraction, RngState& rng);

/// Fixed per-class validation count; throws DataError when any class is
/// smaller than the request.
std::pair<LabeledDataset, LabeledDataset> stratified_split_fixed(
    const LabeledDataset& ds, Index val_per_class, RngState& rng);

/// Mapping value that removes a class and its samples.
inline constexpr std::string_view kDropClass = "DROP";

/// Relabels every sample through old-name -> new-name. The mapping must
/// cover every class present; targets equal to kDropClass delete those
/// samples. The fresh LabelMap lists the new names lexicographically.
LabeledDataset merge_classes(const LabeledDataset& ds,
                             const std::map<std::string, std::string>& mapping);

/// One line per sample: `<relative-path>\t<class-name>\n`, UTF-8, LF.
std::string dataset_manifest(const LabeledDataset& ds,
                             const std::filesystem::path& root);

/// Converts to a [channels, height, width] float tensor of raw 0..255
/// intensities (models rescale internally). Gray/color conversion and
/// bilinear resize are applied as needed.
Tensor<float> image_to_tensor(const Image& img, Index channels, Index height,
                              Index width);

struct AugmentFlags {
  bool crop = false;
  bool flip_h = false;
  bool flip_v = false;
  bool grayscale = false;
  bool rotate = false;

  bool any() const { return crop || flip_h || flip_v || grayscale || rotate; }
};

/// Supplements the dataset: the originals followed by one transformed copy
/// per enabled flag per sample (flag order: crop, flip_h, flip_v, grayscale,
/// rotate). Random crops keep 7/8 of each axis and resize back; random
/// rotation draws from [-15, 15] degrees. Deterministic per rng state.
LabeledDataset augment_dataset(const LabeledDataset& ds,
                               const AugmentFlags& flags, RngState& rng);

}  // namespace cadnet
