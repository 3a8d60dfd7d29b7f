#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cadnet/dataset.hpp"
#include "cadnet/image.hpp"
#include "cadnet/rng.hpp"

namespace cadnet::synth {

/// Texture families used to synthesize separable grayscale fixtures. Each
/// image gets a random stripe period, phase, and per-pixel noise, so
/// classifiers must learn the orientation/structure, not a constant.
enum class Texture {
  VerticalStripes,
  HorizontalStripes,
  Checkerboard,
  DiagonalStripes,
};

Texture texture_from_string(std::string_view name);

/// One grayscale image of the given texture. noise is the +/- amplitude of
/// per-pixel uniform jitter (0 disables it).
Image make_texture_image(Texture kind, Index height, Index width,
                         RngState& rng, int noise = 20);

struct ClassSpec {
  std::string name;
  Texture texture;
  Index count;
};

/// In-memory dataset with one class per spec entry, provenance
/// "synthetic://<class>/<index>". Classes keep the given order.
LabeledDataset make_dataset(const std::vector<ClassSpec>& classes,
                            Index height, Index width, RngState& rng,
                            int noise = 20);

/// Writes `<root>/<ClassName>/<index>.pgm` trees for CLI-facing tests and
/// demos. Returns the number of files written.
Index write_dataset_tree(const std::filesystem::path& root,
                         const std::vector<ClassSpec>& classes, Index height,
                         Index width, RngState& rng, int noise = 20);

/// The four-class layout matching the standard dementia-stage directory
/// names, one texture per class.
std::vector<ClassSpec> kaggle_style_classes(Index per_class);

}  // namespace cadnet::synth
