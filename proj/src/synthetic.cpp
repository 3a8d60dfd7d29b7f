#include "cadnet/synthetic.hpp"

#include <algorithm>
#include <cstdio>

#include "cadnet/errors.hpp"

namespace cadnet::synth {

Texture texture_from_string(std::string_view name) {
  if (name == "vstripes") return Texture::VerticalStripes;
  if (name == "hstripes") return Texture::HorizontalStripes;
  if (name == "checker") return Texture::Checkerboard;
  if (name == "diagonal") return Texture::DiagonalStripes;
  throw DataError("unknown texture '" + std::string(name) + "'");
}

Image make_texture_image(Texture kind, Index height, Index width,
                         RngState& rng, int noise) {
  const Index period = 3 + static_cast<Index>(rng.bounded(3));  // 3..5
  const Index phase = static_cast<Index>(
      rng.bounded(static_cast<std::uint64_t>(2 * period)));
  const int lo = 60, hi = 195;

  Image img = Image::filled(height, width, 1, 0);
  for (Index y = 0; y < height; ++y) {
    for (Index x = 0; x < width; ++x) {
      Index coordinate = 0;
      switch (kind) {
        case Texture::VerticalStripes: coordinate = x; break;
        case Texture::HorizontalStripes: coordinate = y; break;
        case Texture::Checkerboard: coordinate = (y / period + x / period) * period; break;
        case Texture::DiagonalStripes: coordinate = y + x; break;
      }
      const bool on = (((coordinate + phase) / period) % 2) == 0;
      int value = on ? hi : lo;
      if (noise > 0) {
        value += static_cast<int>(
                     rng.bounded(static_cast<std::uint64_t>(2 * noise + 1))) -
                 noise;
      }
      img.at(y, x) = static_cast<std::uint8_t>(std::clamp(value, 0, 255));
    }
  }
  return img;
}

LabeledDataset make_dataset(const std::vector<ClassSpec>& classes,
                            Index height, Index width, RngState& rng,
                            int noise) {
  std::vector<std::string> names;
  for (const ClassSpec& c : classes) names.push_back(c.name);
  LabelMap labels(std::move(names));

  std::vector<Sample> samples;
  for (std::size_t ci = 0; ci < classes.size(); ++ci) {
    for (Index i = 0; i < classes[ci].count; ++i) {
      Sample s;
      s.image = make_texture_image(classes[ci].texture, height, width, rng,
                                   noise);
      s.label = static_cast<Index>(ci);
      s.source = "synthetic://" + classes[ci].name + "/" + std::to_string(i);
      samples.push_back(std::move(s));
    }
  }
  return LabeledDataset(std::move(labels), std::move(samples));
}

Index write_dataset_tree(const std::filesystem::path& root,
                         const std::vector<ClassSpec>& classes, Index height,
                         Index width, RngState& rng, int noise) {
  Index written = 0;
  for (const ClassSpec& c : classes) {
    const std::filesystem::path dir = root / c.name;
    std::filesystem::create_directories(dir);
    for (Index i = 0; i < c.count; ++i) {
      const Image img = make_texture_image(c.texture, height, width, rng,
                                           noise);
      // Zero-padded names keep lexicographic order == numeric order.
      char name[32];
      std::snprintf(name, sizeof(name), "%05lld.pgm",
                    static_cast<long long>(i));
      write_image_file(img, dir / name);
      ++written;
    }
  }
  return written;
}

std::vector<ClassSpec> kaggle_style_classes(Index per_class) {
  return {
      {"MildDemented", Texture::VerticalStripes, per_class},
      {"ModerateDemented", Texture::Checkerboard, per_class},
      {"NonDemented", Texture::HorizontalStripes, per_class},
      {"VeryMildDemented", Texture::DiagonalStripes, per_class},
  };
}

}  // namespace cadnet::synth
