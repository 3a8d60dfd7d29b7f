#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cadnet/rng.hpp"
#include "cadnet/shape.hpp"

namespace cadnet {

/// 8-bit raster, row-major, channel-interleaved. channels is 1 (gray) or 3
/// (RGB); intensities run 0 (black) to 255 (white).
struct Image {
  Index height = 0;
  Index width = 0;
  Index channels = 1;
  std::vector<std::uint8_t> pixels;

  static Image filled(Index h, Index w, Index c, std::uint8_t value) {
    Image img;
    img.height = h;
    img.width = w;
    img.channels = c;
    img.pixels.assign(static_cast<std::size_t>(h * w * c), value);
    return img;
  }

  std::uint8_t& at(Index y, Index x, Index c = 0) {
    return pixels[static_cast<std::size_t>((y * width + x) * channels + c)];
  }
  std::uint8_t at(Index y, Index x, Index c = 0) const {
    return pixels[static_cast<std::size_t>((y * width + x) * channels + c)];
  }

  bool operator==(const Image& other) const {
    return height == other.height && width == other.width &&
           channels == other.channels && pixels == other.pixels;
  }
};

/// Decodes a PGM (P2/P5) or PPM (P3/P6) stream with maxval 255. Header
/// comments (#) are honored. Throws DataError on malformed or truncated
/// input and on any other maxval.
Image decode_image(std::span<const std::uint8_t> bytes);
Image decode_image_file(const std::filesystem::path& path);

/// Serializes as binary PGM (P5) for 1 channel or PPM (P6) for 3.
std::vector<std::uint8_t> encode_image(const Image& img);
void write_image_file(const Image& img, const std::filesystem::path& path);

/// BT.601 luma: gray = round(0.299 R + 0.587 G + 0.114 B). Gray input is
/// returned unchanged (bitwise).
Image to_grayscale(const Image& img);

/// Bilinear resize with corner-aligned sampling. Constant images stay
/// constant; resizing to the same extents returns an identical image.
Image resize_bilinear(const Image& img, Index target_height,
                      Index target_width);

Image flip_horizontal(const Image& img);
Image flip_vertical(const Image& img);

/// Rotation about the image center, positive degrees counter-clockwise.
/// Multiples of 90 are exact pixel permutations (extents swap for 90/270);
/// other angles bilinear-sample the source with black fill outside it.
Image rotate(const Image& img, double degrees);

/// Crop at a uniformly chosen top-left offset (row drawn before column).
/// Deterministic per rng state; a full-size crop returns the input.
Image random_crop(const Image& img, Index crop_height, Index crop_width,
                  RngState& rng);

Image crop(const Image& img, Index top, Index left, Index crop_height,
           Index crop_width);

/// One entry of the standard 3x3 filter bank. `coeffs` are the raw integer
/// stencil values in row-major order; `normalization` scales them (1, 1/9,
/// or 1/16). Every kernel in the bank is 180-degree rotation symmetric, so
/// cross-correlation and true convolution agree on it.
struct FilterKernel {
  std::string_view name;
  std::array<double, 9> coeffs;
  double normalization;
};

/// identity, edge-1/2/3, sharpen, box-blur (x1/9), gaussian-blur (x1/16).
std::span<const FilterKernel> filter_bank();
const FilterKernel* find_filter(std::string_view name);

/// Valid cross-correlation of a grayscale image with the named normalized
/// kernel; color input is converted to gray first. Results are clamped to
/// [0,255] and rounded half away from zero. Throws DataError on an unknown
/// name.
Image apply_filter(const Image& img, std::string_view name);

}  // namespace cadnet
