#include "cadnet/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <numbers>
#include <sstream>

#include "cadnet/errors.hpp"
#include "cadnet/io.hpp"

namespace cadnet {

namespace {

constexpr double kPi = std::numbers::pi;

std::uint8_t clamp_round(double v) {
  // Half-away-from-zero rounding, then clamp to the 8-bit range.
  const double r = std::round(v);
  if (r <= 0.0) return 0;
  if (r >= 255.0) return 255;
  return static_cast<std::uint8_t>(r);
}

struct TokenReader {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;

  // Skips whitespace and '#' comments (to end of line).
  void skip_space() {
    while (pos < bytes.size()) {
      const char c = static_cast<char>(bytes[pos]);
      if (c == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos;
      } else {
        break;
      }
    }
  }

  std::string next_token() {
    skip_space();
    std::string tok;
    while (pos < bytes.size() &&
           !std::isspace(static_cast<unsigned char>(bytes[pos])) &&
           bytes[pos] != '#') {
      tok.push_back(static_cast<char>(bytes[pos]));
      ++pos;
    }
    if (tok.empty()) throw DataError("image: truncated header");
    return tok;
  }

  Index next_int(const char* what) {
    const std::string tok = next_token();
    try {
      std::size_t used = 0;
      const long long v = std::stoll(tok, &used);
      if (used != tok.size() || v < 0) throw std::invalid_argument(tok);
      return static_cast<Index>(v);
    } catch (const std::exception&) {
      throw DataError(std::string("image: bad ") + what + " '" + tok + "'");
    }
  }
};

}  // namespace

Image decode_image(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P') {
    throw DataError("image: not a PGM/PPM stream");
  }
  const char kind = static_cast<char>(bytes[1]);
  if (kind != '2' && kind != '3' && kind != '5' && kind != '6') {
    throw DataError(std::string("image: unsupported format P") + kind);
  }
  const bool color = (kind == '3' || kind == '6');
  const bool ascii = (kind == '2' || kind == '3');

  TokenReader r{bytes, 2};
  const Index width = r.next_int("width");
  const Index height = r.next_int("height");
  const Index maxval = r.next_int("maxval");
  if (width < 1 || height < 1) throw DataError("image: empty raster");
  if (maxval != 255) {
    throw DataError("image: unsupported maxval " + std::to_string(maxval) +
                    " (only 255)");
  }

  Image img;
  img.height = height;
  img.width = width;
  img.channels = color ? 3 : 1;
  const std::size_t count =
      static_cast<std::size_t>(height * width * img.channels);
  img.pixels.resize(count);

  if (ascii) {
    for (std::size_t i = 0; i < count; ++i) {
      const Index v = r.next_int("sample");
      if (v > 255) throw DataError("image: sample exceeds maxval");
      img.pixels[i] = static_cast<std::uint8_t>(v);
    }
  } else {
    // Exactly one whitespace byte separates the header from the raster.
    if (r.pos >= bytes.size() ||
        !std::isspace(static_cast<unsigned char>(bytes[r.pos]))) {
      throw DataError("image: missing raster separator");
    }
    ++r.pos;
    if (bytes.size() - r.pos < count) {
      throw DataError("image: truncated raster (" +
                      std::to_string(bytes.size() - r.pos) + " of " +
                      std::to_string(count) + " bytes)");
    }
    std::memcpy(img.pixels.data(), bytes.data() + r.pos, count);
  }
  return img;
}

Image decode_image_file(const std::filesystem::path& path) {
  try {
    const std::vector<std::uint8_t> bytes = read_file(path);
    return decode_image(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_image(const Image& img) {
  if (img.channels != 1 && img.channels != 3) {
    throw DataError("image: only 1- or 3-channel images can be encoded");
  }
  std::ostringstream header;
  header << (img.channels == 1 ? "P5" : "P6") << "\n"
         << img.width << " " << img.height << "\n255\n";
  const std::string h = header.str();
  std::vector<std::uint8_t> out(h.begin(), h.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

void write_image_file(const Image& img, const std::filesystem::path& path) {
  write_file_atomic(path, encode_image(img));
}

Image to_grayscale(const Image& img) {
  if (img.channels == 1) return img;
  Image out = Image::filled(img.height, img.width, 1, 0);
  for (Index y = 0; y < img.height; ++y) {
    for (Index x = 0; x < img.width; ++x) {
      const double luma = 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) +
                          0.114 * img.at(y, x, 2);
      out.at(y, x) = clamp_round(luma);
    }
  }
  return out;
}

namespace {

double sample_bilinear(const Image& img, Index c, double sy, double sx,
                       bool zero_outside) {
  const Index y0 = static_cast<Index>(std::floor(sy));
  const Index x0 = static_cast<Index>(std::floor(sx));
  const double fy = sy - static_cast<double>(y0);
  const double fx = sx - static_cast<double>(x0);
  auto tap = [&](Index y, Index x) -> double {
    if (y < 0 || y >= img.height || x < 0 || x >= img.width) {
      if (zero_outside) return 0.0;
      // Clamp-to-edge for in-range sampling with float slop.
      y = std::clamp<Index>(y, 0, img.height - 1);
      x = std::clamp<Index>(x, 0, img.width - 1);
    }
    return static_cast<double>(img.at(y, x, c));
  };
  return (1.0 - fy) * ((1.0 - fx) * tap(y0, x0) + fx * tap(y0, x0 + 1)) +
         fy * ((1.0 - fx) * tap(y0 + 1, x0) + fx * tap(y0 + 1, x0 + 1));
}

}  // namespace

Image resize_bilinear(const Image& img, Index target_height,
                      Index target_width) {
  if (target_height < 1 || target_width < 1) {
    throw DataError("resize: target extents must be >= 1");
  }
  if (target_height == img.height && target_width == img.width) return img;
  Image out = Image::filled(target_height, target_width, img.channels, 0);
  const double sy_scale =
      target_height > 1
          ? static_cast<double>(img.height - 1) /
                static_cast<double>(target_height - 1)
          : 0.0;
  const double sx_scale =
      target_width > 1 ? static_cast<double>(img.width - 1) /
                             static_cast<double>(target_width - 1)
                       : 0.0;
  for (Index y = 0; y < target_height; ++y) {
    for (Index x = 0; x < target_width; ++x) {
      const double sy = static_cast<double>(y) * sy_scale;
      const double sx = static_cast<double>(x) * sx_scale;
      for (Index c = 0; c < img.channels; ++c) {
        out.at(y, x, c) = clamp_round(sample_bilinear(img, c, sy, sx, false));
      }
    }
  }
  return out;
}

Image flip_horizontal(const Image& img) {
  Image out = img;
  for (Index y = 0; y < img.height; ++y) {
    for (Index x = 0; x < img.width; ++x) {
      for (Index c = 0; c < img.channels; ++c) {
        out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
      }
    }
  }
  return out;
}

Image flip_vertical(const Image& img) {
  Image out = img;
  for (Index y = 0; y < img.height; ++y) {
    for (Index x = 0; x < img.width; ++x) {
      for (Index c = 0; c < img.channels; ++c) {
        out.at(y, x, c) = img.at(img.height - 1 - y, x, c);
      }
    }
  }
  return out;
}

Image rotate(const Image& img, double degrees) {
  double turns = std::fmod(degrees, 360.0);
  if (turns < 0) turns += 360.0;

  // Exact permutations for quarter turns.
  if (turns == 0.0) return img;
  if (turns == 90.0 || turns == 270.0) {
    Image out = Image::filled(img.width, img.height, img.channels, 0);
    for (Index y = 0; y < out.height; ++y) {
      for (Index x = 0; x < out.width; ++x) {
        for (Index c = 0; c < img.channels; ++c) {
          if (turns == 90.0) {
            out.at(y, x, c) = img.at(x, img.width - 1 - y, c);
          } else {
            out.at(y, x, c) = img.at(img.height - 1 - x, y, c);
          }
        }
      }
    }
    return out;
  }
  if (turns == 180.0) {
    Image out = img;
    for (Index y = 0; y < img.height; ++y) {
      for (Index x = 0; x < img.width; ++x) {
        for (Index c = 0; c < img.channels; ++c) {
          out.at(y, x, c) = img.at(img.height - 1 - y, img.width - 1 - x, c);
        }
      }
    }
    return out;
  }

  // General angle: inverse-map each destination pixel into the source and
  // bilinear-sample, black outside.
  const double rad = turns * kPi / 180.0;
  const double cos_t = std::cos(rad);
  const double sin_t = std::sin(rad);
  const double cy = static_cast<double>(img.height - 1) / 2.0;
  const double cx = static_cast<double>(img.width - 1) / 2.0;
  Image out = Image::filled(img.height, img.width, img.channels, 0);
  for (Index y = 0; y < img.height; ++y) {
    for (Index x = 0; x < img.width; ++x) {
      const double dx = static_cast<double>(x) - cx;
      const double dy = static_cast<double>(y) - cy;
      // Source position = destination rotated by +theta (y axis points down).
      const double sx = cos_t * dx - sin_t * dy + cx;
      const double sy = sin_t * dx + cos_t * dy + cy;
      if (sx < -1.0 || sx > static_cast<double>(img.width) ||
          sy < -1.0 || sy > static_cast<double>(img.height)) {
        continue;  // fully outside, stays black
      }
      for (Index c = 0; c < img.channels; ++c) {
        out.at(y, x, c) = clamp_round(sample_bilinear(img, c, sy, sx, true));
      }
    }
  }
  return out;
}

Image crop(const Image& img, Index top, Index left, Index crop_height,
           Index crop_width) {
  if (crop_height < 1 || crop_width < 1 || top < 0 || left < 0 ||
      top + crop_height > img.height || left + crop_width > img.width) {
    throw DataError("crop: window outside image");
  }
  Image out = Image::filled(crop_height, crop_width, img.channels, 0);
  for (Index y = 0; y < crop_height; ++y) {
    for (Index x = 0; x < crop_width; ++x) {
      for (Index c = 0; c < img.channels; ++c) {
        out.at(y, x, c) = img.at(top + y, left + x, c);
      }
    }
  }
  return out;
}

Image random_crop(const Image& img, Index crop_height, Index crop_width,
                  RngState& rng) {
  if (crop_height > img.height || crop_width > img.width) {
    throw DataError("random_crop: crop larger than image");
  }
  const Index top = static_cast<Index>(
      rng.bounded(static_cast<std::uint64_t>(img.height - crop_height + 1)));
  const Index left = static_cast<Index>(
      rng.bounded(static_cast<std::uint64_t>(img.width - crop_width + 1)));
  return crop(img, top, left, crop_height, crop_width);
}

std::span<const FilterKernel> filter_bank() {
  static const std::array<FilterKernel, 7> bank = {{
      {"identity", {0, 0, 0, 0, 1, 0, 0, 0, 0}, 1.0},
      {"edge-1", {1, 0, -1, 0, 0, 0, -1, 0, 1}, 1.0},
      {"edge-2", {0, 1, 0, 1, -4, 1, 0, 1, 0}, 1.0},
      {"edge-3", {-1, -1, -1, -1, 8, -1, -1, -1, -1}, 1.0},
      {"sharpen", {0, -1, 0, -1, 5, -1, 0, -1, 0}, 1.0},
      {"box-blur", {1, 1, 1, 1, 1, 1, 1, 1, 1}, 1.0 / 9.0},
      {"gaussian-blur", {1, 2, 1, 2, 4, 2, 1, 2, 1}, 1.0 / 16.0},
  }};
  return bank;
}

const FilterKernel* find_filter(std::string_view name) {
  for (const FilterKernel& k : filter_bank()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

Image apply_filter(const Image& img, std::string_view name) {
  const FilterKernel* k = find_filter(name);
  if (!k) throw DataError("unknown filter '" + std::string(name) + "'");
  const Image gray = to_grayscale(img);
  if (gray.height < 3 || gray.width < 3) {
    throw DataError("apply_filter: image smaller than the 3x3 kernel");
  }
  Image out = Image::filled(gray.height - 2, gray.width - 2, 1, 0);
  for (Index y = 0; y < out.height; ++y) {
    for (Index x = 0; x < out.width; ++x) {
      double acc = 0.0;
      for (Index ky = 0; ky < 3; ++ky) {
        for (Index kx = 0; kx < 3; ++kx) {
          acc += k->coeffs[static_cast<std::size_t>(ky * 3 + kx)] *
                 static_cast<double>(gray.at(y + ky, x + kx));
        }
      }
      out.at(y, x) = clamp_round(acc * k->normalization);
    }
  }
  return out;
}

}  // namespace cadnet
