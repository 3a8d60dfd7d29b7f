#include "cadnet/archive.hpp"

#include <array>
#include <bit>

#include "cadnet/errors.hpp"
#include "cadnet/io.hpp"

namespace cadnet {

std::uint32_t crc32(std::span<const std::uint8_t> data) {
  static const std::array<std::uint32_t, 256> table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int bit = 0; bit < 8; ++bit) {
        c = (c & 1) ? (0xEDB88320u ^ (c >> 1)) : (c >> 1);
      }
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t crc = 0xFFFFFFFFu;
  for (std::uint8_t b : data) {
    crc = table[(crc ^ b) & 0xFFu] ^ (crc >> 8);
  }
  return crc ^ 0xFFFFFFFFu;
}

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
  }
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
  }
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
  put_u32(out, std::bit_cast<std::uint32_t>(v));
}

struct Reader {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;

  void need(std::size_t n, const char* what) const {
    if (bytes.size() - pos < n) {
      throw ArchiveError(std::string("truncated archive while reading ") +
                         what);
    }
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return bytes[pos++];
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    std::uint16_t v = static_cast<std::uint16_t>(bytes[pos]) |
                      static_cast<std::uint16_t>(bytes[pos + 1]) << 8;
    pos += 2;
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(bytes[pos + static_cast<std::size_t>(i)])
           << (8 * i);
    }
    pos += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(bytes[pos + static_cast<std::size_t>(i)])
           << (8 * i);
    }
    pos += 8;
    return v;
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
};

struct TensorRecord {
  Shape shape;
  std::vector<float> values;
};

struct LayerRecord {
  std::string name;
  std::vector<TensorRecord> tensors;
};

}  // namespace

std::vector<std::uint8_t> encode_weights(Model<float>& model) {
  std::vector<std::uint8_t> out;
  out.push_back('N');
  out.push_back('N');
  out.push_back('W');
  out.push_back('A');
  put_u32(out, kArchiveVersion);
  put_u32(out, static_cast<std::uint32_t>(model.num_layers()));
  for (Index li = 0; li < model.num_layers(); ++li) {
    Layer<float>& layer = model.layer(li);
    const std::string& name = layer.name();
    if (name.size() > 0xFFFF) {
      throw ArchiveError("layer name too long: " + name);
    }
    put_u16(out, static_cast<std::uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    auto params = layer.parameters();
    if (params.size() > 0xFF) {
      throw ArchiveError("layer '" + name + "' has too many tensors");
    }
    out.push_back(static_cast<std::uint8_t>(params.size()));
    for (Tensor<float>* t : params) {
      out.push_back(static_cast<std::uint8_t>(t->rank()));
      for (Index d : t->shape().dims()) {
        put_u64(out, static_cast<std::uint64_t>(d));
      }
      for (Index i = 0; i < t->size(); ++i) {
        put_f32(out, (*t)[i]);
      }
    }
  }
  put_u32(out, crc32(out));
  return out;
}

void decode_weights_into(Model<float>& model,
                         std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16) {
    throw ArchiveError("truncated archive (" + std::to_string(bytes.size()) +
                       " bytes)");
  }
  if (bytes[0] != 'N' || bytes[1] != 'N' || bytes[2] != 'W' ||
      bytes[3] != 'A') {
    throw ArchiveError("bad magic, not a weight archive");
  }
  Reader r{bytes, 4};
  const std::uint32_t version = r.u32("version");
  if (version != kArchiveVersion) {
    throw ArchiveError("unsupported archive version " +
                       std::to_string(version) + " (expected " +
                       std::to_string(kArchiveVersion) + ")");
  }
  const std::uint32_t stored_crc = [&] {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(bytes[bytes.size() - 4 +
                                            static_cast<std::size_t>(i)])
           << (8 * i);
    }
    return v;
  }();
  const std::uint32_t computed =
      crc32(bytes.subspan(0, bytes.size() - 4));
  if (stored_crc != computed) {
    throw ArchiveError("checksum failure (archive corrupted or truncated)");
  }

  const std::uint32_t layer_count = r.u32("layer count");
  std::vector<LayerRecord> records;
  records.reserve(layer_count);
  for (std::uint32_t li = 0; li < layer_count; ++li) {
    LayerRecord rec;
    const std::uint16_t name_len = r.u16("layer name length");
    r.need(name_len, "layer name");
    rec.name.assign(reinterpret_cast<const char*>(bytes.data() + r.pos),
                    name_len);
    r.pos += name_len;
    const std::uint8_t tensor_count = r.u8("tensor count");
    for (std::uint8_t ti = 0; ti < tensor_count; ++ti) {
      TensorRecord t;
      const std::uint8_t rank = r.u8("tensor rank");
      std::vector<Index> dims;
      std::uint64_t count = 1;
      for (std::uint8_t d = 0; d < rank; ++d) {
        const std::uint64_t extent = r.u64("tensor dim");
        // Any real tensor here is far below this; reject absurd headers
        // before they turn into allocations.
        constexpr std::uint64_t kMaxElements = 1ull << 33;
        if (extent == 0 || extent > kMaxElements ||
            count > kMaxElements / extent) {
          throw ArchiveError("layer '" + rec.name + "': bad tensor extent " +
                             std::to_string(extent));
        }
        dims.push_back(static_cast<Index>(extent));
        count *= extent;
      }
      r.need(static_cast<std::size_t>(count) * 4, "tensor values");
      t.shape = Shape(dims);
      t.values.reserve(static_cast<std::size_t>(count));
      for (std::uint64_t i = 0; i < count; ++i) {
        t.values.push_back(r.f32("tensor values"));
      }
      rec.tensors.push_back(std::move(t));
    }
    records.push_back(std::move(rec));
  }
  if (r.pos != bytes.size() - 4) {
    throw ArchiveError("trailing bytes after last layer record");
  }

  // Validate every record against the model before assigning anything.
  if (static_cast<Index>(records.size()) != model.num_layers()) {
    throw ArchiveError("archive has " + std::to_string(records.size()) +
                       " layers, model has " +
                       std::to_string(model.num_layers()));
  }
  for (Index li = 0; li < model.num_layers(); ++li) {
    Layer<float>& layer = model.layer(li);
    const LayerRecord& rec = records[static_cast<std::size_t>(li)];
    if (rec.name != layer.name()) {
      throw ArchiveError("layer " + std::to_string(li) + ": archive has '" +
                         rec.name + "', model has '" + layer.name() + "'");
    }
    auto params = layer.parameters();
    if (params.size() != rec.tensors.size()) {
      throw ArchiveError("layer '" + rec.name + "': archive has " +
                         std::to_string(rec.tensors.size()) +
                         " tensors, model has " +
                         std::to_string(params.size()));
    }
    for (std::size_t ti = 0; ti < params.size(); ++ti) {
      if (rec.tensors[ti].shape != params[ti]->shape()) {
        throw ArchiveError("layer '" + rec.name + "' tensor " +
                           std::to_string(ti) + ": archive shape " +
                           rec.tensors[ti].shape.to_string() +
                           " != model shape " +
                           params[ti]->shape().to_string());
      }
    }
  }

  for (Index li = 0; li < model.num_layers(); ++li) {
    auto params = model.layer(li).parameters();
    const LayerRecord& rec = records[static_cast<std::size_t>(li)];
    for (std::size_t ti = 0; ti < params.size(); ++ti) {
      Tensor<float>& t = *params[ti];
      const std::vector<float>& values = rec.tensors[ti].values;
      for (Index i = 0; i < t.size(); ++i) {
        t[i] = values[static_cast<std::size_t>(i)];
      }
    }
  }
}

void save_weights(Model<float>& model, const std::filesystem::path& path) {
  write_file_atomic(path, encode_weights(model));
}

void load_weights(Model<float>& model, const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file(path);
  } catch (const DataError& e) {
    throw ArchiveError(e.what());
  }
  try {
    decode_weights_into(model, bytes);
  } catch (const ArchiveError& e) {
    throw ArchiveError(path.string() + ": " + e.what());
  }
}

Model<float> load_model(const ModelSpec& spec,
                        const std::filesystem::path& path) {
  Model<float> model = build_model<float>(spec);
  load_weights(model, path);
  return model;
}

}  // namespace cadnet
