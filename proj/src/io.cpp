#include "ceg/io.hpp"

#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

namespace ceg {

namespace {

void put_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32le(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::vector<std::string> default_class_names(std::size_t n) {
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t c = 0; c < n; ++c) out.push_back("class_" + std::to_string(c));
  return out;
}

// Cursor over a PGM header: tokens separated by whitespace, '#' comments to EOL.
class HeaderReader {
 public:
  explicit HeaderReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  unsigned next_number(const char* what) {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) {
      throw Error(ErrorCode::UnsupportedFormat, std::string("PGM header: expected ") + what);
    }
    unsigned long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 0xFFFFFFFFul) throw Error(ErrorCode::UnsupportedFormat, "PGM header overflow");
      ++pos_;
    }
    return static_cast<unsigned>(value);
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_offset() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw Error(ErrorCode::UnsupportedFormat, "PGM header not terminated by whitespace");
    }
    return pos_ + 1;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 2;
};

template <class MaskT>
MaskT mask_from_gray(const GrayImage& image) {
  if (image.maxval > 255) {
    throw Error(ErrorCode::UnsupportedFormat, "masks must be 8-bit PGM (maxval <= 255)");
  }
  std::vector<std::uint8_t> data(image.pixels.begin(), image.pixels.end());
  return MaskT(image.shape, std::move(data));
}

template <class MaskT>
GrayImage gray_from_mask(const MaskT& mask) {
  GrayImage image;
  image.shape = mask.shape();
  image.maxval = 255;
  image.pixels.assign(mask.data().begin(), mask.data().end());
  return image;
}

}  // namespace

// ---------------------------------------------------------------------------
// Files

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

void write_text(const fs::path& path, const std::string& text) {
  write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

// ---------------------------------------------------------------------------
// Probability maps

fs::path sidecar_path(const fs::path& probmap_path) {
  fs::path p = probmap_path;
  p.replace_extension(".json");
  return p;
}

std::vector<std::uint8_t> encode_probmap(const ProbMap& map) {
  static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);
  std::vector<std::uint8_t> out;
  out.reserve(16 + map.data().size() * 4);
  out.insert(out.end(), std::begin(kProbMapMagic), std::end(kProbMapMagic));
  put_u32le(out, static_cast<std::uint32_t>(map.num_classes()));
  put_u32le(out, static_cast<std::uint32_t>(map.height()));
  put_u32le(out, static_cast<std::uint32_t>(map.width()));
  for (float v : map.data()) put_u32le(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

ProbMap decode_probmap(const std::vector<std::uint8_t>& bytes, const nlohmann::json* sidecar) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kProbMapMagic, 4) != 0) {
    throw Error(ErrorCode::MalformedHeader, "missing CPM1 magic");
  }
  const std::uint64_t c = get_u32le(bytes.data() + 4);
  const std::uint64_t h = get_u32le(bytes.data() + 8);
  const std::uint64_t w = get_u32le(bytes.data() + 12);
  if (c == 0 || h == 0 || w == 0) {
    throw Error(ErrorCode::MalformedHeader, "zero dimension in header (C=" + std::to_string(c) +
                                                ", H=" + std::to_string(h) +
                                                ", W=" + std::to_string(w) + ")");
  }
  const std::uint64_t count = c * h * w;
  const std::uint64_t available = (bytes.size() - 16) / 4;
  if (available < count) {
    throw Error(ErrorCode::TruncatedPayload, "expected " + std::to_string(count) +
                                                 " values, found " + std::to_string(available));
  }
  if (bytes.size() != 16 + count * 4) {
    throw Error(ErrorCode::MalformedHeader, "trailing bytes after payload");
  }
  std::vector<float> data(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    data[i] = std::bit_cast<float>(get_u32le(bytes.data() + 16 + 4 * i));
  }

  std::vector<std::string> classes;
  std::optional<bool> normalized;
  if (sidecar) {
    try {
      classes = sidecar->at("classes").get<std::vector<std::string>>();
      if (sidecar->contains("normalized")) normalized = sidecar->at("normalized").get<bool>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedHeader, std::string("sidecar: ") + e.what());
    }
    if (classes.size() != c) {
      throw Error(ErrorCode::MalformedHeader, "sidecar lists " + std::to_string(classes.size()) +
                                                  " classes, header says " + std::to_string(c));
    }
  } else {
    classes = default_class_names(c);
  }
  const bool sums = sums_to_one(data, c, h * w);
  // A sidecar may only downgrade the flag; it never asserts normalization the
  // data does not have.
  return ProbMap(std::move(classes), h, w, std::move(data), normalized.value_or(true) && sums);
}

ProbMap read_probmap(const fs::path& path) {
  auto bytes = read_file(path);
  const auto side = sidecar_path(path);
  if (fs::exists(side)) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(side));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedHeader, side.string() + ": " + e.what());
    }
    return decode_probmap(bytes, &j);
  }
  return decode_probmap(bytes);
}

void write_probmap(const fs::path& path, const ProbMap& map) {
  write_file(path, encode_probmap(map));
  nlohmann::json side = {{"classes", map.classes()}, {"normalized", map.normalized()}};
  write_text(sidecar_path(path), side.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// PGM

GrayImage decode_pgm(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw Error(ErrorCode::UnsupportedFormat, "not a binary PGM (P5)");
  }
  HeaderReader header(bytes);
  GrayImage image;
  image.shape.width = header.next_number("width");
  image.shape.height = header.next_number("height");
  image.maxval = header.next_number("maxval");
  if (image.shape.width == 0 || image.shape.height == 0) {
    throw Error(ErrorCode::UnsupportedFormat, "PGM has a zero dimension");
  }
  if (image.maxval == 0 || image.maxval > 65535) {
    throw Error(ErrorCode::UnsupportedFormat, "PGM maxval out of range");
  }
  const std::size_t offset = header.raster_offset();
  const std::size_t bytes_per_sample = image.maxval > 255 ? 2 : 1;
  const std::size_t n = image.shape.pixels();
  if (bytes.size() - offset < n * bytes_per_sample) {
    throw Error(ErrorCode::TruncatedPayload, "PGM raster shorter than " +
                                                 std::to_string(n * bytes_per_sample) + " bytes");
  }
  image.pixels.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (bytes_per_sample == 1) {
      image.pixels[k] = bytes[offset + k];
    } else {
      image.pixels[k] = static_cast<std::uint16_t>((bytes[offset + 2 * k] << 8) |
                                                   bytes[offset + 2 * k + 1]);
    }
  }
  return image;
}

std::vector<std::uint8_t> encode_pgm(const GrayImage& image) {
  const std::string header = "P5\n" + std::to_string(image.shape.width) + " " +
                             std::to_string(image.shape.height) + "\n" +
                             std::to_string(image.maxval) + "\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const bool wide = image.maxval > 255;
  out.reserve(out.size() + image.pixels.size() * (wide ? 2 : 1));
  for (auto v : image.pixels) {
    if (wide) {
      out.push_back(static_cast<std::uint8_t>(v >> 8));
      out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    } else {
      out.push_back(static_cast<std::uint8_t>(v));
    }
  }
  return out;
}

TriMask read_trimask(const fs::path& path) {
  try {
    return mask_from_gray<TriMask>(decode_pgm(read_file(path)));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

BinaryMask read_binary_mask(const fs::path& path) {
  try {
    return mask_from_gray<BinaryMask>(decode_pgm(read_file(path)));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_mask(const fs::path& path, const TriMask& mask) {
  write_file(path, encode_pgm(gray_from_mask(mask)));
}

void write_mask(const fs::path& path, const BinaryMask& mask) {
  write_file(path, encode_pgm(gray_from_mask(mask)));
}

InstanceSet instances_from_labelmap(const fs::path& path) {
  GrayImage image;
  try {
    image = decode_pgm(read_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
  std::vector<std::uint32_t> labels(image.pixels.begin(), image.pixels.end());
  return InstanceSet::from_label_map(image.shape, labels);
}

void write_labelmap(const fs::path& path, const InstanceSet& instances) {
  if (instances.size() > 65535) {
    throw Error(ErrorCode::InvalidArgument, "16-bit label map cannot hold " +
                                                std::to_string(instances.size()) + " instances");
  }
  GrayImage image;
  image.shape = instances.shape();
  image.maxval = 65535;
  image.pixels.assign(instances.label_map().begin(), instances.label_map().end());
  write_file(path, encode_pgm(image));
}

// ---------------------------------------------------------------------------
// Taxonomy

Taxonomy taxonomy_from_json(const nlohmann::json& j) {
  std::vector<Taxonomy::Concept> concepts;
  try {
    for (const auto& item : j.at("concepts")) {
      concepts.push_back({item.at("name").get<std::string>(),
                          item.at("classes").get<std::vector<std::string>>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("taxonomy: ") + e.what());
  }
  return Taxonomy(std::move(concepts));
}

nlohmann::json taxonomy_to_json(const Taxonomy& taxonomy) {
  nlohmann::json concepts = nlohmann::json::array();
  for (const auto& c : taxonomy.concepts()) {
    concepts.push_back({{"name", c.name}, {"classes", c.classes}});
  }
  return {{"concepts", concepts}};
}

}  // namespace ceg
