#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ceg/raster.hpp"

namespace ceg {

namespace fs = std::filesystem;

// .cpm container: "CPM1", u32le C, u32le H, u32le W, then C*H*W float32le
// values, plane-major and row-major within each plane. Class names live in
// a sidecar JSON next to it: {"classes": [...], "normalized": bool}.
inline constexpr char kProbMapMagic[4] = {'C', 'P', 'M', '1'};

fs::path sidecar_path(const fs::path& probmap_path);

ProbMap read_probmap(const fs::path& path);
ProbMap decode_probmap(const std::vector<std::uint8_t>& bytes,
                       const nlohmann::json* sidecar = nullptr);
void write_probmap(const fs::path& path, const ProbMap& map);
std::vector<std::uint8_t> encode_probmap(const ProbMap& map);

// PGM P5. Masks are 8-bit with maxval 255 and raw values (no scaling);
// instance label maps are 16-bit big-endian with maxval 65535.
struct GrayImage {
  Shape shape;
  unsigned maxval = 255;
  std::vector<std::uint16_t> pixels;
};

GrayImage decode_pgm(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_pgm(const GrayImage& image);

TriMask read_trimask(const fs::path& path);
BinaryMask read_binary_mask(const fs::path& path);
void write_mask(const fs::path& path, const TriMask& mask);
void write_mask(const fs::path& path, const BinaryMask& mask);

InstanceSet instances_from_labelmap(const fs::path& path);
void write_labelmap(const fs::path& path, const InstanceSet& instances);

std::vector<std::uint8_t> read_file(const fs::path& path);
void write_file(const fs::path& path, const std::vector<std::uint8_t>& bytes);
void write_text(const fs::path& path, const std::string& text);

Taxonomy taxonomy_from_json(const nlohmann::json& j);
nlohmann::json taxonomy_to_json(const Taxonomy& taxonomy);

}  // namespace ceg
