#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ceg/change_events.hpp"
#include "ceg/raster.hpp"

namespace ceg {

namespace fs = std::filesystem;

struct Thresholds {
  double gamma = 0.8;
  double delta = 0.0;
  double beta = 0.8;
  Connectivity connectivity = Connectivity::Eight;
};

struct PairEntry {
  std::string id;
  fs::path probmap_t1;
  fs::path probmap_t2;
  std::optional<fs::path> instances_t1;
  std::optional<fs::path> instances_t2;
  std::optional<fs::path> gt_change;
};

/// Dataset description shared by the CLI commands and the sweep.
///
/// JSON layout (paths relative to the manifest's directory):
///   {"taxonomy": {...} | "taxonomy.json",       optional, default buildings
///    "defaults": {"gamma", "delta", "beta", "connectivity"},   optional
///    "pairs": [{"id", "probmap_t1", "probmap_t2",
///               "instances_t1"?, "instances_t2"?, "gt_change"?}]}
struct Manifest {
  std::vector<PairEntry> pairs;
  Taxonomy taxonomy = Taxonomy::buildings();
  Thresholds defaults;
};

// Parses and validates: ids unique, instance maps given in pairs, every
// referenced file present. Throws ManifestError naming the offending id.
Manifest load_manifest(const fs::path& path);
Manifest parse_manifest(const nlohmann::json& j, const fs::path& base_dir);
nlohmann::json manifest_to_json(const Manifest& manifest);

struct LoadedPair {
  std::string id;
  ProbMap p1;
  ProbMap p2;
  std::optional<InstanceSet> instances_t1;
  std::optional<InstanceSet> instances_t2;
  std::optional<BinaryMask> gt_change;
};

LoadedPair load_pair(const PairEntry& entry);

Connectivity connectivity_from_int(int value);

}  // namespace ceg
