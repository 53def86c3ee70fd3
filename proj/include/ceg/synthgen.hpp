#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "ceg/raster.hpp"

namespace ceg {

namespace fs = std::filesystem;

/// Parameters of a synthetic bi-temporal scene.
///
/// Instances are axis-aligned rectangles, some with a rectangular corner
/// notch. Shared instances exist in both temporals, each copy translated
/// independently by up to `jitter` pixels per axis; appear (t2 only) and
/// disappear (t1 only) instances are not translated. Dominant class scores
/// are `confidence_mean +- confidence_noise`, lowered linearly towards
/// `edge_confidence` within `edge_band` pixels of a foreground boundary.
struct SceneParams {
  std::uint64_t seed = 0;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t n_shared = 3;
  std::size_t n_appear = 1;
  std::size_t n_disappear = 1;
  std::size_t min_size = 8;
  std::size_t max_size = 12;
  std::size_t jitter = 0;
  double confidence_mean = 0.95;
  double confidence_noise = 0.03;
  double edge_confidence = 0.6;
  std::size_t edge_band = 4;
  double notch_probability = 0.3;
  double clutter_max = 0.1;  // upper bound for non-dominant class scores
  std::size_t background_tile = 8;
  std::vector<std::string> foreground_classes = {"house", "building"};
  std::vector<std::string> background_classes = {"road", "grass", "tree", "water"};
  std::size_t max_attempts = 2000;

  void validate() const;
  std::vector<std::string> classes() const;
  Taxonomy taxonomy() const;
};

nlohmann::json to_json(const SceneParams& p);
SceneParams scene_params_from_json(const nlohmann::json& j);

struct SceneBundle {
  ProbMap probmap_t1;
  ProbMap probmap_t2;
  InstanceSet instances_t1;
  InstanceSet instances_t2;
  BinaryMask gt_change;
  BinaryMask gt_seg_t1;
  BinaryMask gt_seg_t2;
};

// Deterministic for a fixed seed. Throws PlacementFailure when the grid is
// too crowded for the requested instances.
SceneBundle generate(const SceneParams& params);

// Writes t1.cpm, t2.cpm (+ sidecars), instances_t{1,2}.pgm (16-bit),
// gt_change.pgm, gt_seg_t{1,2}.pgm and scene.json into `dir`.
void write_scene(const fs::path& dir, const SceneParams& params, const SceneBundle& bundle);

/// Portable random source: mt19937_64 output mapped to ranges with
/// explicit arithmetic (the standard distributions are implementation
/// defined and would break cross-platform golden files).
class SceneRng {
 public:
  explicit SceneRng(std::uint64_t seed) : engine_(seed) {}

  // Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  // Uniform double in [0, 1).
  double uniform01();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace ceg
