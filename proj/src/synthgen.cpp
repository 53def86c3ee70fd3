#include "ceg/synthgen.hpp"

#include <algorithm>

#include "ceg/io.hpp"

namespace ceg {

std::int64_t SceneRng::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw Error(ErrorCode::InvalidArgument, "empty integer range");
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<std::int64_t>(engine_());
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % span;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return lo + static_cast<std::int64_t>(x % span);
}

double SceneRng::uniform01() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

namespace {

struct Footprint {
  std::int64_t top = 0;
  std::int64_t left = 0;
  std::int64_t height = 0;
  std::int64_t width = 0;
  int notch_corner = -1;  // -1: none, 0..3: TL, TR, BL, BR
  std::int64_t notch_h = 0;
  std::int64_t notch_w = 0;

  bool covers(std::int64_t r, std::int64_t c) const {
    if (r < 0 || c < 0 || r >= height || c >= width) return false;
    if (notch_corner < 0) return true;
    const bool in_rows = notch_corner < 2 ? r < notch_h : r >= height - notch_h;
    const bool in_cols = notch_corner % 2 == 0 ? c < notch_w : c >= width - notch_w;
    return !(in_rows && in_cols);
  }
};

struct Placed {
  Footprint shape;
  std::size_t fg_class = 0;
  std::int64_t dy1 = 0, dx1 = 0, dy2 = 0, dx2 = 0;
};

bool boxes_clear(const Footprint& a, const Footprint& b, std::int64_t margin) {
  const bool rows = a.top - margin < b.top + b.height + margin && b.top - margin < a.top + a.height + margin;
  const bool cols = a.left - margin < b.left + b.width + margin && b.left - margin < a.left + a.width + margin;
  return !(rows && cols);
}

void stamp(const Footprint& f, std::int64_t dy, std::int64_t dx, const Shape& shape,
           std::vector<std::uint8_t>& mask) {
  for (std::int64_t r = 0; r < f.height; ++r) {
    for (std::int64_t c = 0; c < f.width; ++c) {
      if (!f.covers(r, c)) continue;
      const std::int64_t y = f.top + dy + r;
      const std::int64_t x = f.left + dx + c;
      mask[static_cast<std::size_t>(y) * shape.width + static_cast<std::size_t>(x)] = 1;
    }
  }
}

// Chebyshev distance to the nearest pixel with the other foreground value,
// capped at band + 1.
std::vector<std::size_t> boundary_distance(const std::vector<std::uint8_t>& fg, const Shape& shape,
                                           std::size_t band) {
  const auto h = static_cast<std::int64_t>(shape.height);
  const auto w = static_cast<std::int64_t>(shape.width);
  std::vector<std::size_t> dist(fg.size(), band + 1);
  for (std::int64_t r = 0; r < h; ++r) {
    for (std::int64_t c = 0; c < w; ++c) {
      const auto self = fg[static_cast<std::size_t>(r * w + c)];
      for (std::int64_t d = 1; d <= static_cast<std::int64_t>(band); ++d) {
        bool found = false;
        for (std::int64_t y = std::max<std::int64_t>(0, r - d); y <= std::min(h - 1, r + d) && !found; ++y) {
          for (std::int64_t x = std::max<std::int64_t>(0, c - d); x <= std::min(w - 1, c + d); ++x) {
            if (std::max(std::abs(y - r), std::abs(x - c)) != d) continue;
            if (fg[static_cast<std::size_t>(y * w + x)] != self) {
              found = true;
              break;
            }
          }
        }
        if (found) {
          dist[static_cast<std::size_t>(r * w + c)] = static_cast<std::size_t>(d);
          break;
        }
      }
    }
  }
  return dist;
}

}  // namespace

void SceneParams::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidArgument, "scene params: " + m); };
  if (height == 0 || width == 0) fail("height and width must be >= 1");
  if (min_size < 3 || max_size < min_size) fail("need 3 <= min_size <= max_size");
  for (double v : {confidence_mean, confidence_noise, edge_confidence, clutter_max, notch_probability}) {
    if (!(v >= 0.0 && v <= 1.0)) fail("confidences and probabilities must lie in [0,1]");
  }
  if (!(std::min(edge_confidence, confidence_mean) - confidence_noise > clutter_max)) {
    fail("dominant scores must stay above clutter_max");
  }
  if (background_tile == 0) fail("background_tile must be >= 1");
  if (foreground_classes.empty() || background_classes.empty()) fail("class lists must be non-empty");
}

std::vector<std::string> SceneParams::classes() const {
  std::vector<std::string> out = foreground_classes;
  out.insert(out.end(), background_classes.begin(), background_classes.end());
  return out;
}

Taxonomy SceneParams::taxonomy() const {
  return Taxonomy({{"Background", background_classes}, {"Foreground", foreground_classes}});
}

nlohmann::json to_json(const SceneParams& p) {
  return {{"seed", p.seed},
          {"height", p.height},
          {"width", p.width},
          {"n_shared", p.n_shared},
          {"n_appear", p.n_appear},
          {"n_disappear", p.n_disappear},
          {"min_size", p.min_size},
          {"max_size", p.max_size},
          {"jitter", p.jitter},
          {"confidence_mean", p.confidence_mean},
          {"confidence_noise", p.confidence_noise},
          {"edge_confidence", p.edge_confidence},
          {"edge_band", p.edge_band},
          {"notch_probability", p.notch_probability},
          {"clutter_max", p.clutter_max},
          {"background_tile", p.background_tile},
          {"foreground_classes", p.foreground_classes},
          {"background_classes", p.background_classes},
          {"max_attempts", p.max_attempts}};
}

SceneParams scene_params_from_json(const nlohmann::json& j) {
  SceneParams p;
  p.seed = j.value("seed", p.seed);
  p.height = j.value("height", p.height);
  p.width = j.value("width", p.width);
  p.n_shared = j.value("n_shared", p.n_shared);
  p.n_appear = j.value("n_appear", p.n_appear);
  p.n_disappear = j.value("n_disappear", p.n_disappear);
  p.min_size = j.value("min_size", p.min_size);
  p.max_size = j.value("max_size", p.max_size);
  p.jitter = j.value("jitter", p.jitter);
  p.confidence_mean = j.value("confidence_mean", p.confidence_mean);
  p.confidence_noise = j.value("confidence_noise", p.confidence_noise);
  p.edge_confidence = j.value("edge_confidence", p.edge_confidence);
  p.edge_band = j.value("edge_band", p.edge_band);
  p.notch_probability = j.value("notch_probability", p.notch_probability);
  p.clutter_max = j.value("clutter_max", p.clutter_max);
  p.background_tile = j.value("background_tile", p.background_tile);
  p.foreground_classes = j.value("foreground_classes", p.foreground_classes);
  p.background_classes = j.value("background_classes", p.background_classes);
  p.max_attempts = j.value("max_attempts", p.max_attempts);
  return p;
}

SceneBundle generate(const SceneParams& params) {
  params.validate();
  SceneRng rng(params.seed);
  const Shape shape{params.height, params.width};
  const auto jitter = static_cast<std::int64_t>(params.jitter);
  const std::int64_t margin = jitter + 1;
  const auto grid_h = static_cast<std::int64_t>(params.height);
  const auto grid_w = static_cast<std::int64_t>(params.width);

  const std::size_t total = params.n_shared + params.n_appear + params.n_disappear;
  std::vector<Placed> placed;
  placed.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    Placed p;
    bool ok = false;
    for (std::size_t attempt = 0; attempt < params.max_attempts && !ok; ++attempt) {
      Footprint f;
      f.height = rng.uniform_int(static_cast<std::int64_t>(params.min_size),
                                 static_cast<std::int64_t>(params.max_size));
      f.width = rng.uniform_int(static_cast<std::int64_t>(params.min_size),
                                static_cast<std::int64_t>(params.max_size));
      if (grid_h - 2 * jitter < f.height || grid_w - 2 * jitter < f.width) continue;
      f.top = rng.uniform_int(jitter, grid_h - jitter - f.height);
      f.left = rng.uniform_int(jitter, grid_w - jitter - f.width);
      ok = std::all_of(placed.begin(), placed.end(),
                       [&](const Placed& other) { return boxes_clear(f, other.shape, margin); });
      if (ok) p.shape = f;
    }
    if (!ok) {
      throw Error(ErrorCode::PlacementFailure, "could not place instance " + std::to_string(i) +
                                                   " after " + std::to_string(params.max_attempts) +
                                                   " attempts");
    }
    if (rng.uniform01() < params.notch_probability) {
      p.shape.notch_corner = static_cast<int>(rng.uniform_int(0, 3));
      p.shape.notch_h = rng.uniform_int(1, p.shape.height / 3);
      p.shape.notch_w = rng.uniform_int(1, p.shape.width / 3);
    }
    p.fg_class = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(params.foreground_classes.size()) - 1));
    if (i < params.n_shared) {
      p.dy1 = rng.uniform_int(-jitter, jitter);
      p.dx1 = rng.uniform_int(-jitter, jitter);
      p.dy2 = rng.uniform_int(-jitter, jitter);
      p.dx2 = rng.uniform_int(-jitter, jitter);
    }
    placed.push_back(p);
  }

  const std::size_t appear_begin = params.n_shared;
  const std::size_t disappear_begin = params.n_shared + params.n_appear;

  // Observed instances per temporal and canonical footprints.
  std::vector<BinaryMask> inst1, inst2;
  std::vector<std::size_t> class1, class2;
  std::vector<std::uint8_t> seg1(shape.pixels(), 0), seg2(shape.pixels(), 0);
  for (std::size_t i = 0; i < placed.size(); ++i) {
    const auto& p = placed[i];
    const bool in_t1 = i < appear_begin || i >= disappear_begin;
    const bool in_t2 = i < disappear_begin;
    if (in_t1) {
      std::vector<std::uint8_t> m(shape.pixels(), 0);
      stamp(p.shape, p.dy1, p.dx1, shape, m);
      inst1.emplace_back(shape, std::move(m));
      class1.push_back(p.fg_class);
      stamp(p.shape, 0, 0, shape, seg1);
    }
    if (in_t2) {
      std::vector<std::uint8_t> m(shape.pixels(), 0);
      stamp(p.shape, p.dy2, p.dx2, shape, m);
      inst2.emplace_back(shape, std::move(m));
      class2.push_back(p.fg_class);
      stamp(p.shape, 0, 0, shape, seg2);
    }
  }
  std::vector<std::uint8_t> change(shape.pixels());
  for (std::size_t k = 0; k < change.size(); ++k) change[k] = seg1[k] != seg2[k];

  // Background class per tile, shared by both temporals.
  const std::size_t tiles_y = (params.height + params.background_tile - 1) / params.background_tile;
  const std::size_t tiles_x = (params.width + params.background_tile - 1) / params.background_tile;
  std::vector<std::size_t> tile_class(tiles_y * tiles_x);
  for (auto& t : tile_class) {
    t = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(params.background_classes.size()) - 1));
  }

  const std::size_t n_fg = params.foreground_classes.size();
  const std::size_t n_classes = n_fg + params.background_classes.size();
  auto probmap = [&](const std::vector<BinaryMask>& instances, const std::vector<std::size_t>& classes) {
    const std::size_t n = shape.pixels();
    std::vector<int> dominant(n, -1);
    std::vector<std::uint8_t> fg(n, 0);
    for (std::size_t i = 0; i < instances.size(); ++i) {
      for (std::size_t k = 0; k < n; ++k) {
        if (instances[i][k]) {
          dominant[k] = static_cast<int>(classes[i]);
          fg[k] = 1;
        }
      }
    }
    const auto dist = boundary_distance(fg, shape, params.edge_band);
    std::vector<float> data(n_classes * n);
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t dom;
      if (dominant[k] >= 0) {
        dom = static_cast<std::size_t>(dominant[k]);
      } else {
        const std::size_t r = k / params.width;
        const std::size_t c = k % params.width;
        dom = n_fg + tile_class[(r / params.background_tile) * tiles_x + c / params.background_tile];
      }
      double level = params.confidence_mean;
      if (dist[k] <= params.edge_band) {
        level = params.edge_confidence + (params.confidence_mean - params.edge_confidence) *
                                             static_cast<double>(dist[k] - 1) /
                                             static_cast<double>(params.edge_band);
      }
      const double conf = std::clamp(
          level + rng.uniform(-params.confidence_noise, params.confidence_noise), 0.0, 1.0);
      for (std::size_t cls = 0; cls < n_classes; ++cls) {
        const double v = cls == dom ? conf : rng.uniform(0.0, params.clutter_max);
        data[cls * n + k] = static_cast<float>(v);
      }
    }
    return ProbMap(params.classes(), params.height, params.width, std::move(data));
  };

  ProbMap p1 = probmap(inst1, class1);
  ProbMap p2 = probmap(inst2, class2);
  return SceneBundle{std::move(p1),
                     std::move(p2),
                     InstanceSet::from_masks(shape, inst1),
                     InstanceSet::from_masks(shape, inst2),
                     BinaryMask(shape, std::move(change)),
                     BinaryMask(shape, std::move(seg1)),
                     BinaryMask(shape, std::move(seg2))};
}

void write_scene(const fs::path& dir, const SceneParams& params, const SceneBundle& bundle) {
  fs::create_directories(dir);
  write_probmap(dir / "t1.cpm", bundle.probmap_t1);
  write_probmap(dir / "t2.cpm", bundle.probmap_t2);
  write_labelmap(dir / "instances_t1.pgm", bundle.instances_t1);
  write_labelmap(dir / "instances_t2.pgm", bundle.instances_t2);
  write_mask(dir / "gt_change.pgm", bundle.gt_change);
  write_mask(dir / "gt_seg_t1.pgm", bundle.gt_seg_t1);
  write_mask(dir / "gt_seg_t2.pgm", bundle.gt_seg_t2);
  const nlohmann::json scene = {
      {"params", to_json(params)},
      {"taxonomy", taxonomy_to_json(params.taxonomy())},
      {"files",
       {{"probmap_t1", "t1.cpm"},
        {"probmap_t2", "t2.cpm"},
        {"instances_t1", "instances_t1.pgm"},
        {"instances_t2", "instances_t2.pgm"},
        {"gt_change", "gt_change.pgm"},
        {"gt_seg_t1", "gt_seg_t1.pgm"},
        {"gt_seg_t2", "gt_seg_t2.pgm"}}},
      {"instances", {{"t1", bundle.instances_t1.size()}, {"t2", bundle.instances_t2.size()}}}};
  write_text(dir / "scene.json", scene.dump(2) + "\n");
}

}  // namespace ceg
