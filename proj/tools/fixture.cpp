#include "fixture.hpp"

#include <bit>
#include <cstring>

#include "ceg/io.hpp"

namespace ceg {

namespace {

using nlohmann::json;

[[noreturn]] void fixture_error(const std::string& field, const std::string& message) {
  throw Error(ErrorCode::FixtureError, field + ": " + message);
}

const json& member(const json& j, const std::string& key, const std::string& field) {
  if (!j.is_object() || !j.contains(key)) fixture_error(field, "missing '" + key + "'");
  return j.at(key);
}

template <class T>
T get(const json& j, const std::string& field) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    fixture_error(field, e.what());
  }
}

std::vector<std::size_t> shape_of(const json& j, std::size_t rank, const std::string& field) {
  auto shape = get<std::vector<std::size_t>>(member(j, "shape", field), field + ".shape");
  if (shape.size() != rank) {
    fixture_error(field, "shape must have " + std::to_string(rank) + " entries");
  }
  return shape;
}

std::vector<double> read_f64(const std::filesystem::path& path, const std::string& field) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file(path);
  } catch (const Error& e) {
    fixture_error(field, e.what());
  }
  if (bytes.size() % 8 != 0) fixture_error(field, "file size is not a multiple of 8");
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 7; b >= 0; --b) bits = (bits << 8) | bytes[i * 8 + static_cast<std::size_t>(b)];
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

FeatureMap tensor(const json& j, const std::string& field, const std::filesystem::path& base) {
  const auto shape = shape_of(j, 3, field);
  std::vector<double> data;
  if (j.contains("data")) {
    data = get<std::vector<double>>(j.at("data"), field + ".data");
  } else if (j.contains("file")) {
    data = read_f64(base / get<std::string>(j.at("file"), field + ".file"), field + ".file");
  } else {
    fixture_error(field, "tensor needs 'data' or 'file'");
  }
  const std::size_t expected = shape[0] * shape[1] * shape[2];
  if (data.size() != expected) {
    fixture_error(field, "expected " + std::to_string(expected) + " values, got " + std::to_string(data.size()));
  }
  try {
    return FeatureMap(shape[0], shape[1], shape[2], std::move(data));
  } catch (const Error& e) {
    fixture_error(field, e.what());
  }
}

TriMask mask(const json& j, const std::string& field, const std::filesystem::path& base) {
  try {
    if (j.is_string()) return read_trimask(base / j.get<std::string>());
    const auto shape = shape_of(j, 2, field);
    auto values = get<std::vector<unsigned>>(member(j, "data", field), field + ".data");
    if (values.size() != shape[0] * shape[1]) {
      fixture_error(field, "expected " + std::to_string(shape[0] * shape[1]) + " values, got " +
                               std::to_string(values.size()));
    }
    std::vector<std::uint8_t> data(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (values[i] > 255) fixture_error(field, "mask value out of range");
      data[i] = static_cast<std::uint8_t>(values[i]);
    }
    return TriMask(shape[0], shape[1], std::move(data));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::FixtureError) throw;
    fixture_error(field, e.what());
  }
}

ClassifierWeights head(const json& j, const std::string& field) {
  const auto dim = get<std::size_t>(member(j, "dim", field), field + ".dim");
  const auto classes = get<std::size_t>(member(j, "classes", field), field + ".classes");
  auto weights = get<std::vector<double>>(member(j, "weights", field), field + ".weights");
  std::vector<double> bias;
  if (j.contains("bias")) bias = get<std::vector<double>>(j.at("bias"), field + ".bias");
  try {
    return ClassifierWeights(dim, classes, std::move(weights), std::move(bias));
  } catch (const Error& e) {
    fixture_error(field, e.what());
  }
}

GuidanceTargets targets(const json& j, const std::string& field, const std::filesystem::path& base) {
  return {mask(member(j, "mix_diff", field), field + ".mix_diff", base),
          mask(member(j, "seg_t1", field), field + ".seg_t1", base),
          mask(member(j, "seg_t2", field), field + ".seg_t2", base)};
}

void require_dim(const FeatureMap& f, const ClassifierWeights& h, const std::string& field,
                 const std::string& head_name) {
  if (f.dim() != h.dim()) {
    fixture_error(field, "feature dim " + std::to_string(f.dim()) + " does not match " + head_name +
                             " dim " + std::to_string(h.dim()));
  }
}

void require_shape(const Shape& a, const Shape& b, const std::string& field) {
  if (a != b) fixture_error(field, "shape " + to_string(b) + " does not match " + to_string(a));
}

LossConfig config_from(const json& j) {
  LossConfig cfg;
  if (!j.is_object()) fixture_error("config", "must be an object");
  try {
    cfg.tau = j.value("tau", cfg.tau);
    cfg.epsilon = j.value("epsilon", cfg.epsilon);
    cfg.lambda_vl_start = j.value("lambda_vl_start", cfg.lambda_vl_start);
    cfg.lambda_ct = j.value("lambda_ct", cfg.lambda_ct);
    cfg.total_steps = j.value("total_steps", cfg.total_steps);
    cfg.validate();
  } catch (const json::exception& e) {
    fixture_error("config", e.what());
  } catch (const Error& e) {
    fixture_error("config", e.what());
  }
  return cfg;
}

}  // namespace

LossReport evaluate_loss_fixture(const json& fixture, const std::filesystem::path& base_dir) {
  if (!fixture.is_object()) fixture_error("fixture", "must be a JSON object");
  const std::size_t step = fixture.contains("step") ? get<std::size_t>(fixture.at("step"), "step") : 0;
  const LossConfig cfg = fixture.contains("config") ? config_from(fixture.at("config")) : LossConfig{};

  auto guarded = [](const std::string& field, auto&& fn) {
    try {
      return fn();
    } catch (const Error& e) {
      if (e.code() == ErrorCode::FixtureError) throw;
      fixture_error(field, e.what());
    }
  };

  if (fixture.contains("components")) {
    const auto& c = fixture.at("components");
    LossComponents components;
    components.l_s = get<double>(member(c, "l_s", "components"), "components.l_s");
    components.l_u = get<double>(member(c, "l_u", "components"), "components.l_u");
    components.l_vl = get<double>(member(c, "l_vl", "components"), "components.l_vl");
    components.l_ct = get<double>(member(c, "l_ct", "components"), "components.l_ct");
    return guarded("components", [&] { return total_loss(components, step, cfg); });
  }

  const auto& hj = member(fixture, "heads", "fixture");
  Heads heads{head(member(hj, "cr", "heads"), "heads.cr"), head(member(hj, "vl", "heads"), "heads.vl"),
              head(member(hj, "seg", "heads"), "heads.seg")};

  LossBatch batch;
  if (fixture.contains("labeled")) {
    const auto& items = fixture.at("labeled");
    if (!items.is_array()) fixture_error("labeled", "must be an array");
    for (std::size_t i = 0; i < items.size(); ++i) {
      const std::string f = "labeled[" + std::to_string(i) + "]";
      const auto& it = items[i];
      LabeledSample s{tensor(member(it, "change", f), f + ".change", base_dir),
                      tensor(member(it, "seg_t1", f), f + ".seg_t1", base_dir),
                      tensor(member(it, "seg_t2", f), f + ".seg_t2", base_dir),
                      mask(member(it, "gt", f), f + ".gt", base_dir),
                      targets(member(it, "vlm", f), f + ".vlm", base_dir)};
      require_dim(s.change, heads.cr, f + ".change", "heads.cr");
      require_dim(s.change, heads.vl, f + ".change", "heads.vl");
      require_dim(s.seg_t1, heads.seg, f + ".seg_t1", "heads.seg");
      require_dim(s.seg_t2, heads.seg, f + ".seg_t2", "heads.seg");
      require_shape(s.change.shape(), s.seg_t1.shape(), f + ".seg_t1");
      require_shape(s.change.shape(), s.seg_t2.shape(), f + ".seg_t2");
      require_shape(s.change.shape(), s.gt.shape(), f + ".gt");
      require_shape(s.change.shape(), s.vlm.mix_diff.shape(), f + ".vlm.mix_diff");
      require_shape(s.change.shape(), s.vlm.seg_t1.shape(), f + ".vlm.seg_t1");
      require_shape(s.change.shape(), s.vlm.seg_t2.shape(), f + ".vlm.seg_t2");
      batch.labeled.push_back(std::move(s));
    }
  }
  if (fixture.contains("unlabeled")) {
    const auto& items = fixture.at("unlabeled");
    if (!items.is_array()) fixture_error("unlabeled", "must be an array");
    for (std::size_t i = 0; i < items.size(); ++i) {
      const std::string f = "unlabeled[" + std::to_string(i) + "]";
      const auto& it = items[i];
      UnlabeledSample s{tensor(member(it, "weak_change", f), f + ".weak_change", base_dir),
                        tensor(member(it, "strong_change", f), f + ".strong_change", base_dir),
                        tensor(member(it, "weak_seg_t1", f), f + ".weak_seg_t1", base_dir),
                        tensor(member(it, "weak_seg_t2", f), f + ".weak_seg_t2", base_dir),
                        tensor(member(it, "strong_seg_t1", f), f + ".strong_seg_t1", base_dir),
                        tensor(member(it, "strong_seg_t2", f), f + ".strong_seg_t2", base_dir),
                        targets(member(it, "vlm", f), f + ".vlm", base_dir)};
      for (const auto* name : {"weak_change", "strong_change"}) {
        const auto& fm = std::string(name) == "weak_change" ? s.weak_change : s.strong_change;
        require_dim(fm, heads.cr, f + "." + name, "heads.cr");
        require_dim(fm, heads.vl, f + "." + name, "heads.vl");
        require_shape(s.weak_change.shape(), fm.shape(), f + "." + name);
      }
      const std::pair<const char*, const FeatureMap*> seg[] = {{"weak_seg_t1", &s.weak_seg_t1},
                                                               {"weak_seg_t2", &s.weak_seg_t2},
                                                               {"strong_seg_t1", &s.strong_seg_t1},
                                                               {"strong_seg_t2", &s.strong_seg_t2}};
      for (const auto& [name, fm] : seg) {
        require_dim(*fm, heads.seg, f + "." + name, "heads.seg");
        require_shape(s.weak_change.shape(), fm->shape(), f + "." + name);
      }
      require_shape(s.weak_change.shape(), s.vlm.mix_diff.shape(), f + ".vlm.mix_diff");
      require_shape(s.weak_change.shape(), s.vlm.seg_t1.shape(), f + ".vlm.seg_t1");
      require_shape(s.weak_change.shape(), s.vlm.seg_t2.shape(), f + ".vlm.seg_t2");
      batch.unlabeled.push_back(std::move(s));
    }
  }
  return guarded("fixture", [&] { return compute_losses(batch, heads, step, cfg); });
}

}  // namespace ceg
