#include "ceg/manifest.hpp"

#include <set>

#include "ceg/io.hpp"

namespace ceg {

namespace {

[[noreturn]] void manifest_error(const std::string& message) {
  throw Error(ErrorCode::ManifestError, message);
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

Connectivity connectivity_from_int(int value) {
  if (value == 4) return Connectivity::Four;
  if (value == 8) return Connectivity::Eight;
  throw Error(ErrorCode::InvalidArgument, "connectivity must be 4 or 8, got " + std::to_string(value));
}

Manifest parse_manifest(const nlohmann::json& j, const fs::path& base_dir) {
  Manifest m;
  if (!j.is_object()) manifest_error("manifest must be a JSON object");
  try {
    if (j.contains("taxonomy")) {
      const auto& t = j.at("taxonomy");
      if (t.is_string()) {
        const auto path = resolve(base_dir, t.get<std::string>());
        auto bytes = read_file(path);
        m.taxonomy = taxonomy_from_json(nlohmann::json::parse(bytes));
      } else {
        m.taxonomy = taxonomy_from_json(t);
      }
    }
    if (j.contains("defaults")) {
      const auto& d = j.at("defaults");
      m.defaults.gamma = d.value("gamma", m.defaults.gamma);
      m.defaults.delta = d.value("delta", m.defaults.delta);
      m.defaults.beta = d.value("beta", m.defaults.beta);
      m.defaults.connectivity = connectivity_from_int(d.value("connectivity", 8));
    }
  } catch (const nlohmann::json::exception& e) {
    manifest_error(std::string("manifest header: ") + e.what());
  } catch (const Error& e) {
    manifest_error(e.what());
  }

  std::set<std::string> ids;
  const auto pairs = j.contains("pairs") ? j.at("pairs") : nlohmann::json::array();
  if (!pairs.is_array()) manifest_error("'pairs' must be an array");
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& item = pairs[i];
    PairEntry entry;
    try {
      entry.id = item.at("id").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      manifest_error("pair #" + std::to_string(i) + " has no string 'id'");
    }
    if (entry.id.empty()) manifest_error("pair #" + std::to_string(i) + " has an empty id");
    if (!ids.insert(entry.id).second) manifest_error("duplicate pair id '" + entry.id + "'");

    auto required = [&](const char* key) {
      if (!item.contains(key) || !item.at(key).is_string()) {
        manifest_error("pair '" + entry.id + "' is missing '" + key + "'");
      }
      return resolve(base_dir, item.at(key).get<std::string>());
    };
    auto optional = [&](const char* key) -> std::optional<fs::path> {
      if (!item.contains(key) || item.at(key).is_null()) return std::nullopt;
      if (!item.at(key).is_string()) manifest_error("pair '" + entry.id + "': '" + key + "' must be a path");
      return resolve(base_dir, item.at(key).get<std::string>());
    };
    entry.probmap_t1 = required("probmap_t1");
    entry.probmap_t2 = required("probmap_t2");
    entry.instances_t1 = optional("instances_t1");
    entry.instances_t2 = optional("instances_t2");
    entry.gt_change = optional("gt_change");
    if (entry.instances_t1.has_value() != entry.instances_t2.has_value()) {
      manifest_error("pair '" + entry.id + "' must give both instance maps or neither");
    }

    std::vector<fs::path> files = {entry.probmap_t1, entry.probmap_t2};
    for (const auto& p : {entry.instances_t1, entry.instances_t2, entry.gt_change}) {
      if (p) files.push_back(*p);
    }
    for (const auto& f : files) {
      if (!fs::exists(f)) manifest_error("pair '" + entry.id + "': missing file " + f.string());
    }
    m.pairs.push_back(std::move(entry));
  }
  return m;
}

Manifest load_manifest(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    manifest_error(path.string() + ": " + e.what());
  } catch (const Error& e) {
    manifest_error(e.what());
  }
  return parse_manifest(j, path.parent_path());
}

nlohmann::json manifest_to_json(const Manifest& m) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : m.pairs) {
    nlohmann::json item = {{"id", p.id},
                           {"probmap_t1", p.probmap_t1.generic_string()},
                           {"probmap_t2", p.probmap_t2.generic_string()}};
    if (p.instances_t1) item["instances_t1"] = p.instances_t1->generic_string();
    if (p.instances_t2) item["instances_t2"] = p.instances_t2->generic_string();
    if (p.gt_change) item["gt_change"] = p.gt_change->generic_string();
    pairs.push_back(std::move(item));
  }
  return {{"taxonomy", taxonomy_to_json(m.taxonomy)},
          {"defaults",
           {{"gamma", m.defaults.gamma},
            {"delta", m.defaults.delta},
            {"beta", m.defaults.beta},
            {"connectivity", static_cast<int>(m.defaults.connectivity)}}},
          {"pairs", pairs}};
}

LoadedPair load_pair(const PairEntry& entry) {
  LoadedPair out{entry.id, read_probmap(entry.probmap_t1), read_probmap(entry.probmap_t2), {}, {}, {}};
  if (entry.instances_t1) out.instances_t1 = instances_from_labelmap(*entry.instances_t1);
  if (entry.instances_t2) out.instances_t2 = instances_from_labelmap(*entry.instances_t2);
  if (entry.gt_change) out.gt_change = read_binary_mask(*entry.gt_change);

  require_same_shape(out.p1.shape(), out.p2.shape(), entry.id + " probability maps");
  if (out.instances_t1) {
    require_same_shape(out.p1.shape(), out.instances_t1->shape(), entry.id + " instances_t1");
    require_same_shape(out.p1.shape(), out.instances_t2->shape(), entry.id + " instances_t2");
  }
  if (out.gt_change) require_same_shape(out.p1.shape(), out.gt_change->shape(), entry.id + " gt_change");
  return out;
}

}  // namespace ceg
