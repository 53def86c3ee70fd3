#pragma once

#include <filesystem>

#include <json.hpp>

#include "ceg/losses.hpp"

namespace ceg {

/// Loss fixture layout (JSON, paths relative to the fixture file):
///
///   {"step": 0,
///    "config": {"tau", "epsilon", "lambda_vl_start", "lambda_ct", "total_steps"},
///    "components": {"l_s", "l_u", "l_vl", "l_ct"}}
///
/// or, to evaluate every term from raw tensors,
///
///   {"step": 0, "config": {...},
///    "heads": {"cr": HEAD, "vl": HEAD, "seg": HEAD},
///    "labeled": [{"change", "seg_t1", "seg_t2": TENSOR, "gt": MASK,
///                 "vlm": {"mix_diff", "seg_t1", "seg_t2": MASK}}],
///    "unlabeled": [{"weak_change", "strong_change", "weak_seg_t1",
///                   "weak_seg_t2", "strong_seg_t1", "strong_seg_t2": TENSOR,
///                   "vlm": {...}}]}
///
/// HEAD   = {"dim": D, "classes": K, "weights": [K*D], "bias": [K]?}
/// TENSOR = {"shape": [H, W, D], "data": [...]} or {"shape": [...], "file": "x.f64"}
///          (pixel-major; files hold raw float64 little-endian values)
/// MASK   = {"shape": [H, W], "data": [...]} or "mask.pgm"
///
/// Malformed or inconsistent fixtures throw FixtureError naming the field.
LossReport evaluate_loss_fixture(const nlohmann::json& fixture, const std::filesystem::path& base_dir);

}  // namespace ceg
