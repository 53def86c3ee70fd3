#include "ceg/pipeline.hpp"

namespace ceg {

std::string_view to_string(CegMode mode) {
  switch (mode) {
    case CegMode::Pixel: return "pixel";
    case CegMode::Instance: return "instance";
    case CegMode::Mixed: return "mixed";
  }
  return "unknown";
}

CegMode ceg_mode_from_string(std::string_view name) {
  if (name == "pixel") return CegMode::Pixel;
  if (name == "instance") return CegMode::Instance;
  if (name == "mixed") return CegMode::Mixed;
  throw Error(ErrorCode::InvalidArgument, "unknown CEG mode '" + std::string(name) + "'");
}

std::string_view output_suffix(CegMode mode) {
  switch (mode) {
    case CegMode::Pixel: return "pixel";
    case CegMode::Instance: return "ins";
    case CegMode::Mixed: return "mix";
  }
  return "unknown";
}

PairEvaluator::PairEvaluator(const LoadedPair& pair, const Taxonomy& taxonomy,
                             Connectivity connectivity)
    : pair_(pair), taxonomy_(taxonomy), connectivity_(connectivity) {}

const PixelCegOutput& PairEvaluator::pixel(double gamma) {
  if (!pixel_ || pixel_gamma_ != gamma) {
    pixel_ = pixel_ceg(pair_.p1, pair_.p2, PixelCegConfig{gamma, taxonomy_});
    pixel_gamma_ = gamma;
  }
  return *pixel_;
}

const BinaryMask& PairEvaluator::instance(double delta) {
  if (!f1_) {
    if (pair_.instances_t1) {
      f1_ = *pair_.instances_t1;
      f2_ = *pair_.instances_t2;
    } else {
      // Segmentation does not depend on gamma; any cached run will do.
      const auto& px = pixel(pixel_gamma_.value_or(0.0));
      f1_ = connected_components(px.seg_t1, connectivity_);
      f2_ = connected_components(px.seg_t2, connectivity_);
    }
  }
  if (!instance_ || instance_delta_ != delta) {
    instance_ = instance_ceg(*f1_, *f2_, InstanceCegConfig{delta, connectivity_});
    instance_delta_ = delta;
  }
  return *instance_;
}

TriMask PairEvaluator::change(CegMode mode, double gamma, double delta) {
  switch (mode) {
    case CegMode::Pixel: {
      const auto& px = pixel(gamma);
      return reliable_pixel_diff(px.pixel_diff, px.rel);
    }
    case CegMode::Instance:
      return to_trimask(instance(delta));
    case CegMode::Mixed: {
      const BinaryMask ins = instance(delta);
      const auto& px = pixel(gamma);
      return mixed_ceg(px.pixel_diff, ins, px.rel);
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown CEG mode");
}

PairOutputs PairEvaluator::outputs(CegMode mode, const Thresholds& t) {
  TriMask change_mask = change(mode, t.gamma, t.delta);
  const auto& px = pixel(t.gamma);
  return PairOutputs{std::move(change_mask), seg_pseudo_labels(px.concept_probs_t1, t.beta),
                     seg_pseudo_labels(px.concept_probs_t2, t.beta)};
}

}  // namespace ceg
