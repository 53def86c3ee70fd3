#pragma once

#include <string>
#include <string_view>

#include "ceg/change_events.hpp"
#include "ceg/manifest.hpp"

namespace ceg {

enum class CegMode { Pixel, Instance, Mixed };

std::string_view to_string(CegMode mode);
CegMode ceg_mode_from_string(std::string_view name);

// File suffix used for a mode's change mask: pixel, ins, mix.
std::string_view output_suffix(CegMode mode);

struct PairOutputs {
  TriMask change;  // binary for instance mode, tri-valued otherwise
  TriMask seg_t1;  // beta-filtered segmentation pseudo labels
  TriMask seg_t2;
};

/// Change-event generation for one image pair.
///
/// Instance sets come from the pair's label maps when present; otherwise
/// they are the connected components of each temporal's foreground
/// segmentation.
class PairEvaluator {
 public:
  PairEvaluator(const LoadedPair& pair, const Taxonomy& taxonomy, Connectivity connectivity);

  const PixelCegOutput& pixel(double gamma);
  const BinaryMask& instance(double delta);
  TriMask change(CegMode mode, double gamma, double delta);
  PairOutputs outputs(CegMode mode, const Thresholds& thresholds);

 private:
  const LoadedPair& pair_;
  Taxonomy taxonomy_;
  Connectivity connectivity_;
  std::optional<double> pixel_gamma_;
  std::optional<PixelCegOutput> pixel_;
  std::optional<double> instance_delta_;
  std::optional<BinaryMask> instance_;
  std::optional<InstanceSet> f1_;
  std::optional<InstanceSet> f2_;
};

}  // namespace ceg
