#include "ceg/change_events.hpp"

#include <algorithm>
#include <numeric>

namespace ceg {

namespace {

void require_unit_interval(double value, const char* name) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument,
                std::string(name) + " must lie in [0,1], got " + std::to_string(value));
  }
}

// Union-find over provisional labels; the root is always the smallest label.
class LabelEquivalence {
 public:
  std::uint32_t make() {
    parent_.push_back(static_cast<std::uint32_t>(parent_.size()));
    return parent_.back();
  }

  std::uint32_t find(std::uint32_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  std::uint32_t unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return a;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
    return a;
  }

  std::size_t size() const { return parent_.size(); }

 private:
  std::vector<std::uint32_t> parent_;
};

}  // namespace

ProbMap concept_pool(const ProbMap& probs, const Taxonomy& taxonomy) {
  for (const auto& cls : probs.classes()) {
    if (!taxonomy.concept_of(cls)) {
      throw Error(ErrorCode::TaxonomyMismatch, "class '" + cls + "' is not covered by the taxonomy");
    }
  }
  std::vector<std::vector<std::size_t>> members(taxonomy.size());
  for (std::size_t a = 0; a < taxonomy.size(); ++a) {
    for (const auto& cls : taxonomy.concepts()[a].classes) {
      auto idx = probs.class_index(cls);
      if (!idx) {
        throw Error(ErrorCode::TaxonomyMismatch,
                    "taxonomy class '" + cls + "' is absent from the probability map");
      }
      members[a].push_back(*idx);
    }
  }

  const std::size_t n = probs.height() * probs.width();
  std::vector<float> out(taxonomy.size() * n);
  for (std::size_t a = 0; a < members.size(); ++a) {
    float* dst = out.data() + a * n;
    auto first = probs.plane(members[a].front());
    std::copy(first.begin(), first.end(), dst);
    for (std::size_t j = 1; j < members[a].size(); ++j) {
      auto plane = probs.plane(members[a][j]);
      for (std::size_t k = 0; k < n; ++k) dst[k] = std::max(dst[k], plane[k]);
    }
  }
  return ProbMap(taxonomy.concept_names(), probs.height(), probs.width(), std::move(out), false);
}

BinaryMask concept_argmax(const ProbMap& concept_probs) {
  if (concept_probs.num_classes() != 2) {
    throw Error(ErrorCode::TaxonomyMismatch, "expected two concept planes, got " +
                                                 std::to_string(concept_probs.num_classes()));
  }
  const auto bg = concept_probs.plane(0);
  const auto fg = concept_probs.plane(1);
  std::vector<std::uint8_t> seg(bg.size());
  for (std::size_t k = 0; k < seg.size(); ++k) seg[k] = fg[k] > bg[k];
  return BinaryMask(concept_probs.shape(), std::move(seg));
}

PixelCegOutput pixel_ceg(const ProbMap& p1, const ProbMap& p2, const PixelCegConfig& cfg) {
  require_unit_interval(cfg.gamma, "gamma");
  require_same_shape(p1.shape(), p2.shape(), "pixel_ceg probability maps");
  if (p1.classes() != p2.classes()) {
    throw Error(ErrorCode::TaxonomyMismatch, "temporal probability maps list different classes");
  }
  if (cfg.taxonomy.size() != 2) {
    throw Error(ErrorCode::TaxonomyMismatch, "pixel-level CEG needs exactly two concepts");
  }

  ProbMap c1 = concept_pool(p1, cfg.taxonomy);
  ProbMap c2 = concept_pool(p2, cfg.taxonomy);
  BinaryMask seg1 = concept_argmax(c1);
  BinaryMask seg2 = concept_argmax(c2);

  const std::size_t n = seg1.size();
  std::vector<std::uint8_t> rel(n), diff(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double conf1 = std::max(c1.at(0, k), c1.at(1, k));
    const double conf2 = std::max(c2.at(0, k), c2.at(1, k));
    rel[k] = conf1 >= cfg.gamma && conf2 >= cfg.gamma;
    diff[k] = seg1[k] != seg2[k];
  }
  const Shape shape = p1.shape();
  return PixelCegOutput{std::move(seg1),
                        std::move(seg2),
                        BinaryMask(shape, std::move(rel)),
                        BinaryMask(shape, std::move(diff)),
                        std::move(c1),
                        std::move(c2)};
}

InstanceSet connected_components(const BinaryMask& mask, Connectivity connectivity) {
  const std::size_t h = mask.height();
  const std::size_t w = mask.width();
  const bool eight = connectivity == Connectivity::Eight;
  std::vector<std::uint32_t> labels(h * w, 0);
  LabelEquivalence eq;
  eq.make();  // label 0 is background

  // First pass: provisional labels from already-visited neighbours.
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const std::size_t k = r * w + c;
      if (!mask[k]) continue;
      std::uint32_t label = 0;
      auto merge = [&](std::uint32_t other) {
        if (other == 0) return;
        label = label == 0 ? eq.find(other) : eq.unite(label, other);
      };
      if (c > 0) merge(labels[k - 1]);
      if (r > 0) {
        merge(labels[k - w]);
        if (eight && c > 0) merge(labels[k - w - 1]);
        if (eight && c + 1 < w) merge(labels[k - w + 1]);
      }
      labels[k] = label == 0 ? eq.make() : label;
    }
  }

  // Roots are the smallest provisional label of each component, which is
  // the label of its first pixel in raster order. Compacting roots in
  // increasing order therefore numbers components by first appearance.
  std::vector<std::uint32_t> compact(eq.size(), 0);
  std::uint32_t next = 0;
  for (std::uint32_t l = 1; l < eq.size(); ++l) {
    const std::uint32_t root = eq.find(l);
    if (root == l) compact[l] = ++next;
  }
  for (auto& l : labels) {
    if (l) l = compact[eq.find(l)];
  }
  return InstanceSet::from_label_map(mask.shape(), labels);
}

ScoreMatrix iou_matrix(const InstanceSet& f1, const InstanceSet& f2) {
  require_same_shape(f1.shape(), f2.shape(), "iou_matrix instance sets");
  const std::size_t m = f1.size();
  const std::size_t n = f2.size();
  std::vector<std::uint64_t> inter(m * n, 0);
  const auto l1 = f1.label_map();
  const auto l2 = f2.label_map();
  if (m > 0 && n > 0) {
    for (std::size_t k = 0; k < l1.size(); ++k) {
      if (l1[k] && l2[k]) ++inter[(l1[k] - 1) * n + (l2[k] - 1)];
    }
  }
  ScoreMatrix t(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::uint64_t both = inter[i * n + j];
      if (both == 0) continue;
      const std::uint64_t either = f1.instance_size(i) + f2.instance_size(j) - both;
      t(i, j) = static_cast<double>(both) / static_cast<double>(either);
    }
  }
  return t;
}

ChangeScores change_scores(const ScoreMatrix& t) {
  ChangeScores s;
  s.t1.assign(t.rows(), 0.0);
  s.t2.assign(t.cols(), 0.0);
  for (std::size_t m = 0; m < t.rows(); ++m) {
    for (std::size_t n = 0; n < t.cols(); ++n) s.t1[m] += t(m, n);
  }
  for (std::size_t n = 0; n < t.cols(); ++n) {
    for (std::size_t m = 0; m < t.rows(); ++m) s.t2[n] += t(m, n);
  }
  return s;
}

BinaryMask instance_ceg(const InstanceSet& f1, const InstanceSet& f2, const InstanceCegConfig& cfg) {
  if (!(cfg.delta >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "delta must be >= 0, got " + std::to_string(cfg.delta));
  }
  require_same_shape(f1.shape(), f2.shape(), "instance_ceg instance sets");
  const ChangeScores scores = change_scores(iou_matrix(f1, f2));

  auto flags = [&](const std::vector<double>& s) {
    std::vector<std::uint8_t> out(s.size() + 1, 0);
    for (std::size_t i = 0; i < s.size(); ++i) out[i + 1] = s[i] <= cfg.delta;
    return out;
  };
  const auto event1 = flags(scores.t1);
  const auto event2 = flags(scores.t2);
  const auto l1 = f1.label_map();
  const auto l2 = f2.label_map();
  std::vector<std::uint8_t> out(l1.size(), 0);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = event1[l1[k]] | event2[l2[k]];
  return BinaryMask(f1.shape(), std::move(out));
}

BinaryMask instance_ceg(const BinaryMask& seg_t1, const BinaryMask& seg_t2,
                        const InstanceCegConfig& cfg) {
  return instance_ceg(connected_components(seg_t1, cfg.connectivity),
                      connected_components(seg_t2, cfg.connectivity), cfg);
}

TriMask mixed_ceg(const BinaryMask& pixel_diff, const BinaryMask& ins_diff, const BinaryMask& rel) {
  require_same_shape(pixel_diff.shape(), ins_diff.shape(), "mixed_ceg pixel/instance masks");
  require_same_shape(pixel_diff.shape(), rel.shape(), "mixed_ceg reliability mask");
  std::vector<std::uint8_t> out(pixel_diff.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = rel[k] ? static_cast<std::uint8_t>(pixel_diff[k] & ins_diff[k]) : kIgnore;
  }
  return TriMask(pixel_diff.shape(), std::move(out));
}

TriMask reliable_pixel_diff(const BinaryMask& pixel_diff, const BinaryMask& rel) {
  require_same_shape(pixel_diff.shape(), rel.shape(), "reliable_pixel_diff");
  std::vector<std::uint8_t> out(pixel_diff.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = rel[k] ? pixel_diff[k] : kIgnore;
  return TriMask(pixel_diff.shape(), std::move(out));
}

TriMask seg_pseudo_labels(const ProbMap& concept_probs, double beta) {
  require_unit_interval(beta, "beta");
  if (concept_probs.num_classes() != 2) {
    throw Error(ErrorCode::TaxonomyMismatch, "expected two concept planes, got " +
                                                 std::to_string(concept_probs.num_classes()));
  }
  const auto bg = concept_probs.plane(0);
  const auto fg = concept_probs.plane(1);
  std::vector<std::uint8_t> out(bg.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const bool is_fg = fg[k] > bg[k];
    const double conf = is_fg ? fg[k] : bg[k];
    out[k] = conf >= beta ? static_cast<std::uint8_t>(is_fg) : kIgnore;
  }
  return TriMask(concept_probs.shape(), std::move(out));
}

}  // namespace ceg
