#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "ceg/raster.hpp"

namespace ceg {

struct LossConfig {
  double tau = 0.95;             // confidence gate for weak-view pseudo labels
  double epsilon = 2.0;          // contrastive margin
  double lambda_vl_start = 0.1;  // decays linearly to 0 over total_steps
  double lambda_ct = 0.1;
  std::size_t total_steps = 100;
  std::uint8_t ignore_value = kIgnore;

  void validate() const;
};

/// H x W x K raw class scores, pixel-major.
class LogitMap {
 public:
  LogitMap(std::size_t height, std::size_t width, std::size_t num_classes, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::size_t height() const { return shape_.height; }
  std::size_t width() const { return shape_.width; }
  std::size_t num_classes() const { return num_classes_; }
  std::span<const double> data() const { return data_; }
  std::span<const double> at(std::size_t pixel) const {
    return std::span<const double>(data_).subspan(pixel * num_classes_, num_classes_);
  }

 private:
  Shape shape_;
  std::size_t num_classes_;
  std::vector<double> data_;
};

struct CeResult {
  double loss = 0.0;
  std::size_t count = 0;
};

struct BatchLoss {
  double loss = 0.0;
  std::size_t pixels = 0;  // contributing pixels over the whole batch
};

// -log softmax(logits)[target], computed with max subtraction.
double pixel_ce(std::span<const double> logits, std::size_t target);

ProbMap softmax_probs(const LogitMap& logits);

// Mean CE over pixels whose target is not 255; (0, 0) if none contribute.
CeResult masked_ce(const LogitMap& logits, const TriMask& target);

// Mean over the batch of per-image masked_ce.
BatchLoss supervised_loss(std::span<const LogitMap> preds, std::span<const TriMask> gts);

// Per-pixel argmax of the weak prediction (ties to the lower class), with
// pixels whose confidence is below tau set to 255.
TriMask gated_hard_labels(const ProbMap& weak_probs, double tau);

BatchLoss consistency_loss(std::span<const ProbMap> weak_probs, std::span<const LogitMap> strong_logits,
                           double tau);

LogitMap apply_head(const FeatureMap& features, const ClassifierWeights& head);

struct SegLogits {
  LogitMap t1;
  LogitMap t2;
};

struct GuidanceTargets {
  TriMask mix_diff;
  TriMask seg_t1;
  TriMask seg_t2;
};

/// Prediction streams supervised by the VLM pseudo labels. Change logits
/// come from the VLM head, segmentation logits from the segmentation head.
struct GuidanceInputs {
  std::vector<LogitMap> labeled_change;
  std::vector<LogitMap> weak_change;
  std::vector<LogitMap> strong_change;
  std::vector<SegLogits> labeled_seg;
  std::vector<SegLogits> weak_seg;
  std::vector<SegLogits> strong_seg;
  std::vector<GuidanceTargets> labeled_targets;
  std::vector<GuidanceTargets> unlabeled_targets;
};

struct GuidanceLoss {
  BatchLoss change_labeled, change_weak, change_strong;
  BatchLoss seg_labeled, seg_weak, seg_strong;

  double change() const { return change_labeled.loss + change_weak.loss + change_strong.loss; }
  double seg() const { return seg_labeled.loss + seg_weak.loss + seg_strong.loss; }
  double total() const { return change() + seg(); }
};

// Mean CE over the contributing pixels of both temporals pooled together.
CeResult seg_pair_ce(const SegLogits& logits, const TriMask& target_t1, const TriMask& target_t2);

GuidanceLoss vlm_guidance_loss(const GuidanceInputs& inputs);

struct ContrastivePair {
  const FeatureMap* q1;
  const FeatureMap* q2;
  const TriMask* labels;
};

struct ContrastiveLoss {
  double unchanged_term = 0.0;
  double changed_term = 0.0;
  std::size_t n_unchanged = 0;
  std::size_t n_changed = 0;

  double loss() const { return unchanged_term + changed_term; }
};

// Batch-balanced contrastive loss: unchanged pairs pulled together by their
// mean L2 distance, changed pairs pushed past the margin by a mean hinge.
// Counts are taken over the whole batch.
ContrastiveLoss balanced_contrastive(std::span<const ContrastivePair> batch, double epsilon);
ContrastiveLoss balanced_contrastive(const FeatureMap& q1, const FeatureMap& q2,
                                     const TriMask& labels, double epsilon);

double lambda_vl_schedule(std::size_t step, const LossConfig& cfg);

struct LossComponents {
  double l_s = 0.0;
  double l_u = 0.0;
  double l_vl = 0.0;
  double l_ct = 0.0;
};

struct LossReport {
  double l_s = 0.0;
  double l_u = 0.0;
  double l_cr = 0.0;
  double l_vl = 0.0;
  double l_vl_change = 0.0;
  double l_vl_seg = 0.0;
  double l_ct = 0.0;
  double total = 0.0;
  double lambda_vl = 0.0;
  double lambda_ct = 0.0;
  std::size_t step = 0;

  std::size_t n_s = 0;
  std::size_t n_u = 0;
  std::size_t n_vl_change = 0;
  std::size_t n_vl_seg = 0;
  std::size_t n_ct_unchanged = 0;
  std::size_t n_ct_changed = 0;
};

// l_cr = (l_s + l_u) / 2; total = l_cr + lambda_vl(step) l_vl + lambda_ct l_ct.
LossReport total_loss(const LossComponents& components, std::size_t step, const LossConfig& cfg);

nlohmann::json to_json(const LossReport& report);

// Linear heads over shared features: change-consistency, VLM guidance and
// segmentation.
struct Heads {
  ClassifierWeights cr;
  ClassifierWeights vl;
  ClassifierWeights seg;
};

struct LabeledSample {
  FeatureMap change;
  FeatureMap seg_t1;
  FeatureMap seg_t2;
  TriMask gt;
  GuidanceTargets vlm;
};

struct UnlabeledSample {
  FeatureMap weak_change;
  FeatureMap strong_change;
  FeatureMap weak_seg_t1;
  FeatureMap weak_seg_t2;
  FeatureMap strong_seg_t1;
  FeatureMap strong_seg_t2;
  GuidanceTargets vlm;
};

struct LossBatch {
  std::vector<LabeledSample> labeled;
  std::vector<UnlabeledSample> unlabeled;
};

/// Evaluates every loss term on one batch.
///
/// Supervised CE and consistency CE use the cr head; VLM guidance uses the
/// vl head for change and the seg head for both temporals on the labeled,
/// weak and strong streams. The contrastive term is the sum of the labeled
/// stream (labels = ground truth) and the strong stream (labels = gated weak
/// hard labels), each batch-balanced on its own.
LossReport compute_losses(const LossBatch& batch, const Heads& heads, std::size_t step,
                          const LossConfig& cfg);

}  // namespace ceg
