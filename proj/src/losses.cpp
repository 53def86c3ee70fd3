#include "ceg/losses.hpp"

#include <algorithm>
#include <cmath>

namespace ceg {

namespace {

void require_batch(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": " + std::to_string(a) +
                                              " predictions vs " + std::to_string(b) + " targets");
  }
}

BatchLoss batch_mean(std::span<const CeResult> per_image) {
  BatchLoss out;
  if (per_image.empty()) return out;
  for (const auto& r : per_image) {
    out.loss += r.loss;
    out.pixels += r.count;
  }
  out.loss /= static_cast<double>(per_image.size());
  return out;
}

double l2_distance(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

}  // namespace

void LossConfig::validate() const {
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "tau must lie in [0,1]");
  }
  if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be > 0");
  if (!(lambda_vl_start >= 0.0) || !(lambda_ct >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "loss weights must be >= 0");
  }
  if (total_steps == 0) throw Error(ErrorCode::InvalidArgument, "total_steps must be >= 1");
}

LogitMap::LogitMap(std::size_t height, std::size_t width, std::size_t num_classes,
                   std::vector<double> data)
    : shape_{height, width}, num_classes_(num_classes), data_(std::move(data)) {
  if (num_classes_ == 0) throw Error(ErrorCode::DimMismatch, "logits need K >= 1");
  if (data_.size() != shape_.pixels() * num_classes_) {
    throw Error(ErrorCode::DimMismatch, "logit payload has " + std::to_string(data_.size()) +
                                            " values, expected " +
                                            std::to_string(shape_.pixels() * num_classes_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw Error(ErrorCode::NonFiniteInput, "non-finite logit at index " + std::to_string(i));
    }
  }
}

double pixel_ce(std::span<const double> logits, std::size_t target) {
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - top);
  return (top + std::log(sum)) - logits[target];
}

ProbMap softmax_probs(const LogitMap& logits) {
  const std::size_t n = logits.shape().pixels();
  const std::size_t k_count = logits.num_classes();
  std::vector<float> planes(k_count * n);
  std::vector<double> e(k_count);
  for (std::size_t k = 0; k < n; ++k) {
    auto row = logits.at(k);
    const double top = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < k_count; ++c) sum += e[c] = std::exp(row[c] - top);
    for (std::size_t c = 0; c < k_count; ++c) planes[c * n + k] = static_cast<float>(e[c] / sum);
  }
  std::vector<std::string> names;
  for (std::size_t c = 0; c < k_count; ++c) names.push_back("class_" + std::to_string(c));
  return ProbMap(std::move(names), logits.height(), logits.width(), std::move(planes));
}

CeResult masked_ce(const LogitMap& logits, const TriMask& target) {
  require_same_shape(logits.shape(), target.shape(), "masked_ce logits/target");
  CeResult out;
  for (std::size_t k = 0; k < target.size(); ++k) {
    const std::uint8_t t = target[k];
    if (t == kIgnore) continue;
    if (t >= logits.num_classes()) {
      throw Error(ErrorCode::ClassOutOfRange, "target class " + std::to_string(t) + " at offset " +
                                                  std::to_string(k) + " with K=" +
                                                  std::to_string(logits.num_classes()));
    }
    out.loss += pixel_ce(logits.at(k), t);
    ++out.count;
  }
  if (out.count > 0) out.loss /= static_cast<double>(out.count);
  return out;
}

BatchLoss supervised_loss(std::span<const LogitMap> preds, std::span<const TriMask> gts) {
  require_batch(preds.size(), gts.size(), "supervised_loss");
  std::vector<CeResult> per_image;
  per_image.reserve(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) per_image.push_back(masked_ce(preds[i], gts[i]));
  return batch_mean(per_image);
}

TriMask gated_hard_labels(const ProbMap& weak_probs, double tau) {
  const std::size_t n = weak_probs.shape().pixels();
  std::vector<std::uint8_t> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t best = 0;
    float conf = weak_probs.at(0, k);
    for (std::size_t c = 1; c < weak_probs.num_classes(); ++c) {
      if (weak_probs.at(c, k) > conf) {
        conf = weak_probs.at(c, k);
        best = c;
      }
    }
    if (conf < tau) {
      out[k] = kIgnore;
    } else if (best > 1) {
      throw Error(ErrorCode::ClassOutOfRange,
                  "hard label " + std::to_string(best) + " does not fit a change mask");
    } else {
      out[k] = static_cast<std::uint8_t>(best);
    }
  }
  return TriMask(weak_probs.shape(), std::move(out));
}

BatchLoss consistency_loss(std::span<const ProbMap> weak_probs, std::span<const LogitMap> strong_logits,
                           double tau) {
  require_batch(strong_logits.size(), weak_probs.size(), "consistency_loss");
  std::vector<CeResult> per_image;
  per_image.reserve(weak_probs.size());
  for (std::size_t i = 0; i < weak_probs.size(); ++i) {
    require_same_shape(weak_probs[i].shape(), strong_logits[i].shape(), "consistency_loss weak/strong");
    per_image.push_back(masked_ce(strong_logits[i], gated_hard_labels(weak_probs[i], tau)));
  }
  return batch_mean(per_image);
}

LogitMap apply_head(const FeatureMap& features, const ClassifierWeights& head) {
  if (features.dim() != head.dim()) {
    throw Error(ErrorCode::DimMismatch, "features have D=" + std::to_string(features.dim()) +
                                            ", head expects D=" + std::to_string(head.dim()));
  }
  const std::size_t n = features.shape().pixels();
  const std::size_t classes = head.num_classes();
  std::vector<double> out(n * classes);
  for (std::size_t k = 0; k < n; ++k) {
    auto q = features.at(k);
    for (std::size_t c = 0; c < classes; ++c) {
      auto w = head.row(c);
      double acc = head.bias()[c];
      for (std::size_t d = 0; d < q.size(); ++d) acc += w[d] * q[d];
      out[k * classes + c] = acc;
    }
  }
  return LogitMap(features.height(), features.width(), classes, std::move(out));
}

CeResult seg_pair_ce(const SegLogits& logits, const TriMask& target_t1, const TriMask& target_t2) {
  const CeResult a = masked_ce(logits.t1, target_t1);
  const CeResult b = masked_ce(logits.t2, target_t2);
  CeResult out;
  out.count = a.count + b.count;
  if (out.count > 0) {
    out.loss = (a.loss * static_cast<double>(a.count) + b.loss * static_cast<double>(b.count)) /
               static_cast<double>(out.count);
  }
  return out;
}

GuidanceLoss vlm_guidance_loss(const GuidanceInputs& in) {
  const std::size_t n_l = in.labeled_targets.size();
  const std::size_t n_u = in.unlabeled_targets.size();
  require_batch(in.labeled_change.size(), n_l, "guidance labeled change");
  require_batch(in.labeled_seg.size(), n_l, "guidance labeled seg");
  require_batch(in.weak_change.size(), n_u, "guidance weak change");
  require_batch(in.strong_change.size(), n_u, "guidance strong change");
  require_batch(in.weak_seg.size(), n_u, "guidance weak seg");
  require_batch(in.strong_seg.size(), n_u, "guidance strong seg");

  auto change_term = [](const std::vector<LogitMap>& logits,
                        const std::vector<GuidanceTargets>& targets) {
    std::vector<CeResult> per_image;
    for (std::size_t i = 0; i < logits.size(); ++i) {
      per_image.push_back(masked_ce(logits[i], targets[i].mix_diff));
    }
    return batch_mean(per_image);
  };
  auto seg_term = [](const std::vector<SegLogits>& logits,
                     const std::vector<GuidanceTargets>& targets) {
    std::vector<CeResult> per_image;
    for (std::size_t i = 0; i < logits.size(); ++i) {
      per_image.push_back(seg_pair_ce(logits[i], targets[i].seg_t1, targets[i].seg_t2));
    }
    return batch_mean(per_image);
  };

  GuidanceLoss out;
  out.change_labeled = change_term(in.labeled_change, in.labeled_targets);
  out.change_weak = change_term(in.weak_change, in.unlabeled_targets);
  out.change_strong = change_term(in.strong_change, in.unlabeled_targets);
  out.seg_labeled = seg_term(in.labeled_seg, in.labeled_targets);
  out.seg_weak = seg_term(in.weak_seg, in.unlabeled_targets);
  out.seg_strong = seg_term(in.strong_seg, in.unlabeled_targets);
  return out;
}

ContrastiveLoss balanced_contrastive(std::span<const ContrastivePair> batch, double epsilon) {
  if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be > 0");
  ContrastiveLoss out;
  double pull = 0.0;
  double push = 0.0;
  for (const auto& item : batch) {
    const FeatureMap& q1 = *item.q1;
    const FeatureMap& q2 = *item.q2;
    const TriMask& y = *item.labels;
    if (q1.dim() != q2.dim()) {
      throw Error(ErrorCode::DimMismatch, "contrastive features have D=" + std::to_string(q1.dim()) +
                                              " and D=" + std::to_string(q2.dim()));
    }
    require_same_shape(q1.shape(), q2.shape(), "contrastive features");
    require_same_shape(q1.shape(), y.shape(), "contrastive labels");
    for (std::size_t k = 0; k < y.size(); ++k) {
      if (y[k] == kIgnore) continue;
      const double d = l2_distance(q1.at(k), q2.at(k));
      if (y[k] == 0) {
        pull += d;
        ++out.n_unchanged;
      } else {
        push += std::max(0.0, epsilon - d);
        ++out.n_changed;
      }
    }
  }
  if (out.n_unchanged > 0) out.unchanged_term = pull / static_cast<double>(out.n_unchanged);
  if (out.n_changed > 0) out.changed_term = push / static_cast<double>(out.n_changed);
  return out;
}

ContrastiveLoss balanced_contrastive(const FeatureMap& q1, const FeatureMap& q2,
                                     const TriMask& labels, double epsilon) {
  const ContrastivePair pair{&q1, &q2, &labels};
  return balanced_contrastive(std::span<const ContrastivePair>(&pair, 1), epsilon);
}

double lambda_vl_schedule(std::size_t step, const LossConfig& cfg) {
  cfg.validate();
  if (step > cfg.total_steps) {
    throw Error(ErrorCode::StepOutOfRange, "step " + std::to_string(step) + " exceeds total_steps " +
                                               std::to_string(cfg.total_steps));
  }
  if (step == cfg.total_steps) return 0.0;
  return cfg.lambda_vl_start *
         (1.0 - static_cast<double>(step) / static_cast<double>(cfg.total_steps));
}

LossReport total_loss(const LossComponents& c, std::size_t step, const LossConfig& cfg) {
  LossReport r;
  r.l_s = c.l_s;
  r.l_u = c.l_u;
  r.l_cr = 0.5 * (c.l_s + c.l_u);
  r.l_vl = c.l_vl;
  r.l_ct = c.l_ct;
  r.step = step;
  r.lambda_vl = lambda_vl_schedule(step, cfg);
  r.lambda_ct = cfg.lambda_ct;
  r.total = r.l_cr + r.lambda_vl * r.l_vl + r.lambda_ct * r.l_ct;
  return r;
}

nlohmann::json to_json(const LossReport& r) {
  return {
      {"l_s", r.l_s},
      {"l_u", r.l_u},
      {"l_cr", r.l_cr},
      {"l_vl", r.l_vl},
      {"l_vl_change", r.l_vl_change},
      {"l_vl_seg", r.l_vl_seg},
      {"l_ct", r.l_ct},
      {"total", r.total},
      {"lambda_vl", r.lambda_vl},
      {"lambda_ct", r.lambda_ct},
      {"step", r.step},
      {"counts",
       {{"l_s", r.n_s},
        {"l_u", r.n_u},
        {"l_vl_change", r.n_vl_change},
        {"l_vl_seg", r.n_vl_seg},
        {"l_ct_unchanged", r.n_ct_unchanged},
        {"l_ct_changed", r.n_ct_changed}}},
  };
}

LossReport compute_losses(const LossBatch& batch, const Heads& heads, std::size_t step,
                          const LossConfig& cfg) {
  cfg.validate();

  std::vector<LogitMap> sup_logits;
  std::vector<TriMask> sup_targets;
  GuidanceInputs guidance;
  std::vector<ContrastivePair> labeled_pairs;
  for (const auto& s : batch.labeled) {
    sup_logits.push_back(apply_head(s.change, heads.cr));
    sup_targets.push_back(s.gt);
    guidance.labeled_change.push_back(apply_head(s.change, heads.vl));
    guidance.labeled_seg.push_back({apply_head(s.seg_t1, heads.seg), apply_head(s.seg_t2, heads.seg)});
    guidance.labeled_targets.push_back(s.vlm);
    labeled_pairs.push_back({&s.seg_t1, &s.seg_t2, &s.gt});
  }

  std::vector<ProbMap> weak_probs;
  std::vector<LogitMap> strong_logits;
  std::vector<TriMask> strong_labels;
  for (const auto& s : batch.unlabeled) {
    weak_probs.push_back(softmax_probs(apply_head(s.weak_change, heads.cr)));
    strong_logits.push_back(apply_head(s.strong_change, heads.cr));
    strong_labels.push_back(gated_hard_labels(weak_probs.back(), cfg.tau));
    guidance.weak_change.push_back(apply_head(s.weak_change, heads.vl));
    guidance.strong_change.push_back(apply_head(s.strong_change, heads.vl));
    guidance.weak_seg.push_back(
        {apply_head(s.weak_seg_t1, heads.seg), apply_head(s.weak_seg_t2, heads.seg)});
    guidance.strong_seg.push_back(
        {apply_head(s.strong_seg_t1, heads.seg), apply_head(s.strong_seg_t2, heads.seg)});
    guidance.unlabeled_targets.push_back(s.vlm);
  }
  std::vector<ContrastivePair> strong_pairs;
  for (std::size_t i = 0; i < batch.unlabeled.size(); ++i) {
    const auto& s = batch.unlabeled[i];
    strong_pairs.push_back({&s.strong_seg_t1, &s.strong_seg_t2, &strong_labels[i]});
  }

  const BatchLoss sup = supervised_loss(sup_logits, sup_targets);
  const BatchLoss cons = consistency_loss(weak_probs, strong_logits, cfg.tau);
  const GuidanceLoss vl = vlm_guidance_loss(guidance);
  const ContrastiveLoss ct_l = balanced_contrastive(labeled_pairs, cfg.epsilon);
  const ContrastiveLoss ct_s = balanced_contrastive(strong_pairs, cfg.epsilon);

  LossReport r = total_loss({sup.loss, cons.loss, vl.total(), ct_l.loss() + ct_s.loss()}, step, cfg);
  r.l_vl_change = vl.change();
  r.l_vl_seg = vl.seg();
  r.n_s = sup.pixels;
  r.n_u = cons.pixels;
  r.n_vl_change = vl.change_labeled.pixels + vl.change_weak.pixels + vl.change_strong.pixels;
  r.n_vl_seg = vl.seg_labeled.pixels + vl.seg_weak.pixels + vl.seg_strong.pixels;
  r.n_ct_unchanged = ct_l.n_unchanged + ct_s.n_unchanged;
  r.n_ct_changed = ct_l.n_changed + ct_s.n_changed;
  return r;
}

}  // namespace ceg
