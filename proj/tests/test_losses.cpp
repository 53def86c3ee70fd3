#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "ceg/losses.hpp"
#include "oracles.hpp"

using namespace ceg;

namespace {

LogitMap random_logits(oracle::Gen& gen, std::size_t h, std::size_t w, std::size_t k) {
  std::vector<double> v(h * w * k);
  for (auto& x : v) x = gen.real(-4.0, 4.0);
  return LogitMap(h, w, k, std::move(v));
}

FeatureMap random_features(oracle::Gen& gen, std::size_t h, std::size_t w, std::size_t d) {
  std::vector<double> v(h * w * d);
  for (auto& x : v) x = gen.real(-1.0, 1.0);
  return FeatureMap(h, w, d, std::move(v));
}

ClassifierWeights random_head(oracle::Gen& gen, std::size_t d, std::size_t k) {
  std::vector<double> w(k * d), b(k);
  for (auto& x : w) x = gen.real(-2.0, 2.0);
  for (auto& x : b) x = gen.real(-0.5, 0.5);
  return ClassifierWeights(d, k, std::move(w), std::move(b));
}

// Mean CE over non-255 targets, evaluated in extended precision.
double oracle_masked_ce(const LogitMap& logits, const TriMask& target) {
  long double sum = 0.0L;
  std::size_t n = 0;
  for (std::size_t k = 0; k < target.size(); ++k) {
    if (target[k] == 255) continue;
    const auto row = logits.at(k);
    sum += oracle::cross_entropy(std::vector<long double>(row.begin(), row.end()), target[k]);
    ++n;
  }
  return n == 0 ? 0.0 : static_cast<double>(sum / n);
}

double oracle_distance(std::span<const double> a, std::span<const double> b) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) s += (long double)(a[i] - b[i]) * (a[i] - b[i]);
  return static_cast<double>(std::sqrt(s));
}

}  // namespace

TEST(Softmax, SymmetryAndStability) {
  const auto p = softmax_probs(LogitMap(1, 1, 2, {0.0, 0.0}));
  EXPECT_DOUBLE_EQ(p.at(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(p.at(1, 0), 0.5);
  const auto big = softmax_probs(LogitMap(1, 1, 2, {1000.0, 0.0}));
  EXPECT_NEAR(big.at(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(big.at(1, 0), 0.0, 1e-12);
  EXPECT_TRUE(std::isfinite(big.at(0, 0)));
  EXPECT_THROW(LogitMap(1, 1, 2, {INFINITY, 0.0}), Error);
}

TEST(Softmax, MatchesExtendedPrecisionAndShiftInvariance) {
  oracle::Gen gen(21);
  const auto logits = random_logits(gen, 4, 4, 3);
  const auto p = softmax_probs(logits);
  std::vector<double> shifted(logits.data().begin(), logits.data().end());
  for (auto& x : shifted) x += 7.25;
  const auto q = softmax_probs(LogitMap(4, 4, 3, shifted));
  for (std::size_t k = 0; k < 16; ++k) {
    const auto row = logits.at(k);
    long double z = 0.0L;
    for (double v : row) z += std::exp((long double)v);
    double sum = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      const double expected = static_cast<double>(std::exp((long double)row[c]) / z);
      EXPECT_NEAR(p.at(c, k), expected, 1e-6);
      EXPECT_GT(p.at(c, k), 0.0f);
      EXPECT_LT(p.at(c, k), 1.0f);
      EXPECT_NEAR(p.at(c, k), q.at(c, k), 1e-6);
      sum += p.at(c, k);
    }
    EXPECT_NEAR(sum, 1.0, 1e-6);
  }
}

TEST(MaskedCe, ClosedForms) {
  const TriMask targets(2, 2, {1, 0, 1, 0});
  std::vector<double> perfect;
  for (std::size_t k = 0; k < 4; ++k) {
    perfect.push_back(targets[k] == 0 ? 20.0 : 0.0);
    perfect.push_back(targets[k] == 1 ? 20.0 : 0.0);
  }
  EXPECT_LT(masked_ce(LogitMap(2, 2, 2, perfect), targets).loss, 1e-8);

  const auto ignored = masked_ce(LogitMap(2, 2, 2, perfect), TriMask::filled({2, 2}, 255));
  EXPECT_EQ(ignored.loss, 0.0);
  EXPECT_EQ(ignored.count, 0u);

  const auto uniform = masked_ce(LogitMap(2, 2, 2, std::vector<double>(8, 0.0)), targets);
  EXPECT_NEAR(uniform.loss, std::numbers::ln2, 1e-12);
  EXPECT_EQ(uniform.count, 4u);
}

TEST(MaskedCe, MatchesOracleAndIsNonNegative) {
  oracle::Gen gen(22);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t h = gen.range(1, 6), w = gen.range(1, 6);
    const auto logits = random_logits(gen, h, w, 2);
    const auto target = gen.trimask(h, w);
    const auto r = masked_ce(logits, target);
    EXPECT_NEAR(r.loss, oracle_masked_ce(logits, target), 1e-12);
    EXPECT_GE(r.loss, 0.0);
    EXPECT_EQ(r.count, target.size() - target.count(255));
  }
}

TEST(MaskedCe, TargetOutsideClassRange) {
  EXPECT_THROW(masked_ce(LogitMap(1, 1, 1, {0.0}), TriMask(1, 1, {1})), Error);
}

TEST(SupervisedLoss, BatchMean) {
  oracle::Gen gen(23);
  std::vector<LogitMap> preds;
  std::vector<TriMask> gts;
  double expected = 0.0;
  for (int i = 0; i < 5; ++i) {
    preds.push_back(random_logits(gen, 3, 4, 2));
    gts.push_back(gen.trimask(3, 4, i == 2 ? 1.0 : 0.2));  // one fully ignored image
    expected += oracle_masked_ce(preds.back(), gts.back());
  }
  expected /= 5.0;
  EXPECT_NEAR(supervised_loss(preds, gts).loss, expected, 1e-12);
  EXPECT_EQ(supervised_loss({}, {}).loss, 0.0);
}

TEST(ConsistencyLoss, GatingIsIgnore) {
  oracle::Gen gen(24);
  const auto weak = softmax_probs(random_logits(gen, 8, 8, 2));
  const auto strong = random_logits(gen, 8, 8, 2);
  for (double tau : {0.5, 0.7, 0.95}) {
    std::vector<std::uint8_t> labels(64);
    for (std::size_t k = 0; k < 64; ++k) {
      const float a = weak.at(0, k), b = weak.at(1, k);
      const float best = std::max(a, b);
      labels[k] = best < tau ? 255 : (b > a ? 1 : 0);
    }
    const TriMask gated(8, 8, labels);
    EXPECT_EQ(gated_hard_labels(weak, tau), gated);
    const std::vector<ProbMap> w = {weak};
    const std::vector<LogitMap> s = {strong};
    EXPECT_EQ(consistency_loss(w, s, tau).loss, masked_ce(strong, gated).loss);
  }
  // Nothing passes a gate above every confidence.
  const std::vector<ProbMap> w = {softmax_probs(LogitMap(1, 2, 2, {0.0, 0.1, 0.2, 0.0}))};
  const std::vector<LogitMap> s = {LogitMap(1, 2, 2, {0.0, 0.0, 0.0, 0.0})};
  const auto none = consistency_loss(w, s, 0.95);
  EXPECT_EQ(none.loss, 0.0);
  EXPECT_EQ(none.pixels, 0u);
}

TEST(ApplyHead, Oracles) {
  oracle::Gen gen(25);
  const auto f = random_features(gen, 3, 3, 4);
  const ClassifierWeights identity(4, 4, {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1});
  const auto same = apply_head(f, identity);
  for (std::size_t i = 0; i < f.data().size(); ++i) EXPECT_EQ(same.data()[i], f.data()[i]);

  const ClassifierWeights biased(4, 2, std::vector<double>(8, 0.5), {0.25, -1.5});
  const auto zero = apply_head(FeatureMap(2, 2, 4, std::vector<double>(16, 0.0)), biased);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(zero.at(k)[0], 0.25);
    EXPECT_EQ(zero.at(k)[1], -1.5);
  }

  const auto head = random_head(gen, 4, 2);
  const auto y = apply_head(f, head);
  for (std::size_t k = 0; k < 9; ++k) {
    for (std::size_t c = 0; c < 2; ++c) {
      double dot = head.bias()[c];
      for (std::size_t d = 0; d < 4; ++d) dot += head.weights()[c * 4 + d] * f.at(k)[d];
      EXPECT_NEAR(y.at(k)[c], dot, 1e-12);
    }
  }
  EXPECT_THROW(apply_head(random_features(gen, 1, 1, 3), head), Error);
}

TEST(VlmGuidance, DecomposesIntoSixTerms) {
  oracle::Gen gen(26);
  GuidanceInputs in;
  auto targets = [&] { return GuidanceTargets{gen.trimask(3, 3), gen.trimask(3, 3), gen.trimask(3, 3)}; };
  auto seg = [&] { return SegLogits{random_logits(gen, 3, 3, 2), random_logits(gen, 3, 3, 2)}; };
  for (int i = 0; i < 2; ++i) {
    in.labeled_change.push_back(random_logits(gen, 3, 3, 2));
    in.labeled_seg.push_back(seg());
    in.labeled_targets.push_back(targets());
  }
  for (int i = 0; i < 3; ++i) {
    in.weak_change.push_back(random_logits(gen, 3, 3, 2));
    in.strong_change.push_back(random_logits(gen, 3, 3, 2));
    in.weak_seg.push_back(seg());
    in.strong_seg.push_back(seg());
    in.unlabeled_targets.push_back(targets());
  }
  // Segmentation CE pools both temporals of an image into one mean.
  auto pooled = [](const SegLogits& s, const GuidanceTargets& t) {
    const auto a = masked_ce(s.t1, t.seg_t1), b = masked_ce(s.t2, t.seg_t2);
    const std::size_t n = a.count + b.count;
    return n == 0 ? 0.0 : (a.loss * a.count + b.loss * b.count) / static_cast<double>(n);
  };
  double change = 0.0, segment = 0.0;
  for (int i = 0; i < 2; ++i) {
    change += masked_ce(in.labeled_change[i], in.labeled_targets[i].mix_diff).loss / 2.0;
    segment += pooled(in.labeled_seg[i], in.labeled_targets[i]) / 2.0;
  }
  for (int i = 0; i < 3; ++i) {
    change += masked_ce(in.weak_change[i], in.unlabeled_targets[i].mix_diff).loss / 3.0;
    change += masked_ce(in.strong_change[i], in.unlabeled_targets[i].mix_diff).loss / 3.0;
    segment += pooled(in.weak_seg[i], in.unlabeled_targets[i]) / 3.0;
    segment += pooled(in.strong_seg[i], in.unlabeled_targets[i]) / 3.0;
  }
  const auto out = vlm_guidance_loss(in);
  EXPECT_NEAR(out.change(), change, 1e-12);
  EXPECT_NEAR(out.seg(), segment, 1e-12);
  EXPECT_NEAR(out.total(), change + segment, 1e-12);

  for (auto& t : in.labeled_targets) t = {TriMask::filled({3, 3}, 255), TriMask::filled({3, 3}, 255), TriMask::filled({3, 3}, 255)};
  for (auto& t : in.unlabeled_targets) t = in.labeled_targets[0];
  EXPECT_EQ(vlm_guidance_loss(in).total(), 0.0);
}

TEST(Contrastive, HandExamples) {
  const FeatureMap q1(1, 2, 1, {0.0, 0.0});
  const FeatureMap q2(1, 2, 1, {0.5, 0.4});
  const TriMask y(1, 2, {0, 1});
  EXPECT_NEAR(balanced_contrastive(q1, q2, y, 2.0).loss(), 2.1, 1e-12);

  const FeatureMap far(1, 1, 2, {0.0, 2.1});
  const FeatureMap origin(1, 1, 2, {0.0, 0.0});
  EXPECT_EQ(balanced_contrastive(far, origin, TriMask(1, 1, {1}), 2.0).loss(), 0.0);

  oracle::Gen gen(27);
  const auto f = random_features(gen, 4, 4, 3);
  EXPECT_EQ(balanced_contrastive(f, f, TriMask(4, 4), 2.0).loss(), 0.0);
  EXPECT_THROW(balanced_contrastive(f, random_features(gen, 4, 4, 2), TriMask(4, 4), 2.0), Error);
}

TEST(Contrastive, BatchBalancedAgainstOracle) {
  oracle::Gen gen(28);
  std::vector<FeatureMap> a, b;
  std::vector<TriMask> y;
  for (int i = 0; i < 3; ++i) {
    const std::size_t h = gen.range(1, 5), w = gen.range(1, 5);
    a.push_back(random_features(gen, h, w, 3));
    b.push_back(random_features(gen, h, w, 3));
    y.push_back(gen.trimask(h, w));
  }
  std::vector<ContrastivePair> batch;
  double pull = 0.0, push = 0.0;
  std::size_t nu = 0, nc = 0;
  for (int i = 0; i < 3; ++i) {
    batch.push_back({&a[i], &b[i], &y[i]});
    for (std::size_t k = 0; k < y[i].size(); ++k) {
      const double d = oracle_distance(a[i].at(k), b[i].at(k));
      if (y[i][k] == 0) {
        pull += d;
        ++nu;
      } else if (y[i][k] == 1) {
        push += std::max(0.0, 1.5 - d);
        ++nc;
      }
    }
  }
  const auto r = balanced_contrastive(batch, 1.5);
  EXPECT_EQ(r.n_unchanged, nu);
  EXPECT_EQ(r.n_changed, nc);
  EXPECT_NEAR(r.loss(), (nu ? pull / nu : 0.0) + (nc ? push / nc : 0.0), 1e-12);

  // Duplicating every pair leaves both means unchanged.
  auto doubled = batch;
  doubled.insert(doubled.end(), batch.begin(), batch.end());
  EXPECT_NEAR(balanced_contrastive(doubled, 1.5).unchanged_term, r.unchanged_term, 1e-12);
  EXPECT_NEAR(balanced_contrastive(doubled, 1.5).changed_term, r.changed_term, 1e-12);
}

TEST(Schedule, EndpointsAndMidpoint) {
  LossConfig cfg;
  cfg.total_steps = 200;
  EXPECT_DOUBLE_EQ(lambda_vl_schedule(0, cfg), 0.1);
  EXPECT_DOUBLE_EQ(lambda_vl_schedule(100, cfg), 0.05);
  EXPECT_EQ(lambda_vl_schedule(200, cfg), 0.0);
  EXPECT_THROW(lambda_vl_schedule(201, cfg), Error);
  double previous = 1.0;
  for (std::size_t s = 0; s <= 200; ++s) {
    const double v = lambda_vl_schedule(s, cfg);
    EXPECT_LE(v, previous);
    previous = v;
  }
}

TEST(TotalLoss, WorkedExamples) {
  const LossConfig cfg;
  EXPECT_EQ(total_loss({}, 0, cfg).total, 0.0);
  EXPECT_DOUBLE_EQ(total_loss({1.0, 1.0, 0.0, 0.0}, 0, cfg).total, 1.0);
  const auto r = total_loss({0.4, 0.6, 0.2, 0.3}, 0, cfg);
  EXPECT_NEAR(r.total, 0.55, 1e-12);
  EXPECT_DOUBLE_EQ(r.l_cr, 0.5);
  EXPECT_NEAR(r.total, r.l_cr + r.lambda_vl * r.l_vl + r.lambda_ct * r.l_ct, 1e-12);
  const auto j = to_json(r);
  for (const char* key : {"l_s", "l_u", "l_cr", "l_vl", "l_ct", "total", "lambda_vl", "lambda_ct", "step", "counts"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
}

namespace {

LossBatch random_batch(oracle::Gen& gen, std::size_t d) {
  LossBatch batch;
  auto targets = [&](std::size_t h, std::size_t w) {
    return GuidanceTargets{gen.trimask(h, w), gen.trimask(h, w), gen.trimask(h, w)};
  };
  for (int i = 0; i < 2; ++i) {
    const std::size_t h = gen.range(1, 4), w = gen.range(1, 4);
    batch.labeled.push_back({random_features(gen, h, w, d), random_features(gen, h, w, d),
                             random_features(gen, h, w, d), gen.trimask(h, w), targets(h, w)});
  }
  for (int i = 0; i < 2; ++i) {
    const std::size_t h = gen.range(1, 4), w = gen.range(1, 4);
    batch.unlabeled.push_back({random_features(gen, h, w, d), random_features(gen, h, w, d),
                               random_features(gen, h, w, d), random_features(gen, h, w, d),
                               random_features(gen, h, w, d), random_features(gen, h, w, d), targets(h, w)});
  }
  return batch;
}

}  // namespace

TEST(ComputeLosses, ComposesTermsAndSeparatesHeads) {
  oracle::Gen gen(29);
  LossConfig cfg;
  cfg.tau = 0.6;
  for (int trial = 0; trial < 20; ++trial) {
    const auto batch = random_batch(gen, 3);
    const Heads heads{random_head(gen, 3, 2), random_head(gen, 3, 2), random_head(gen, 3, 2)};
    const auto r = compute_losses(batch, heads, 10, cfg);

    std::vector<LogitMap> sup;
    std::vector<TriMask> gts;
    for (const auto& s : batch.labeled) {
      sup.push_back(apply_head(s.change, heads.cr));
      gts.push_back(s.gt);
    }
    EXPECT_NEAR(r.l_s, supervised_loss(sup, gts).loss, 1e-12);
    EXPECT_NEAR(r.l_cr, 0.5 * (r.l_s + r.l_u), 1e-12);
    EXPECT_NEAR(r.l_vl, r.l_vl_change + r.l_vl_seg, 1e-12);
    EXPECT_NEAR(r.total, r.l_cr + r.lambda_vl * r.l_vl + r.lambda_ct * r.l_ct, 1e-9 * std::max(1.0, r.total));

    const Heads vl_changed{heads.cr, random_head(gen, 3, 2), heads.seg};
    const auto r_vl = compute_losses(batch, vl_changed, 10, cfg);
    EXPECT_EQ(r_vl.l_s, r.l_s);
    EXPECT_EQ(r_vl.l_u, r.l_u);
    EXPECT_EQ(r_vl.l_cr, r.l_cr);

    const Heads cr_changed{random_head(gen, 3, 2), heads.vl, heads.seg};
    const auto r_cr = compute_losses(batch, cr_changed, 10, cfg);
    EXPECT_EQ(r_cr.l_vl_change, r.l_vl_change);
    EXPECT_EQ(r_cr.l_vl_seg, r.l_vl_seg);
  }
}

TEST(ComputeLosses, EmptyBatchIsZero) {
  oracle::Gen gen(30);
  const Heads heads{random_head(gen, 2, 2), random_head(gen, 2, 2), random_head(gen, 2, 2)};
  const auto r = compute_losses({}, heads, 0, {});
  EXPECT_EQ(r.total, 0.0);
}

TEST(LossConfig, Validation) {
  LossConfig cfg;
  cfg.tau = 1.5;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.epsilon = 0.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.lambda_ct = -1.0;
  EXPECT_THROW(cfg.validate(), Error);
}
