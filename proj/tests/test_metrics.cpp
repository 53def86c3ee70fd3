#include <gtest/gtest.h>

#include <filesystem>

#include "ceg/io.hpp"
#include "ceg/metrics.hpp"
#include "ceg/synthgen.hpp"
#include "oracles.hpp"

using namespace ceg;
namespace fs = std::filesystem;

namespace {

Confusion counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, std::uint64_t tn) {
  Confusion c;
  c.tp = tp;
  c.fp = fp;
  c.fn = fn;
  c.tn = tn;
  c.valid = c.total = tp + fp + fn + tn;
  return c;
}

Manifest synthetic_manifest(const std::string& name, std::size_t scenes, std::size_t jitter) {
  const auto dir = fs::temp_directory_path() / ("ceg_test_" + name);
  fs::remove_all(dir);
  Manifest m;
  for (std::size_t i = 0; i < scenes; ++i) {
    SceneParams p;
    p.seed = 100 + i;
    p.height = p.width = 40;
    p.n_shared = 2;
    p.jitter = jitter;
    p.min_size = 6;
    p.max_size = 10;
    const auto scene = dir / ("s" + std::to_string(i));
    write_scene(scene, p, generate(p));
    m.pairs.push_back({"s" + std::to_string(i), scene / "t1.cpm", scene / "t2.cpm", scene / "instances_t1.pgm",
                       scene / "instances_t2.pgm", scene / "gt_change.pgm"});
  }
  return m;
}

}  // namespace

TEST(Confuse, PerfectPrediction) {
  oracle::Gen gen(41);
  const auto gt = gen.binary(8, 8, 0.3);
  const auto c = confuse(gt, gt, EvalMode::Valid);
  EXPECT_EQ(c.fp, 0u);
  EXPECT_EQ(c.fn, 0u);
  EXPECT_EQ(c.tp, gt.count(1));
}

TEST(Confuse, AllIgnoredIsDegenerate) {
  const auto c = confuse(TriMask::filled({4, 4}, 255), BinaryMask(4, 4), EvalMode::Valid);
  EXPECT_EQ(c.valid, 0u);
  EXPECT_EQ(c.total, 16u);
  const auto m = metrics_from_confusion(c);
  EXPECT_TRUE(m.degenerate());
  EXPECT_EQ(m.iou_c, 0.0);
  EXPECT_EQ(m.valid_ratio, 0.0);
  EXPECT_TRUE(m.iou_degenerate);
  EXPECT_FALSE(m.valid_degenerate);
}

TEST(Confuse, MatchesPixelLoopInBothModes) {
  oracle::Gen gen(42);
  for (int trial = 0; trial < 50; ++trial) {
    const auto pred = gen.trimask(16, 16, 0.3);
    const auto gt = gen.binary(16, 16, 0.4);
    for (auto fill : {IgnoreFill::Unchanged, IgnoreFill::Changed}) {
      Confusion total, valid;
      total.total = valid.total = 256;
      for (std::size_t k = 0; k < 256; ++k) {
        const int p = pred[k];
        auto bump = [&](Confusion& c, int v) {
          if (v == 1 && gt[k]) ++c.tp;
          if (v == 1 && !gt[k]) ++c.fp;
          if (v == 0 && gt[k]) ++c.fn;
          if (v == 0 && !gt[k]) ++c.tn;
          ++c.valid;
        };
        if (p != 255) bump(valid, p);
        bump(total, p == 255 ? (fill == IgnoreFill::Changed ? 1 : 0) : p);
      }
      EXPECT_EQ(confuse(pred, gt, EvalMode::Valid, fill), valid);
      EXPECT_EQ(confuse(pred, gt, EvalMode::Total, fill), total);
    }
  }
}

TEST(Metrics, HandArithmetic) {
  const auto one = metrics_from_confusion(counts(1, 0, 0, 0));
  EXPECT_EQ(one.iou_c, 1.0);
  EXPECT_EQ(one.f1_c, 1.0);
  EXPECT_EQ(one.precision, 1.0);
  EXPECT_EQ(one.recall, 1.0);

  const auto m = metrics_from_confusion(counts(50, 25, 25, 0));
  EXPECT_DOUBLE_EQ(m.iou_c, 0.5);
  EXPECT_NEAR(m.f1_c, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(m.precision, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(m.recall, 2.0 / 3.0, 1e-12);
}

TEST(Metrics, F1IouIdentity) {
  oracle::Gen gen(43);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto m = metrics_from_confusion(counts(gen.index(100), gen.index(100), gen.index(100), gen.index(100)));
    if (m.iou_degenerate) continue;
    EXPECT_NEAR(m.f1_c, 2.0 * m.iou_c / (1.0 + m.iou_c), 1e-9);
  }
}

TEST(Metrics, ValidEqualsTotalWithoutIgnore) {
  oracle::Gen gen(44);
  const auto pred = gen.binary(10, 10, 0.5);
  const auto gt = gen.binary(10, 10, 0.5);
  EXPECT_EQ(confuse(pred, gt, EvalMode::Valid), confuse(pred, gt, EvalMode::Total));
}

TEST(Csv, FormattingAndHeader) {
  EXPECT_EQ(sweep_csv_header(), "mode,gamma,delta,beta,eval_mode,tp,fp,fn,tn,iou_c,f1_c,precision,recall,valid_ratio\n");
  const auto c = counts(50, 25, 25, 0);
  EXPECT_EQ(sweep_csv_row("mixed", "0.8", "0", "0.8", EvalMode::Valid, c, metrics_from_confusion(c)),
            "mixed,0.8,0,0.8,valid,50,25,25,0,0.500000,0.666667,0.666667,0.666667,1.000000\n");
  EXPECT_EQ(format_threshold(0.1), "0.1");
  EXPECT_EQ(format_threshold(0.0), "0");
}

TEST(Sweep, GridOrderAdditivityAndThreadIndependence) {
  const auto manifest = synthetic_manifest("sweep", 4, 2);
  SweepGrid grid{{CegMode::Pixel, CegMode::Mixed}, {0.1, 0.5, 0.8}, {0.0, 0.5}, {0.8}, IgnoreFill::Unchanged};
  const auto result = sweep(manifest, grid, 1);
  ASSERT_EQ(result.rows.size(), 2u * 3u * 2u);
  EXPECT_EQ(result.pairs_evaluated, 4u);
  EXPECT_TRUE(result.failures.empty());
  EXPECT_EQ(result.rows[0].mode, CegMode::Pixel);
  EXPECT_EQ(result.rows[1].delta, 0.5);
  EXPECT_EQ(result.rows[2].gamma, 0.5);
  EXPECT_EQ(result.rows[6].mode, CegMode::Mixed);

  // Micro averaging: the pooled counts are the sums of per-pair counts.
  for (std::size_t r = 0; r < result.rows.size(); ++r) {
    const auto& row = result.rows[r];
    Confusion total, valid;
    for (const auto& entry : manifest.pairs) {
      const auto pair = load_pair(entry);
      PairEvaluator eval(pair, manifest.taxonomy, Connectivity::Eight);
      const auto pred = eval.change(row.mode, row.gamma, row.delta);
      total += confuse(pred, *pair.gt_change, EvalMode::Total);
      valid += confuse(pred, *pair.gt_change, EvalMode::Valid);
    }
    EXPECT_EQ(row.total, total);
    EXPECT_EQ(row.valid, valid);
  }

  const auto threaded = sweep(manifest, grid, 4);
  EXPECT_EQ(sweep_to_csv(threaded, {EvalMode::Total, EvalMode::Valid}),
            sweep_to_csv(result, {EvalMode::Total, EvalMode::Valid}));
}

TEST(Sweep, ValidRatioFallsWithGamma) {
  const auto manifest = synthetic_manifest("sweep_gamma", 3, 1);
  SweepGrid grid{{CegMode::Mixed}, {0.1, 0.5, 0.8}, {0.0}, {0.8}, IgnoreFill::Unchanged};
  const auto result = sweep(manifest, grid);
  ASSERT_EQ(result.rows.size(), 3u);
  EXPECT_GE(result.rows[0].valid_metrics.valid_ratio, result.rows[1].valid_metrics.valid_ratio);
  EXPECT_GE(result.rows[1].valid_metrics.valid_ratio, result.rows[2].valid_metrics.valid_ratio);
}

TEST(Sweep, EmptyAxisRejected) {
  Manifest m;
  EXPECT_THROW(sweep(m, {{CegMode::Mixed}, {}, {0.0}, {0.8}, IgnoreFill::Unchanged}), Error);
}
