#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ceg/manifest.hpp"
#include "ceg/pipeline.hpp"
#include "ceg/raster.hpp"

namespace ceg {

enum class EvalMode { Total, Valid };

// How total-mode evaluation completes ignored (255) predictions.
enum class IgnoreFill { Unchanged, Changed };

std::string_view to_string(EvalMode mode);
EvalMode eval_mode_from_string(std::string_view name);

/// Change-class pixel counts. tp + fp + fn + tn == valid <= total.
struct Confusion {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;
  std::uint64_t valid = 0;
  std::uint64_t total = 0;

  Confusion& operator+=(const Confusion& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    valid += o.valid;
    total += o.total;
    return *this;
  }
  bool operator==(const Confusion&) const = default;
};

struct MetricsReport {
  double iou_c = 0.0;
  double f1_c = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double valid_ratio = 0.0;
  // Set when a denominator was zero and the metric was reported as 0.
  bool iou_degenerate = false;
  bool precision_degenerate = false;
  bool recall_degenerate = false;
  bool valid_degenerate = false;

  bool degenerate() const {
    return iou_degenerate || precision_degenerate || recall_degenerate || valid_degenerate;
  }
};

// Valid mode drops pixels predicted 255; total mode scores every pixel and
// completes 255 according to `fill`.
Confusion confuse(const TriMask& pred, const BinaryMask& gt, EvalMode mode,
                  IgnoreFill fill = IgnoreFill::Unchanged);
Confusion confuse(const BinaryMask& pred, const BinaryMask& gt, EvalMode mode);

MetricsReport metrics_from_confusion(const Confusion& c);

nlohmann::json to_json(const Confusion& c);
nlohmann::json to_json(const MetricsReport& m);

struct SweepGrid {
  std::vector<CegMode> modes;
  std::vector<double> gammas;
  std::vector<double> deltas;
  std::vector<double> betas;
  IgnoreFill fill = IgnoreFill::Unchanged;
};

struct SweepRow {
  CegMode mode;
  double gamma;
  double delta;
  double beta;
  Confusion total;
  Confusion valid;
  MetricsReport total_metrics;
  MetricsReport valid_metrics;
};

struct PairFailure {
  std::string id;
  std::string message;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<PairFailure> failures;
  std::size_t pairs_evaluated = 0;
};

/// Micro-averaged evaluation of every grid configuration over the manifest
/// pairs that carry a ground-truth change mask. Rows follow the grid order
/// (mode, gamma, delta, beta). Pairs that fail to load are reported and
/// skipped.
SweepResult sweep(const Manifest& manifest, const SweepGrid& grid, unsigned threads = 1);

// CSV with the columns mode, gamma, delta, beta, eval_mode, tp, fp, fn, tn,
// iou_c, f1_c, precision, recall, valid_ratio.
std::string sweep_csv_header();
std::string sweep_csv_row(std::string_view mode, std::string_view gamma, std::string_view delta,
                          std::string_view beta, EvalMode eval_mode, const Confusion& c,
                          const MetricsReport& m);
std::string sweep_to_csv(const SweepResult& result, const std::vector<EvalMode>& eval_modes);
nlohmann::json sweep_to_json(const SweepResult& result);

// Fixed-point formatting shared by every CSV writer.
std::string format_number(double value);
// Shortest "%g" form used for threshold columns.
std::string format_threshold(double value);

}  // namespace ceg
