#include "ceg/metrics.hpp"

#include <cstdio>
#include <variant>

#include "ceg/parallel.hpp"

namespace ceg {

namespace {

double ratio(std::uint64_t num, std::uint64_t den, bool& degenerate) {
  degenerate = den == 0;
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

std::string_view to_string(EvalMode mode) { return mode == EvalMode::Total ? "total" : "valid"; }

EvalMode eval_mode_from_string(std::string_view name) {
  if (name == "total") return EvalMode::Total;
  if (name == "valid") return EvalMode::Valid;
  throw Error(ErrorCode::InvalidArgument, "unknown eval mode '" + std::string(name) + "'");
}

Confusion confuse(const TriMask& pred, const BinaryMask& gt, EvalMode mode, IgnoreFill fill) {
  require_same_shape(pred.shape(), gt.shape(), "confuse pred/gt");
  const std::uint8_t fill_value = fill == IgnoreFill::Changed ? 1 : 0;
  Confusion c;
  c.total = pred.size();
  for (std::size_t k = 0; k < pred.size(); ++k) {
    std::uint8_t p = pred[k];
    if (p == kIgnore) {
      if (mode == EvalMode::Valid) continue;
      p = fill_value;
    }
    const bool truth = gt[k] != 0;
    if (p) {
      ++(truth ? c.tp : c.fp);
    } else {
      ++(truth ? c.fn : c.tn);
    }
  }
  c.valid = c.tp + c.fp + c.fn + c.tn;
  return c;
}

Confusion confuse(const BinaryMask& pred, const BinaryMask& gt, EvalMode mode) {
  return confuse(to_trimask(pred), gt, mode);
}

MetricsReport metrics_from_confusion(const Confusion& c) {
  MetricsReport m;
  m.iou_c = ratio(c.tp, c.tp + c.fp + c.fn, m.iou_degenerate);
  bool f1_degenerate = false;
  m.f1_c = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn, f1_degenerate);
  m.precision = ratio(c.tp, c.tp + c.fp, m.precision_degenerate);
  m.recall = ratio(c.tp, c.tp + c.fn, m.recall_degenerate);
  m.valid_ratio = ratio(c.valid, c.total, m.valid_degenerate);
  return m;
}

nlohmann::json to_json(const Confusion& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}, {"valid", c.valid}, {"total", c.total}};
}

nlohmann::json to_json(const MetricsReport& m) {
  return {{"iou_c", m.iou_c},
          {"f1_c", m.f1_c},
          {"precision", m.precision},
          {"recall", m.recall},
          {"valid_ratio", m.valid_ratio},
          {"degenerate", m.degenerate()}};
}

std::string format_threshold(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", value);
  return buf;
}

std::string format_number(double value) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6f", value);
  return buf;
}

SweepResult sweep(const Manifest& manifest, const SweepGrid& grid, unsigned threads) {
  if (grid.modes.empty() || grid.gammas.empty() || grid.deltas.empty() || grid.betas.empty()) {
    throw Error(ErrorCode::InvalidArgument, "sweep grid has an empty axis");
  }
  struct Config {
    CegMode mode;
    double gamma, delta, beta;
  };
  std::vector<Config> configs;
  for (auto mode : grid.modes)
    for (double g : grid.gammas)
      for (double d : grid.deltas)
        for (double b : grid.betas) configs.push_back({mode, g, d, b});

  struct PairCounts {
    std::vector<Confusion> total, valid;
  };
  struct Skipped {};
  using Slot = std::variant<Skipped, PairCounts, PairFailure>;
  std::vector<Slot> slots(manifest.pairs.size());

  parallel_for(manifest.pairs.size(), threads, [&](std::size_t i) {
    const auto& entry = manifest.pairs[i];
    if (!entry.gt_change) return;
    try {
      const LoadedPair pair = load_pair(entry);
      PairEvaluator eval(pair, manifest.taxonomy, manifest.defaults.connectivity);
      PairCounts counts;
      for (const auto& cfg : configs) {
        const TriMask pred = eval.change(cfg.mode, cfg.gamma, cfg.delta);
        counts.total.push_back(confuse(pred, *pair.gt_change, EvalMode::Total, grid.fill));
        counts.valid.push_back(confuse(pred, *pair.gt_change, EvalMode::Valid, grid.fill));
      }
      slots[i] = std::move(counts);
    } catch (const std::exception& e) {
      slots[i] = PairFailure{entry.id, e.what()};
    }
  });

  SweepResult result;
  std::vector<Confusion> total(configs.size()), valid(configs.size());
  for (auto& slot : slots) {
    if (auto* counts = std::get_if<PairCounts>(&slot)) {
      for (std::size_t c = 0; c < configs.size(); ++c) {
        total[c] += counts->total[c];
        valid[c] += counts->valid[c];
      }
      ++result.pairs_evaluated;
    } else if (auto* failure = std::get_if<PairFailure>(&slot)) {
      result.failures.push_back(*failure);
    }
  }
  for (std::size_t c = 0; c < configs.size(); ++c) {
    result.rows.push_back({configs[c].mode, configs[c].gamma, configs[c].delta, configs[c].beta,
                           total[c], valid[c], metrics_from_confusion(total[c]),
                           metrics_from_confusion(valid[c])});
  }
  return result;
}

std::string sweep_csv_header() {
  return "mode,gamma,delta,beta,eval_mode,tp,fp,fn,tn,iou_c,f1_c,precision,recall,valid_ratio\n";
}

std::string sweep_csv_row(std::string_view mode, std::string_view gamma, std::string_view delta,
                          std::string_view beta, EvalMode eval_mode, const Confusion& c,
                          const MetricsReport& m) {
  std::string line;
  line.append(mode).append(",").append(gamma).append(",").append(delta).append(",").append(beta);
  line.append(",").append(to_string(eval_mode));
  for (auto v : {c.tp, c.fp, c.fn, c.tn}) line.append(",").append(std::to_string(v));
  for (double v : {m.iou_c, m.f1_c, m.precision, m.recall, m.valid_ratio}) {
    line.append(",").append(format_number(v));
  }
  return line + "\n";
}

std::string sweep_to_csv(const SweepResult& result, const std::vector<EvalMode>& eval_modes) {
  std::string out = sweep_csv_header();
  for (const auto& row : result.rows) {
    for (auto em : eval_modes) {
      const bool valid = em == EvalMode::Valid;
      out += sweep_csv_row(to_string(row.mode), format_threshold(row.gamma),
                           format_threshold(row.delta), format_threshold(row.beta), em,
                           valid ? row.valid : row.total,
                           valid ? row.valid_metrics : row.total_metrics);
    }
  }
  return out;
}

nlohmann::json sweep_to_json(const SweepResult& result) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : result.rows) {
    rows.push_back({{"mode", to_string(row.mode)},
                    {"gamma", row.gamma},
                    {"delta", row.delta},
                    {"beta", row.beta},
                    {"total", {{"confusion", to_json(row.total)}, {"metrics", to_json(row.total_metrics)}}},
                    {"valid", {{"confusion", to_json(row.valid)}, {"metrics", to_json(row.valid_metrics)}}}});
  }
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& f : result.failures) failures.push_back({{"id", f.id}, {"error", f.message}});
  return {{"rows", rows}, {"pairs_evaluated", result.pairs_evaluated}, {"failures", failures}};
}

}  // namespace ceg
