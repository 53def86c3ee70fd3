#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "ceg/io.hpp"
#include "ceg/manifest.hpp"
#include "ceg/metrics.hpp"
#include "ceg/parallel.hpp"
#include "ceg/pipeline.hpp"
#include "ceg/synthgen.hpp"
#include "fixture.hpp"

namespace ceg::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Thrown for flag combinations CLI11 cannot express.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::optional<unsigned> threads_flag(const CLI::Option* opt, unsigned value) {
  if (opt->count() == 0) return std::nullopt;
  return value;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

// ---------------------------------------------------------------- pixel/instance/mixed

struct CegArgs {
  std::string manifest;
  std::string out;
  double gamma = 0.8;
  double delta = 0.0;
  double beta = 0.8;
  int connectivity = 8;
  unsigned threads = 1;
  CLI::Option* gamma_opt = nullptr;
  CLI::Option* delta_opt = nullptr;
  CLI::Option* beta_opt = nullptr;
  CLI::Option* conn_opt = nullptr;
  CLI::Option* threads_opt = nullptr;
};

CLI::App* add_ceg_command(CLI::App& app, const std::string& name, const std::string& help, CegArgs& a) {
  auto* sub = app.add_subcommand(name, help);
  sub->add_option("--manifest", a.manifest, "Manifest JSON")->required();
  sub->add_option("--out", a.out, "Output directory")->required();
  a.gamma_opt = sub->add_option("--gamma", a.gamma, "Reliability threshold")->check(CLI::Range(0.0, 1.0));
  a.delta_opt = sub->add_option("--delta", a.delta, "Instance change threshold")
                    ->check(CLI::NonNegativeNumber);
  a.beta_opt = sub->add_option("--beta", a.beta, "Segmentation confidence threshold")->check(CLI::Range(0.0, 1.0));
  a.conn_opt = sub->add_option("--connectivity", a.connectivity, "4 or 8")->check(CLI::IsMember({4, 8}));
  a.threads_opt = sub->add_option("--threads", a.threads, "Worker threads")->check(CLI::PositiveNumber);
  return sub;
}

int cmd_ceg(CegMode mode, const CegArgs& a, std::ostream& out, std::ostream& err) {
  Manifest manifest;
  try {
    manifest = load_manifest(a.manifest);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
  Thresholds t = manifest.defaults;
  if (a.gamma_opt->count()) t.gamma = a.gamma;
  if (a.delta_opt->count()) t.delta = a.delta;
  if (a.beta_opt->count()) t.beta = a.beta;
  if (a.conn_opt->count()) t.connectivity = connectivity_from_int(a.connectivity);

  const fs::path out_dir(a.out);
  fs::create_directories(out_dir);
  const std::string suffix(output_suffix(mode));

  std::vector<json> status(manifest.pairs.size());
  parallel_for(manifest.pairs.size(), resolve_threads(threads_flag(a.threads_opt, a.threads)),
               [&](std::size_t i) {
                 const auto& entry = manifest.pairs[i];
                 try {
                   const LoadedPair pair = load_pair(entry);
                   PairEvaluator eval(pair, manifest.taxonomy, t.connectivity);
                   const PairOutputs o = eval.outputs(mode, t);
                   const std::string change = entry.id + "." + suffix + ".pgm";
                   const std::string seg1 = entry.id + ".seg_t1.pgm";
                   const std::string seg2 = entry.id + ".seg_t2.pgm";
                   write_mask(out_dir / change, o.change);
                   write_mask(out_dir / seg1, o.seg_t1);
                   write_mask(out_dir / seg2, o.seg_t2);
                   status[i] = {{"id", entry.id},
                                {"status", "ok"},
                                {"change", change},
                                {"seg_t1", seg1},
                                {"seg_t2", seg2},
                                {"changed_pixels", o.change.count(1)},
                                {"ignored_pixels", o.change.count(kIgnore)}};
                 } catch (const std::exception& e) {
                   status[i] = {{"id", entry.id}, {"status", "error"}, {"error", e.what()}};
                 }
               });

  std::size_t failed = 0;
  json pairs = json::array();
  for (auto& s : status) {
    if (s["status"] == "error") {
      ++failed;
      err << "error: pair '" << s["id"].get<std::string>() << "': " << s["error"].get<std::string>() << "\n";
    }
    pairs.push_back(std::move(s));
  }
  const json summary = {{"command", to_string(mode)},
                        {"thresholds",
                         {{"gamma", t.gamma},
                          {"delta", t.delta},
                          {"beta", t.beta},
                          {"connectivity", static_cast<int>(t.connectivity)}}},
                        {"pairs", pairs},
                        {"succeeded", manifest.pairs.size() - failed},
                        {"failed", failed}};
  write_json(out_dir / "summary.json", summary);
  out << "processed " << manifest.pairs.size() << " pairs, " << failed << " failed\n";
  return failed ? kExitPartial : kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string pred_dir;
  std::string manifest;
  std::string suffix = "mix";
  std::string mode = "valid";
  std::string fill = "unchanged";
  std::string csv;
  unsigned threads = 1;
  CLI::Option* threads_opt = nullptr;
};

std::string mode_for_suffix(const std::string& suffix) {
  if (suffix == "pixel") return "pixel";
  if (suffix == "ins") return "instance";
  return "mixed";
}

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  Manifest manifest;
  try {
    manifest = load_manifest(a.manifest);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
  const fs::path pred_dir(a.pred_dir);
  std::vector<const PairEntry*> scored;
  for (const auto& p : manifest.pairs) {
    if (!p.gt_change) continue;
    const fs::path pred = pred_dir / (p.id + "." + a.suffix + ".pgm");
    if (!fs::exists(pred)) {
      err << "error: " << Error(ErrorCode::MissingPrediction, "no prediction for pair '" + p.id + "' (" +
                                                                  pred.string() + ")")
                              .what()
          << "\n";
      return kExitInput;
    }
    scored.push_back(&p);
  }

  const EvalMode mode = eval_mode_from_string(a.mode);
  const IgnoreFill fill = a.fill == "changed" ? IgnoreFill::Changed : IgnoreFill::Unchanged;
  std::vector<std::optional<Confusion>> counts(scored.size());
  std::vector<std::string> errors(scored.size());
  parallel_for(scored.size(), resolve_threads(threads_flag(a.threads_opt, a.threads)), [&](std::size_t i) {
    const auto& p = *scored[i];
    try {
      const TriMask pred = read_trimask(pred_dir / (p.id + "." + a.suffix + ".pgm"));
      const BinaryMask gt = read_binary_mask(*p.gt_change);
      counts[i] = confuse(pred, gt, mode, fill);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  Confusion total;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    if (!counts[i]) {
      err << "error: pair '" << scored[i]->id << "': " << errors[i] << "\n";
      return kExitInput;
    }
    total += *counts[i];
  }
  const MetricsReport report = metrics_from_confusion(total);
  const json result = {{"eval_mode", to_string(mode)},
                       {"suffix", a.suffix},
                       {"pairs", scored.size()},
                       {"confusion", to_json(total)},
                       {"metrics", to_json(report)}};
  out << result.dump(2) << "\n";

  if (!a.csv.empty()) {
    std::string mode_name = mode_for_suffix(a.suffix);
    std::string gamma, delta, beta;
    const fs::path summary_path = pred_dir / "summary.json";
    if (fs::exists(summary_path)) {
      try {
        const auto bytes = read_file(summary_path);
        const json summary = json::parse(bytes);
        mode_name = summary.value("command", mode_name);
        const auto& th = summary.at("thresholds");
        gamma = format_threshold(th.at("gamma").get<double>());
        delta = format_threshold(th.at("delta").get<double>());
        beta = format_threshold(th.at("beta").get<double>());
      } catch (const std::exception& e) {
        err << "warning: ignoring unreadable " << summary_path.string() << ": " << e.what() << "\n";
      }
    }
    write_text(a.csv, sweep_csv_header() + sweep_csv_row(mode_name, gamma, delta, beta, mode, total, report));
  }
  return kExitOk;
}

// ---------------------------------------------------------------- sweep

struct SweepArgs {
  std::string manifest;
  std::vector<std::string> modes = {"mixed"};
  std::vector<double> gammas, deltas, betas;
  std::string eval_mode = "valid";
  std::string fill = "unchanged";
  std::string csv;
  std::string json_path;
  unsigned threads = 1;
  CLI::Option* gammas_opt = nullptr;
  CLI::Option* deltas_opt = nullptr;
  CLI::Option* betas_opt = nullptr;
  CLI::Option* threads_opt = nullptr;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out, std::ostream& err) {
  if (!a.gammas_opt->count() && !a.deltas_opt->count() && !a.betas_opt->count()) {
    throw UsageError("sweep needs at least one of --gammas, --deltas, --betas");
  }
  Manifest manifest;
  try {
    manifest = load_manifest(a.manifest);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
  SweepGrid grid;
  for (const auto& m : a.modes) grid.modes.push_back(ceg_mode_from_string(m));
  for (const CLI::Option* opt : {a.gammas_opt, a.deltas_opt, a.betas_opt}) {
    for (const auto& raw : opt->results()) {
      if (raw.empty()) throw UsageError(opt->get_name() + " has an empty entry");
    }
  }
  grid.gammas = a.gammas_opt->count() ? a.gammas : std::vector<double>{manifest.defaults.gamma};
  grid.deltas = a.deltas_opt->count() ? a.deltas : std::vector<double>{manifest.defaults.delta};
  grid.betas = a.betas_opt->count() ? a.betas : std::vector<double>{manifest.defaults.beta};
  grid.fill = a.fill == "changed" ? IgnoreFill::Changed : IgnoreFill::Unchanged;
  if (grid.modes.empty() || grid.gammas.empty() || grid.deltas.empty() || grid.betas.empty()) {
    throw UsageError("sweep grid has an empty axis");
  }

  const SweepResult result = sweep(manifest, grid, resolve_threads(threads_flag(a.threads_opt, a.threads)));
  std::vector<EvalMode> modes;
  if (a.eval_mode == "both") {
    modes = {EvalMode::Total, EvalMode::Valid};
  } else {
    modes = {eval_mode_from_string(a.eval_mode)};
  }
  const std::string csv = sweep_to_csv(result, modes);
  if (a.csv.empty()) {
    out << csv;
  } else {
    write_text(a.csv, csv);
  }
  if (!a.json_path.empty()) write_json(a.json_path, sweep_to_json(result));
  for (const auto& f : result.failures) err << "error: pair '" << f.id << "': " << f.message << "\n";
  return result.failures.empty() ? kExitOk : kExitPartial;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  SceneParams params;
  std::string out;
  std::size_t count = 1;
  unsigned threads = 1;
  CLI::Option* threads_opt = nullptr;
};

CLI::App* add_synth_command(CLI::App& app, SynthArgs& a) {
  auto* sub = app.add_subcommand("synth", "Generate seeded synthetic scenes with a manifest");
  auto& p = a.params;
  sub->add_option("--out", a.out, "Output directory")->required();
  sub->add_option("--count", a.count, "Number of scenes (seeds seed .. seed+count-1)")
      ->check(CLI::PositiveNumber);
  sub->add_option("--seed", p.seed);
  sub->add_option("--height", p.height);
  sub->add_option("--width", p.width);
  sub->add_option("--n-shared", p.n_shared);
  sub->add_option("--n-appear", p.n_appear);
  sub->add_option("--n-disappear", p.n_disappear);
  sub->add_option("--min-size", p.min_size);
  sub->add_option("--max-size", p.max_size);
  sub->add_option("--jitter", p.jitter);
  sub->add_option("--confidence-mean", p.confidence_mean);
  sub->add_option("--confidence-noise", p.confidence_noise);
  sub->add_option("--edge-confidence", p.edge_confidence);
  sub->add_option("--edge-band", p.edge_band);
  sub->add_option("--notch-probability", p.notch_probability);
  sub->add_option("--clutter-max", p.clutter_max);
  sub->add_option("--background-tile", p.background_tile);
  a.threads_opt = sub->add_option("--threads", a.threads, "Worker threads")->check(CLI::PositiveNumber);
  return sub;
}

std::string scene_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%04zu", i);
  return buf;
}

int cmd_synth(const SynthArgs& a, std::ostream& out, std::ostream& err) {
  try {
    a.params.validate();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
  const fs::path out_dir(a.out);
  fs::create_directories(out_dir);
  std::vector<std::string> errors(a.count);
  parallel_for(a.count, resolve_threads(threads_flag(a.threads_opt, a.threads)), [&](std::size_t i) {
    SceneParams p = a.params;
    p.seed = a.params.seed + i;
    try {
      write_scene(out_dir / scene_name(i), p, generate(p));
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  json pairs = json::array();
  std::size_t failed = 0;
  for (std::size_t i = 0; i < a.count; ++i) {
    const std::string name = scene_name(i);
    if (!errors[i].empty()) {
      ++failed;
      err << "error: " << name << ": " << errors[i] << "\n";
      continue;
    }
    pairs.push_back({{"id", name},
                     {"probmap_t1", name + "/t1.cpm"},
                     {"probmap_t2", name + "/t2.cpm"},
                     {"instances_t1", name + "/instances_t1.pgm"},
                     {"instances_t2", name + "/instances_t2.pgm"},
                     {"gt_change", name + "/gt_change.pgm"}});
  }
  const Thresholds defaults;
  write_json(out_dir / "manifest.json",
             {{"taxonomy", taxonomy_to_json(a.params.taxonomy())},
              {"defaults",
               {{"gamma", defaults.gamma},
                {"delta", defaults.delta},
                {"beta", defaults.beta},
                {"connectivity", static_cast<int>(defaults.connectivity)}}},
              {"pairs", pairs}});
  out << "wrote " << (a.count - failed) << " scenes to " << out_dir.string() << "\n";
  if (failed == a.count) return kExitInput;
  return failed ? kExitPartial : kExitOk;
}

// ---------------------------------------------------------------- loss

struct LossArgs {
  std::string fixture;
  std::string out;
};

int cmd_loss(const LossArgs& a, std::ostream& out, std::ostream& err) {
  try {
    json fixture;
    try {
      fixture = json::parse(read_file(a.fixture));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::FixtureError, a.fixture + ": " + e.what());
    }
    const LossReport report = evaluate_loss_fixture(fixture, fs::path(a.fixture).parent_path());
    const std::string text = to_json(report).dump(2) + "\n";
    if (a.out.empty()) {
      out << text;
    } else {
      write_text(a.out, text);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Change-event pseudo labels, losses and metrics for bi-temporal change detection", "ceg");
  app.require_subcommand(1);

  CegArgs pixel_args, instance_args, mixed_args;
  auto* pixel = add_ceg_command(app, "pixel", "Pixel-level change events", pixel_args);
  auto* instance = add_ceg_command(app, "instance", "Instance-level change events", instance_args);
  auto* mixed = add_ceg_command(app, "mixed", "Mixed pixel/instance change events", mixed_args);

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Score predicted change masks against ground truth");
  eval->add_option("--pred-dir", eval_args.pred_dir, "Directory with {id}.{suffix}.pgm")->required();
  eval->add_option("--manifest", eval_args.manifest, "Manifest JSON")->required();
  eval->add_option("--suffix", eval_args.suffix, "Prediction suffix")->check(CLI::IsMember({"mix", "pixel", "ins"}));
  eval->add_option("--mode", eval_args.mode, "total or valid")->check(CLI::IsMember({"total", "valid"}));
  eval->add_option("--fill", eval_args.fill, "Total-mode value for 255 predictions")
      ->check(CLI::IsMember({"unchanged", "changed"}));
  eval->add_option("--csv", eval_args.csv, "Also write a one-row CSV");
  eval_args.threads_opt = eval->add_option("--threads", eval_args.threads)->check(CLI::PositiveNumber);

  SweepArgs sweep_args;
  auto* sweep_cmd = app.add_subcommand("sweep", "Evaluate a threshold grid");
  sweep_cmd->add_option("--manifest", sweep_args.manifest, "Manifest JSON")->required();
  sweep_cmd->add_option("--modes", sweep_args.modes, "CEG modes")
      ->delimiter(',')
      ->check(CLI::IsMember({"pixel", "instance", "mixed"}));
  sweep_args.gammas_opt = sweep_cmd->add_option("--gammas", sweep_args.gammas)->delimiter(',');
  sweep_args.deltas_opt = sweep_cmd->add_option("--deltas", sweep_args.deltas)->delimiter(',');
  sweep_args.betas_opt = sweep_cmd->add_option("--betas", sweep_args.betas)->delimiter(',');
  sweep_cmd->add_option("--eval-mode", sweep_args.eval_mode, "total, valid or both")
      ->check(CLI::IsMember({"total", "valid", "both"}));
  sweep_cmd->add_option("--fill", sweep_args.fill)->check(CLI::IsMember({"unchanged", "changed"}));
  sweep_cmd->add_option("--csv", sweep_args.csv, "CSV output path (default stdout)");
  sweep_cmd->add_option("--json", sweep_args.json_path, "Also write the full result as JSON");
  sweep_args.threads_opt = sweep_cmd->add_option("--threads", sweep_args.threads)->check(CLI::PositiveNumber);

  SynthArgs synth_args;
  auto* synth = add_synth_command(app, synth_args);

  LossArgs loss_args;
  auto* loss = app.add_subcommand("loss", "Evaluate the training loss on a fixture");
  loss->add_option("--fixture", loss_args.fixture, "Fixture JSON")->required();
  loss->add_option("--out", loss_args.out, "Write the report here instead of stdout");

  std::vector<std::string> reversed(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(reversed.begin(), reversed.end());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (pixel->parsed()) return cmd_ceg(CegMode::Pixel, pixel_args, out, err);
    if (instance->parsed()) return cmd_ceg(CegMode::Instance, instance_args, out, err);
    if (mixed->parsed()) return cmd_ceg(CegMode::Mixed, mixed_args, out, err);
    if (eval->parsed()) return cmd_eval(eval_args, out, err);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_args, out, err);
    if (synth->parsed()) return cmd_synth(synth_args, out, err);
    if (loss->parsed()) return cmd_loss(loss_args, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitUsage;
}

}  // namespace ceg::cli
