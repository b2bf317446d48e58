#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "fromage/checkpoint.hpp"
#include "fromage/csv.hpp"
#include "fromage/experiments.hpp"

#ifndef FROMAGE_BUILD_ID
#define FROMAGE_BUILD_ID "unknown"
#endif

namespace fromage {

namespace fs = std::filesystem;
using nlohmann::json;

std::string build_id() { return FROMAGE_BUILD_ID; }

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y%m%dT%H%M%SZ");
  return out.str();
}

std::string hex64(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << v;
  return out.str();
}

// Shared bookkeeping for one command invocation.
class Run {
 public:
  Run(const Config& config, const fs::path& out, const std::string& command)
      : dir_(make_run_dir(out, command, config.get_string("label", ""))),
        start_(std::chrono::steady_clock::now()) {
    summary_["command"] = command;
    summary_["run_dir"] = dir_.filename().string();
    summary_["seed"] = config.get_u64("seed", 0);
    summary_["config_hash"] = hex64(config.hash());
    summary_["build_id"] = build_id();
    summary_["config"] = config.entries();
    summary_["metadata"]["pixel_scaling"] = "[0, 1]";
    summary_["metadata"]["bias"] = false;
  }

  const fs::path& dir() const { return dir_; }
  json& summary() { return summary_; }

  void finish(std::ostream& log) {
    summary_["wall_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::ofstream out(dir_ / "summary.json");
    out << summary_.dump(2) << '\n';
    log << "outputs in " << dir_.string() << '\n';
  }

 private:
  fs::path dir_;
  std::chrono::steady_clock::time_point start_;
  json summary_;
};

void record_model(json& meta, const MlpConfig& model) {
  meta["widths"] = model.widths;
  meta["nonlinearity"] = model.nonlinearity.name();
  meta["final_nonlinearity"] = model.final_nonlinearity;
  meta["init"] = to_string(model.init);
  meta["init_scale"] = model.init_scale;
}

std::string padded(std::uint64_t v, int width) {
  std::ostringstream out;
  out << std::setw(width) << std::setfill('0') << v;
  return out.str();
}

}  // namespace

fs::path make_run_dir(const fs::path& out, const std::string& command, const std::string& label) {
  const fs::path parent = out / command;
  fs::create_directories(parent);
  if (!label.empty()) {
    const fs::path dir = parent / label;
    if (fs::exists(dir))
      throw std::runtime_error("output directory " + dir.string() +
                               " already exists; choose another label");
    fs::create_directory(dir);
    return dir;
  }
  const std::string stamp = utc_timestamp();
  fs::path dir = parent / stamp;
  for (int suffix = 2; !fs::create_directory(dir); ++suffix)
    dir = parent / (stamp + "-" + std::to_string(suffix));
  return dir;
}

// ---------------------------------------------------------------------------

int cmd_train(const Config& config, const fs::path& out, std::ostream& log) {
  const std::uint64_t seed = config.get_u64("seed", 0);
  const Dataset data = load_dataset(data_settings_from(config), seed);
  const TrainSettings settings = train_settings_from(config, data);
  Run run(config, out, "train");
  record_model(run.summary()["metadata"], settings.model);
  run.summary()["metadata"]["examples"] = data.size();

  const fs::path ckpt = run.dir() / "checkpoints";
  fs::create_directories(ckpt);
  const Mlp initial = Mlp::initialize(settings.model);
  save_checkpoint(initial, ckpt / "initial.frmg");

  TrainHooks hooks;
  hooks.snapshot_steps = settings.checkpoint_steps;
  hooks.snapshot_epochs = settings.checkpoint_epochs;
  hooks.progress = &log;
  hooks.on_snapshot = [&](std::uint64_t step, int epoch, bool epoch_end, const Mlp& net) {
    const std::string name = epoch_end ? "epoch_" + padded(static_cast<std::uint64_t>(epoch), 4)
                                       : "step_" + padded(step, 7);
    save_checkpoint(net, ckpt / (name + ".frmg"));
  };
  log << "train: " << data.size() << " examples, depth " << settings.model.depth() << ", "
      << to_string(settings.optimizer) << " eta " << settings.eta << '\n';
  const TrainResult result = train(settings, data, initial, hooks);

  const std::size_t depth = settings.model.depth();
  std::vector<std::string> header{"epoch", "step", "eta", "train_loss", "train_accuracy",
                                  "diverged"};
  for (std::size_t k = 1; k <= depth; ++k) header.push_back("weight_norm_" + std::to_string(k));
  for (std::size_t k = 1; k <= depth; ++k) header.push_back("rel_update_" + std::to_string(k));
  CsvWriter csv(run.dir() / "train.csv", header);
  CsvWriter timing(run.dir() / "timing.csv", {"epoch", "wall_seconds"});
  for (const EpochRecord& row : result.epochs) {
    csv.cell(row.epoch).cell(row.step).cell(row.eta).cell(row.train_loss)
        .cell(row.train_accuracy).cell(row.diverged);
    for (double v : row.weight_norms) csv.cell(v);
    for (double v : row.relative_updates) csv.cell(v);
    csv.end_row();
    timing.cell(row.epoch).cell(row.wall_seconds).end_row();
  }
  if (!result.diverged) save_checkpoint(result.net, ckpt / "final.frmg");

  json& r = run.summary()["results"];
  r["final_loss"] = result.final_loss;
  r["final_accuracy"] = result.final_accuracy;
  r["steps"] = result.steps;
  r["diverged"] = result.diverged;
  r["divergence_reason"] = result.divergence_reason;
  r["weight_floor_hits"] = result.weight_floor_hits;
  log << "final train loss " << result.final_loss << ", accuracy " << result.final_accuracy
      << '\n';
  if (result.diverged) log << "diverged: " << result.divergence_reason << '\n';
  run.finish(log);
  return result.diverged ? kExitDiverged : kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_perturb_sweep(const Config& config, const fs::path& out, std::ostream& log) {
  const std::uint64_t seed = config.get_u64("seed", 0);
  const Dataset data = load_dataset(data_settings_from(config), seed);
  const TrainSettings settings = train_settings_from(config, data);
  const std::vector<double> etas = config.get_doubles(
      "perturb_sweep.etas", {0.0, 0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1});
  const std::vector<fs::path> given = config.get_paths("perturb_sweep.checkpoints");
  Run run(config, out, "perturb-sweep");
  record_model(run.summary()["metadata"], settings.model);
  run.summary()["metadata"]["examples"] = data.size();
  run.summary()["metadata"]["etas"] = etas;

  CsvWriter csv(run.dir() / "perturb.csv", {"checkpoint", "epoch", "step", "eta", "loss",
                                            "baseline_loss", "grad_change_layer1"});
  auto write_curve = [&](const std::string& name, std::optional<int> epoch,
                         std::optional<std::uint64_t> step,
                         const std::vector<PerturbationPoint>& points) {
    for (const PerturbationPoint& p : points) {
      csv.cell(std::string_view(name));
      if (epoch) csv.cell(*epoch); else csv.empty_cell();
      if (step) csv.cell(*step); else csv.empty_cell();
      csv.cell(p.eta).cell(p.loss).cell(p.baseline_loss).cell(p.grad_change).end_row();
    }
  };

  if (!given.empty()) {
    for (const fs::path& path : given) {
      const Mlp net = load_checkpoint(path);
      log << "perturbing " << path.string() << '\n';
      write_curve(path.filename().string(), std::nullopt, std::nullopt,
                  perturbation_curve(net, data, settings.loss, etas));
    }
    run.summary()["results"]["checkpoints"] = given.size();
  } else {
    const bool front_loaded =
        config.get_bool("perturb_sweep.front_loaded", settings.model.depth() <= 2);
    const long long snapshots = config.get_int("perturb_sweep.snapshots", 10);
    if (snapshots <= 0) throw ConfigError("config: 'perturb_sweep.snapshots' must be positive");
    const fs::path ckpt = run.dir() / "checkpoints";
    fs::create_directories(ckpt);
    log << "perturb-sweep: training depth " << settings.model.depth() << " on " << data.size()
        << " examples\n";
    const PerturbSweepResult result = perturb_sweep(
        settings, data, etas, front_loaded, static_cast<std::size_t>(snapshots),
        [&](const SnapshotCurve& curve, const Mlp& net) {
          const std::string name = "snapshot_" + padded(curve.index, 2);
          save_checkpoint(net, ckpt / (name + ".frmg"));
          write_curve(name, curve.epoch, curve.step, curve.points);
          log << "  " << name << " step " << curve.step << "  grad change at eta "
              << curve.points.back().eta << ": " << curve.points.back().grad_change << '\n';
        });
    json& r = run.summary()["results"];
    r["snapshots"] = result.curves.size();
    r["front_loaded"] = front_loaded;
    r["final_accuracy"] = result.training.final_accuracy;
    r["diverged"] = result.training.diverged;
  }
  run.finish(log);
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_norm_growth(const Config& config, const fs::path& out, std::ostream& log) {
  const std::uint64_t seed = config.get_u64("seed", 0);
  const long long steps = config.get_int("norm_growth.steps", 10000);
  if (steps < 1) throw ConfigError("config: 'norm_growth.steps' must be >= 1");
  const double eta = config.get_double("norm_growth.eta", 0.01);
  const bool prefactor = config.get_bool("norm_growth.with_prefactor", true);
  const long long rows = config.get_int("norm_growth.rows", 16);
  const long long cols = config.get_int("norm_growth.cols", 16);
  if (rows < 1 || cols < 1) throw ConfigError("config: norm_growth rows and cols must be >= 1");

  Run run(config, out, "norm-growth");
  const auto points = norm_growth(static_cast<std::uint64_t>(steps), eta, prefactor,
                                  static_cast<std::size_t>(rows), static_cast<std::size_t>(cols),
                                  stream_seed(seed, SeedStream::init));
  CsvWriter csv(run.dir() / "norm_growth.csv", {"step", "weight_norm", "predicted", "rel_error"});
  double worst = 0.0;
  for (const NormGrowthPoint& p : points) {
    csv.cell(p.step).cell(p.weight_norm).cell(p.predicted).cell(p.rel_error).end_row();
    worst = std::max(worst, p.rel_error);
  }
  json& r = run.summary()["results"];
  r["optimizer"] = prefactor ? "fromage" : "lars";
  r["initial_norm"] = points.front().weight_norm;
  r["final_norm"] = points.back().weight_norm;
  r["max_rel_error"] = worst;
  log << (prefactor ? "fromage" : "lars") << ": norm " << points.front().weight_norm << " -> "
      << points.back().weight_norm << " after " << steps << " steps (max rel error vs law "
      << worst << ")\n";
  run.finish(log);
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_depth_sweep(const Config& config, const fs::path& out, std::ostream& log) {
  const std::uint64_t seed = config.get_u64("seed", 0);
  DataSettings ds = data_settings_from(config);
  const bool full = config.get_bool("depth_sweep.full_fidelity", false);
  if (!config.has("data.subset_size") && !full) ds.subset_size = 5000;
  const Dataset data = load_dataset(ds, seed);
  const DepthSweepSettings settings = depth_sweep_settings_from(config, data);

  Run run(config, out, "depth-sweep");
  json& meta = run.summary()["metadata"];
  meta["width"] = settings.width;
  meta["depths"] = settings.depths;
  meta["epochs"] = settings.base.epochs;
  meta["examples"] = data.size();
  meta["full_fidelity"] = full;
  meta["nonlinearity"] = settings.base.model.nonlinearity.name();
  meta["final_nonlinearity"] = settings.base.model.final_nonlinearity;
  meta["schedule"] = to_string(settings.base.schedule.kind);

  log << "depth-sweep: " << data.size() << " examples, width " << settings.width << ", "
      << settings.base.epochs << " epochs\n";
  const std::vector<SweepCell> cells = depth_sweep(settings, data, &log);

  CsvWriter csv(run.dir() / "cells.csv", {"depth", "optimizer", "eta", "final_loss",
                                          "final_accuracy", "diverged", "steps"});
  CsvWriter timing(run.dir() / "timing.csv", {"depth", "optimizer", "eta", "wall_seconds"});
  for (const SweepCell& c : cells) {
    csv.cell(c.depth).cell(std::string_view(to_string(c.optimizer))).cell(c.eta)
        .cell(c.final_loss).cell(c.final_accuracy).cell(c.diverged).cell(c.steps).end_row();
    timing.cell(c.depth).cell(std::string_view(to_string(c.optimizer))).cell(c.eta)
        .cell(c.wall_seconds).end_row();
  }
  CsvWriter best_csv(run.dir() / "best.csv",
                     {"depth", "optimizer", "best_eta", "best_accuracy", "all_diverged"});
  for (const BestCell& b : best_over_eta(cells)) {
    best_csv.cell(b.depth).cell(std::string_view(to_string(b.optimizer))).cell(b.eta)
        .cell(b.final_accuracy).cell(b.all_diverged).end_row();
    log << "best  depth " << b.depth << "  " << to_string(b.optimizer) << "  eta " << b.eta
        << "  acc " << b.final_accuracy << '\n';
  }
  run.summary()["results"]["cells"] = cells.size();
  run.finish(log);
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_verify_bounds(const Config& config, const fs::path& out, std::ostream& log) {
  const BoundSweepSettings settings = bound_sweep_settings_from(config);
  Run run(config, out, "verify-bounds");
  json& meta = run.summary()["metadata"];
  meta["nonlinearity"] = settings.nonlinearity;
  meta["width"] = settings.width;
  meta["fault_scale"] = settings.fault_scale;
  meta["descent_grid"] = settings.descent_grid;
  meta["trial_seed_rule"] = "seed + trial";

  const BoundSweepResult result = verify_bounds(settings);
  const std::vector<std::string> header{"trial", "depth", "layer", "alpha", "beta", "kappa",
                                        "r_max", "measured", "bound", "satisfied",
                                        "hypothesis_violated"};
  for (BoundCheck check : {BoundCheck::functional, BoundCheck::jacobian, BoundCheck::conditioning,
                           BoundCheck::toy, BoundCheck::descent}) {
    CsvWriter csv(run.dir() / ("bounds_" + to_string(check) + ".csv"), header);
    std::size_t rows = 0, misses = 0;
    for (const BoundRow& row : result.rows) {
      if (row.check != check) continue;
      ++rows;
      if (row.asserted && !row.satisfied) ++misses;
      csv.cell(row.trial).cell(row.depth);
      if (row.layer) csv.cell(*row.layer); else csv.empty_cell();
      csv.cell(row.alpha).cell(row.beta).cell(row.kappa).cell(row.r_max).cell(row.measured)
          .cell(row.bound).cell(row.satisfied).cell(row.hypothesis_violated).end_row();
    }
    log << std::left << std::setw(13) << to_string(check) << rows << " comparisons, " << misses
        << " violations\n";
    run.summary()["results"][to_string(check)] = {{"comparisons", rows}, {"violations", misses}};
  }
  json& r = run.summary()["results"];
  r["asserted"] = result.asserted;
  r["violations"] = result.violations;
  r["offending_seeds"] = result.offending_seeds;
  if (result.asserted < result.rows.size())
    log << result.rows.size() - result.asserted
        << " comparisons reported only (hypothesis violated)\n";
  for (std::size_t i = 0; i < std::min<std::size_t>(result.offending_seeds.size(), 10); ++i)
    log << "VIOLATION at seed " << result.offending_seeds[i] << '\n';
  log << (result.violations == 0 ? "PASS" : "FAIL") << ": " << result.violations
      << " violations in " << result.asserted << " asserted comparisons\n";
  run.finish(log);
  return result.violations == 0 ? kExitOk : kExitFailure;
}

// ---------------------------------------------------------------------------

int cmd_lr_grid(const Config& config, const fs::path& out, std::ostream& log) {
  const std::uint64_t seed = config.get_u64("seed", 0);
  const Dataset data = load_dataset(data_settings_from(config), seed);
  const TrainSettings base = train_settings_from(config, data);
  const std::vector<double> etas =
      config.get_doubles("lr_grid.etas", {1e-4, 1e-3, 1e-2, 1e-1, 1e0});
  if (etas.empty()) throw ConfigError("config: 'lr_grid.etas' must not be empty");
  std::vector<OptimizerGrid> grid;
  for (const std::string& name : config.get_strings("lr_grid.optimizers", {"fromage"})) {
    try {
      grid.push_back({parse_optimizer_kind(name), etas});
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config: 'lr_grid.optimizers': ") + e.what());
    }
  }

  Run run(config, out, "lr-grid");
  record_model(run.summary()["metadata"], base.model);
  run.summary()["metadata"]["schedule"] = "constant";
  run.summary()["metadata"]["error"] = "final full-pass training loss";
  const auto cells =
      lr_grid(base, data, grid, static_cast<int>(config.get_int("lr_grid.workers", 1)), &log);

  CsvWriter csv(run.dir() / "lr_grid.csv",
                {"optimizer", "eta", "error", "final_accuracy", "diverged", "score"});
  std::size_t diverged = 0;
  for (const LrCell& c : cells) {
    csv.cell(std::string_view(to_string(c.optimizer))).cell(c.eta).cell(c.error)
        .cell(c.final_accuracy).cell(c.diverged);
    if (c.score) csv.cell(*c.score); else csv.empty_cell();
    csv.end_row();
    diverged += c.diverged ? 1 : 0;
  }
  run.summary()["results"]["cells"] = cells.size();
  run.summary()["results"]["diverged"] = diverged;
  run.finish(log);
  return kExitOk;
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"train",        "perturb-sweep", "norm-growth",
                                              "depth-sweep",  "verify-bounds", "lr-grid"};
  return names;
}

int run_command(const std::string& name, const Config& config, const fs::path& out,
                std::ostream& log) {
  if (name == "train") return cmd_train(config, out, log);
  if (name == "perturb-sweep") return cmd_perturb_sweep(config, out, log);
  if (name == "norm-growth") return cmd_norm_growth(config, out, log);
  if (name == "depth-sweep") return cmd_depth_sweep(config, out, log);
  if (name == "verify-bounds") return cmd_verify_bounds(config, out, log);
  if (name == "lr-grid") return cmd_lr_grid(config, out, log);
  throw std::invalid_argument("unknown command '" + name + "'");
}

}  // namespace fromage
