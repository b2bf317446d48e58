#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fromage/bounds.hpp"
#include "fromage/config.hpp"
#include "fromage/data.hpp"
#include "fromage/net.hpp"
#include "fromage/optim.hpp"

namespace fromage {

// ---------------------------------------------------------------------------
// Settings, read from a Config

struct DataSettings {
  std::string source = "synthetic";  // mnist | synthetic
  std::filesystem::path images;
  std::filesystem::path labels;
  std::size_t subset_size = 0;  // 0 keeps everything
  int num_classes = 10;
  std::size_t dim = 2;
  std::size_t per_class = 100;
  double separation = 3.0;
};

struct TrainSettings {
  DataSettings data;
  MlpConfig model;
  OptimizerKind optimizer = OptimizerKind::fromage;
  double eta = 0.01;
  OptimizerHyper hyper;
  bool clamp = false;
  Schedule schedule;
  int epochs = 10;
  std::size_t batch_size = 250;
  LossKind loss = LossKind::softmax_cross_entropy;
  std::vector<int> checkpoint_epochs;
  std::vector<std::uint64_t> checkpoint_steps;
  std::uint64_t seed = 0;
};

DataSettings data_settings_from(const Config& config);

/// Reads the run keys. The model input and output widths default to the
/// data dimension and class count when `model.widths` is absent.
TrainSettings train_settings_from(const Config& config, const Dataset& data);

Dataset load_dataset(const DataSettings& settings, std::uint64_t seed);

/// Seeds handed to the sub-streams of one run.
enum class SeedStream : std::uint64_t { data = 1, init = 2, batches = 3, trials = 4 };
std::uint64_t stream_seed(std::uint64_t seed, SeedStream stream, std::uint64_t index = 0);

// ---------------------------------------------------------------------------
// Training

struct EpochRecord {
  int epoch = 0;
  std::uint64_t step = 0;
  double eta = 0.0;  // the rate used during this epoch
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  bool diverged = false;
  std::vector<double> weight_norms;
  std::vector<double> relative_updates;  // last step of the epoch
  double wall_seconds = 0.0;
};

struct TrainResult {
  explicit TrainResult(Mlp initial) : net(std::move(initial)) {}

  std::vector<EpochRecord> epochs;
  Mlp net;
  bool diverged = false;
  std::string divergence_reason;
  double final_loss = 0.0;      // full pass after training
  double final_accuracy = 0.0;  // full pass after training
  std::uint64_t steps = 0;
  std::size_t weight_floor_hits = 0;
};

struct TrainHooks {
  /// Called after the listed optimizer steps (1-based) ...
  std::vector<std::uint64_t> snapshot_steps;
  /// ... and at the end of the listed epochs (1-based; 0 means before training).
  std::vector<int> snapshot_epochs;
  std::function<void(std::uint64_t step, int epoch, bool epoch_end, const Mlp& net)> on_snapshot;
  std::ostream* progress = nullptr;
};

TrainResult train(const TrainSettings& settings, const Dataset& data, Mlp net,
                  const TrainHooks& hooks = {});

/// Loss, accuracy and (optionally) gradients over the whole dataset, computed
/// in fixed chunks so memory stays bounded; gradients are chunk-size weighted.
Evaluation full_pass(const Mlp& net, const Dataset& data, LossKind loss, bool with_gradients,
                     std::size_t chunk = 1000);

// ---------------------------------------------------------------------------
// Perturbation sweep

struct PerturbationPoint {
  double eta = 0.0;
  double loss = 0.0;
  double baseline_loss = 0.0;
  double grad_change = 0.0;  // ||g~_1 - g_1|| / ||g_1||, input layer
};

/// Perturbs every layer to W_l - eta (||W_l|| / ||g_l||) g_l along the full
/// batch gradient and records loss and input-layer gradient change.
std::vector<PerturbationPoint> perturbation_curve(const Mlp& net, const Dataset& data,
                                                  LossKind loss, const std::vector<double>& etas);

struct SnapshotCurve {
  std::size_t index = 0;
  std::uint64_t step = 0;
  int epoch = 0;
  std::vector<PerturbationPoint> points;
};

/// Ten snapshots by default. front_loaded puts half of them inside the
/// first epoch and spreads the rest over epoch ends; otherwise one per epoch.
std::vector<std::uint64_t> snapshot_schedule(std::size_t steps_per_epoch, int epochs,
                                             bool front_loaded, std::size_t count = 10);

struct PerturbSweepResult {
  TrainResult training;
  std::vector<SnapshotCurve> curves;
};

PerturbSweepResult perturb_sweep(const TrainSettings& settings, const Dataset& data,
                                 const std::vector<double>& etas, bool front_loaded,
                                 std::size_t snapshots = 10,
                                 const std::function<void(const SnapshotCurve&, const Mlp&)>&
                                     on_curve = {});

// ---------------------------------------------------------------------------
// Norm growth on a scale-invariant layer

struct NormGrowthPoint {
  std::uint64_t step = 0;
  double weight_norm = 0.0;
  double predicted = 0.0;  // ||W0|| with the prefactor, (1+eta^2)^(t/2) ||W0|| without
  double rel_error = 0.0;
};

std::vector<NormGrowthPoint> norm_growth(std::uint64_t steps, double eta, bool with_prefactor,
                                         std::size_t rows, std::size_t cols, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Depth sweep and learning-rate grid

struct OptimizerGrid {
  OptimizerKind optimizer;
  std::vector<double> etas;
};

struct SweepCell {
  std::size_t depth = 0;
  OptimizerKind optimizer = OptimizerKind::fromage;
  double eta = 0.0;
  double final_loss = 0.0;
  double final_accuracy = 0.0;
  bool diverged = false;
  std::uint64_t steps = 0;
  double wall_seconds = 0.0;
};

struct DepthSweepSettings {
  TrainSettings base;  // widths are rebuilt per depth
  std::size_t width = 256;
  std::vector<std::size_t> depths;
  std::vector<OptimizerGrid> grid;
  int workers = 1;
};

DepthSweepSettings depth_sweep_settings_from(const Config& config, const Dataset& data);

/// Widths [d, width x (depth - 1), classes].
std::vector<std::size_t> sweep_widths(std::size_t input, std::size_t width, std::size_t depth,
                                      std::size_t classes);

/// Cells run on a pool of `workers` threads and come back in grid order
/// (depth-major, then optimizer, then eta). Every cell at one depth shares
/// the same initial weights and batch order.
std::vector<SweepCell> depth_sweep(const DepthSweepSettings& settings, const Dataset& data,
                                   std::ostream* progress = nullptr);

struct BestCell {
  std::size_t depth = 0;
  OptimizerKind optimizer = OptimizerKind::fromage;
  double eta = 0.0;
  double final_accuracy = 0.0;
  bool all_diverged = false;
};

/// Best final accuracy over eta per (depth, optimizer); diverged cells count
/// with their measured accuracy.
std::vector<BestCell> best_over_eta(const std::vector<SweepCell>& cells);

struct LrCell {
  OptimizerKind optimizer = OptimizerKind::fromage;
  double eta = 0.0;
  double error = 0.0;  // final full-pass training loss
  double final_accuracy = 0.0;
  bool diverged = false;
  std::optional<double> score;  // best_error / error among this optimizer's converged cells
};

std::vector<LrCell> lr_grid(const TrainSettings& base, const Dataset& data,
                            const std::vector<OptimizerGrid>& grid, int workers = 1,
                            std::ostream* progress = nullptr);

/// Fills in LrCell::score per optimizer.
void score_lr_cells(std::vector<LrCell>& cells);

// ---------------------------------------------------------------------------
// Randomised bound verification

struct BoundSweepSettings {
  std::size_t trials = 100;  // per (slope, depth, relative size) configuration
  std::vector<std::size_t> depths = {1, 2, 4, 8};
  std::vector<double> slopes = {0.25, 0.5, 1.0};
  std::vector<double> relative_sizes = {0.001, 0.01, 0.1};
  std::size_t width = 6;
  std::string nonlinearity = "leaky_relu";  // leaky_relu | relu | identity
  double fault_scale = 1.0;                 // multiplies every bound; < 1 to self-test
  std::size_t lemma_trials = 1000;
  std::size_t toy_trials = 1000;
  std::size_t descent_trials = 50;
  std::size_t descent_grid = 64;
  std::uint64_t seed = 0;
};

BoundSweepSettings bound_sweep_settings_from(const Config& config);

enum class BoundCheck { functional, jacobian, conditioning, toy, descent };
std::string to_string(BoundCheck check);

struct BoundRow {
  BoundCheck check = BoundCheck::functional;
  std::uint64_t trial = 0;
  std::uint64_t seed = 0;
  std::size_t depth = 0;
  std::optional<std::size_t> layer;
  double alpha = 0.0;
  double beta = 0.0;
  double kappa = 0.0;
  double r_max = 0.0;
  double measured = 0.0;
  double bound = 0.0;
  bool satisfied = false;
  bool hypothesis_violated = false;
  bool asserted = true;  // hypothesis holds, so a miss is a violation
};

struct BoundSweepResult {
  std::vector<BoundRow> rows;
  std::size_t asserted = 0;
  std::size_t violations = 0;
  std::vector<std::uint64_t> offending_seeds;  // sorted, unique
};

/// Every trial draws from its own engine seeded with seed + trial index, so
/// results do not depend on the thread schedule.
BoundSweepResult verify_bounds(const BoundSweepSettings& settings);

// ---------------------------------------------------------------------------
// Commands: read a Config, write {out}/{command}/{label}/ and return an exit code

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitDiverged = 3;

std::string build_id();

/// Creates {out}/{command}/{label or UTC timestamp}/. An existing labelled
/// directory is an error; a timestamp clash gets a numeric suffix.
std::filesystem::path make_run_dir(const std::filesystem::path& out, const std::string& command,
                                   const std::string& label);

int cmd_train(const Config& config, const std::filesystem::path& out, std::ostream& log);
int cmd_perturb_sweep(const Config& config, const std::filesystem::path& out, std::ostream& log);
int cmd_norm_growth(const Config& config, const std::filesystem::path& out, std::ostream& log);
int cmd_depth_sweep(const Config& config, const std::filesystem::path& out, std::ostream& log);
int cmd_verify_bounds(const Config& config, const std::filesystem::path& out, std::ostream& log);
int cmd_lr_grid(const Config& config, const std::filesystem::path& out, std::ostream& log);

/// Dispatch by CLI name (train, perturb-sweep, ...). Unknown names throw.
int run_command(const std::string& name, const Config& config, const std::filesystem::path& out,
                std::ostream& log);

const std::vector<std::string>& command_names();

}  // namespace fromage
