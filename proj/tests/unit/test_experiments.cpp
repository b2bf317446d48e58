#include <doctest.h>

#include <cmath>
#include <fstream>
#include <iostream>
#include <iterator>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fromage/checkpoint.hpp"
#include "fromage/csv.hpp"
#include "fromage/experiments.hpp"
#include "support/oracles.hpp"

using namespace fromage;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<fs::path> csv_files(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".csv" && e.path().filename() != "timing.csv")
      out.push_back(e.path().filename());
  std::sort(out.begin(), out.end());
  return out;
}

const std::string kSynthetic = R"(
seed = 5
epochs = 3
batch_size = 32
[data]
source = synthetic
num_classes = 3
dim = 4
per_class = 40
separation = 2
[model]
depth = 2
width = 6
nonlinearity = leaky_relu
)";

TrainSettings synthetic_settings(const Dataset& ds) {
  return train_settings_from(Config::parse(kSynthetic), ds);
}

Dataset synthetic_data() { return load_dataset(data_settings_from(Config::parse(kSynthetic)), 5); }

}  // namespace

TEST_CASE("epochs = 0 writes a header-only CSV and the initial checkpoint") {
  const fs::path out = testing::scratch_dir("exp_zero_epochs");
  Config c = Config::parse(kSynthetic);
  c.set("epochs", "0");
  c.set("label", "zero");
  std::ostringstream log;
  CHECK(cmd_train(c, out, log) == kExitOk);
  const fs::path dir = out / "train" / "zero";
  const auto rows = read_csv(dir / "train.csv");
  REQUIRE(rows.size() == 1);
  CHECK(rows[0] == std::vector<std::string>{"epoch", "step", "eta", "train_loss", "train_accuracy",
                                            "diverged", "weight_norm_1", "weight_norm_2",
                                            "rel_update_1", "rel_update_2"});
  CHECK(fs::exists(dir / "checkpoints" / "initial.frmg"));
  CHECK(fs::exists(dir / "checkpoints" / "initial.frmg.json"));

  const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  CHECK(summary["seed"] == 5);
  CHECK(summary["build_id"].get<std::string>() == build_id());
  CHECK(summary["config_hash"].get<std::string>().size() == 16);
  CHECK(summary["metadata"]["pixel_scaling"] == "[0, 1]");
  CHECK(summary["metadata"]["final_nonlinearity"] == false);
}

TEST_CASE("train records and checkpoints") {
  const fs::path out = testing::scratch_dir("exp_train");
  Config c = Config::parse(kSynthetic);
  c.set("label", "a");
  c.set("checkpoint_epochs", "0, 2");
  c.set("checkpoint_steps", "5");
  std::ostringstream log;
  REQUIRE(cmd_train(c, out, log) == kExitOk);
  const fs::path dir = out / "train" / "a";
  for (const char* name : {"initial", "epoch_0000", "epoch_0002", "step_0000005", "final"})
    CHECK_MESSAGE(fs::exists(dir / "checkpoints" / (std::string(name) + ".frmg")), name);
  const auto rows = read_csv(dir / "train.csv");
  REQUIRE(rows.size() == 4);
  // 120 examples in batches of 32: 4 steps per epoch.
  CHECK(rows[1][1] == "4");
  CHECK(rows[3][1] == "12");
  CHECK(read_csv(dir / "timing.csv").size() == 4);

  // The final checkpoint is the trained network; the initial one matches a fresh init.
  const Dataset ds = synthetic_data();
  const TrainSettings s = synthetic_settings(ds);
  CHECK(load_checkpoint(dir / "checkpoints" / "initial.frmg").weights() ==
        Mlp::initialize(s.model).weights());
  const TrainResult r = train(s, ds, Mlp::initialize(s.model));
  CHECK(load_checkpoint(dir / "checkpoints" / "final.frmg").weights() == r.net.weights());

  CHECK_THROWS_AS(cmd_train(c, out, log), std::runtime_error);  // label already used
}

TEST_CASE("every command is deterministic") {
  struct Case {
    std::string command;
    std::string text;
  };
  const std::vector<Case> cases{
      {"train", kSynthetic},
      {"perturb-sweep", kSynthetic + "[perturb_sweep]\netas = 0, 0.01, 0.1\nsnapshots = 4\n"},
      {"norm-growth", "seed = 3\n[norm_growth]\nsteps = 200\nwith_prefactor = false\n"},
      {"depth-sweep", kSynthetic + "[depth_sweep]\ndepths = 1, 3\nfromage_etas = 0.1, 0.01\n"
                                   "sgd_etas = 0.1\nworkers = 2\n"},
      {"verify-bounds", "seed = 9\n[verify_bounds]\ntrials = 3\nlemma_trials = 20\n"
                        "toy_trials = 20\ndescent_trials = 2\ndescent_grid = 8\n"},
      {"lr-grid", kSynthetic + "[lr_grid]\netas = 0.1, 0.01\noptimizers = fromage, sgd\n"},
  };
  const fs::path out = testing::scratch_dir("exp_determinism");
  for (const Case& c : cases) {
    CAPTURE(c.command);
    std::vector<fs::path> dirs;
    for (const char* label : {"first", "second"}) {
      Config config = Config::parse(c.text);
      config.set("label", label);
      std::ostringstream log;
      CHECK(run_command(c.command, config, out, log) == kExitOk);
      dirs.push_back(out / c.command / label);
    }
    const auto files = csv_files(dirs[0]);
    CHECK_FALSE(files.empty());
    CHECK(files == csv_files(dirs[1]));
    for (const fs::path& f : files) {
      CAPTURE(f.string());
      CHECK(slurp(dirs[0] / f) == slurp(dirs[1] / f));
      CHECK(read_csv(dirs[0] / f).size() >= 2);
    }
  }
}

TEST_CASE("seed changes the outputs") {
  const fs::path out = testing::scratch_dir("exp_seed");
  for (const char* seed : {"1", "2"}) {
    Config c = Config::parse(kSynthetic);
    c.set("seed", seed);
    c.set("label", seed);
    std::ostringstream log;
    REQUIRE(cmd_train(c, out, log) == kExitOk);
  }
  CHECK(slurp(out / "train" / "1" / "train.csv") != slurp(out / "train" / "2" / "train.csv"));
}

TEST_CASE("norm growth follows the closed-form laws") {
  const std::uint64_t steps = 10000;
  SUBCASE("with the prefactor the norm is conserved") {
    const auto points = norm_growth(steps, 0.01, true, 16, 16, 1);
    const double w0 = points.front().weight_norm;
    for (const auto& p : points) CHECK(std::abs(p.weight_norm - w0) <= 1e-9 * w0);
  }
  SUBCASE("without it the norm compounds") {
    const auto points = norm_growth(steps, 0.01, false, 16, 16, 1);
    const double w0 = points.front().weight_norm;
    for (std::uint64_t t : {std::uint64_t{1}, std::uint64_t{100}, steps}) {
      const double law = std::pow(1.0001, static_cast<double>(t) / 2.0) * w0;
      CHECK(std::abs(points[t].weight_norm - law) <= 1e-6 * law);
    }
    CHECK(points.back().weight_norm / w0 == doctest::Approx(std::exp(0.5)).epsilon(1e-3));
  }
  SUBCASE("eta = 0 leaves the weights alone") {
    for (bool prefactor : {true, false}) {
      const auto points = norm_growth(50, 0.0, prefactor, 4, 3, 2);
      for (const auto& p : points) CHECK(p.weight_norm == points.front().weight_norm);
    }
  }
  CHECK_THROWS_AS(norm_growth(0, 0.01, true, 2, 2, 1), std::invalid_argument);
}

TEST_CASE("snapshot schedule") {
  CHECK(snapshot_schedule(20, 10, false) ==
        std::vector<std::uint64_t>{20, 40, 60, 80, 100, 120, 140, 160, 180, 200});
  CHECK(snapshot_schedule(20, 10, true) ==
        std::vector<std::uint64_t>{4, 8, 12, 16, 20, 60, 100, 140, 180, 200});
  CHECK(snapshot_schedule(10, 1, false) ==
        std::vector<std::uint64_t>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  CHECK(snapshot_schedule(20, 4, false) == std::vector<std::uint64_t>{20, 40, 60, 80});
  CHECK(snapshot_schedule(0, 4, true).empty());
  CHECK(snapshot_schedule(5, 0, true).empty());
  for (bool front : {true, false})
    for (std::size_t s : {1u, 3u, 40u})
      for (int e : {1, 2, 10, 30}) {
        const auto marks = snapshot_schedule(s, e, front);
        CHECK(std::is_sorted(marks.begin(), marks.end()));
        CHECK(marks.size() <= 10);
        CHECK(marks.back() == s * static_cast<std::size_t>(e));
        CHECK(marks.front() >= 1);
      }
}

TEST_CASE("perturbation curve") {
  const Dataset ds = synthetic_data();
  const TrainSettings s = synthetic_settings(ds);
  const Mlp net = Mlp::initialize(s.model);
  const auto points = perturbation_curve(net, ds, s.loss, {0.0, 0.01, 0.1});
  REQUIRE(points.size() == 3);
  CHECK(points[0].loss == points[0].baseline_loss);
  CHECK(points[0].grad_change == 0.0);
  CHECK(points[1].grad_change > 0.0);
  CHECK(points[1].loss < points[1].baseline_loss);
  CHECK_THROWS_AS(perturbation_curve(net, ds, s.loss, {-0.1}), std::invalid_argument);

  // Oracle: perturb by hand and take the input-layer gradient from a full batch.
  const Batch all = full_batch(ds);
  const GradientSet g = loss_and_gradients(net, all, s.loss).gradients;
  std::vector<Matrix> d;
  for (std::size_t k = 0; k < net.depth(); ++k)
    d.push_back(scale(g.grads[k], -0.1 * frobenius_norm(net.weight(k)) / g.norms[k]));
  const GradientSet moved = loss_and_gradients(perturb(net, d), all, s.loss).gradients;
  const double expect = frobenius_norm(sub(moved.grads[0], g.grads[0])) / g.norms[0];
  CHECK(points[2].grad_change == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("full pass agrees across chunk sizes") {
  const Dataset ds = synthetic_data();
  const TrainSettings s = synthetic_settings(ds);
  const Mlp net = Mlp::initialize(s.model);
  const Evaluation whole = full_pass(net, ds, s.loss, true, 1000);
  const Evaluation pieces = full_pass(net, ds, s.loss, true, 7);
  const Evaluation direct = loss_and_gradients(net, full_batch(ds), s.loss);
  CHECK(whole.loss == doctest::Approx(direct.loss).epsilon(1e-14));
  CHECK(pieces.loss == doctest::Approx(direct.loss).epsilon(1e-13));
  CHECK(pieces.correct == direct.correct);
  for (std::size_t k = 0; k < net.depth(); ++k)
    CHECK(testing::relative_frobenius_error(pieces.gradients.grads[k], direct.gradients.grads[k]) <
          1e-13);
  CHECK(full_pass(net, ds, s.loss, false).gradients.size() == 0);
}

TEST_CASE("divergence is detected and reported") {
  const fs::path out = testing::scratch_dir("exp_diverge");
  Config c = Config::parse(kSynthetic);
  c.set("label", "boom");
  c.set("optimizer.kind", "sgd");
  c.set("optimizer.eta", "1e30");
  std::ostringstream log;
  CHECK(cmd_train(c, out, log) == kExitDiverged);
  const auto rows = read_csv(out / "train" / "boom" / "train.csv");
  REQUIRE(rows.size() >= 2);
  CHECK(rows.back()[5] == "1");
  CHECK(rows.back()[3] == "nan");
  CHECK_FALSE(fs::exists(out / "train" / "boom" / "checkpoints" / "final.frmg"));
  CHECK(log.str().find("diverged") != std::string::npos);
}

TEST_CASE("chance-level accuracy late in training counts as divergence") {
  // Positive inputs, labels cycling through 10 classes, and a network that
  // always predicts class 0: accuracy stays at exactly 10%.
  Dataset ds;
  ds.num_classes = 10;
  ds.inputs = Matrix(4, 100, 1.0);
  for (int i = 0; i < 100; ++i) ds.labels.push_back(i % 10);
  Matrix w(10, 4, 0.01);
  for (std::size_t c = 0; c < 4; ++c) w(0, c) = 100.0;
  TrainSettings s;
  s.model.widths = {4, 10};
  s.model.final_nonlinearity = false;
  s.epochs = 8;
  s.batch_size = 100;
  s.eta = 1e-6;
  const TrainResult r = train(s, ds, Mlp(s.model, {w}));
  CHECK(r.diverged);
  // Epochs 5, 6 and 7 are the first three in the second half.
  REQUIRE(r.epochs.size() == 7);
  CHECK(r.epochs.back().diverged);
  CHECK(r.epochs.back().train_accuracy == 0.1);
  CHECK(r.divergence_reason.find("below 15%") != std::string::npos);
}

TEST_CASE("schedule is applied between epochs") {
  const Dataset ds = synthetic_data();
  TrainSettings s = synthetic_settings(ds);
  s.schedule.kind = Schedule::Kind::exponential;
  s.schedule.gamma = 0.5;
  s.epochs = 3;
  const TrainResult r = train(s, ds, Mlp::initialize(s.model));
  REQUIRE(r.epochs.size() == 3);
  CHECK(r.epochs[0].eta == 0.01);
  CHECK(r.epochs[1].eta == 0.005);
  CHECK(r.epochs[2].eta == 0.0025);
  // Fromage moves every layer by eta relative, up to O(eta^2) from the prefactor.
  for (const auto& e : r.epochs)
    for (double u : e.relative_updates) CHECK(std::abs(u - e.eta) <= e.eta * e.eta);
}

TEST_CASE("learning-rate grid scoring") {
  SUBCASE("a single cell scores 1") {
    std::vector<LrCell> cells(1);
    cells[0].error = 0.3;
    score_lr_cells(cells);
    REQUIRE(cells[0].score);
    CHECK(*cells[0].score == 1.0);
  }
  SUBCASE("scores are best error over error, per optimizer") {
    std::vector<LrCell> cells(4);
    cells[0].error = 0.2;
    cells[1].error = 0.4;
    cells[2].error = 0.1;
    cells[2].diverged = true;
    cells[3].optimizer = OptimizerKind::sgd;
    cells[3].error = 5.0;
    score_lr_cells(cells);
    CHECK(*cells[0].score == 1.0);
    CHECK(*cells[1].score == 0.5);
    CHECK_FALSE(cells[2].score);
    CHECK(*cells[3].score == 1.0);
  }
  SUBCASE("an all-divergent grid gets no scores") {
    std::vector<LrCell> cells(3);
    for (auto& c : cells) c.diverged = true;
    score_lr_cells(cells);
    for (const auto& c : cells) CHECK_FALSE(c.score);
  }
  SUBCASE("end to end") {
    const Dataset ds = synthetic_data();
    TrainSettings s = synthetic_settings(ds);
    s.epochs = 2;
    auto cells = lr_grid(s, ds, {{OptimizerKind::fromage, {0.01}}});
    REQUIRE(cells.size() == 1);
    CHECK(*cells[0].score == 1.0);
    cells = lr_grid(s, ds, {{OptimizerKind::sgd, {1e30, 1e31}}});
    for (const auto& c : cells) {
      CHECK(c.diverged);
      CHECK_FALSE(c.score);
    }
  }
}

TEST_CASE("depth sweep bookkeeping") {
  CHECK(sweep_widths(784, 256, 1, 10) == std::vector<std::size_t>{784, 10});
  CHECK(sweep_widths(784, 256, 3, 10) == std::vector<std::size_t>{784, 256, 256, 10});
  CHECK_THROWS_AS(sweep_widths(784, 256, 0, 10), std::invalid_argument);

  std::vector<SweepCell> cells(5);
  const double acc[] = {0.5, 0.9, 0.7, 0.3, 0.2};
  for (std::size_t i = 0; i < 5; ++i) {
    cells[i].depth = i < 3 ? 2 : 8;
    cells[i].optimizer = OptimizerKind::fromage;
    cells[i].eta = 0.1 / std::pow(10.0, static_cast<double>(i % 3));
    cells[i].final_accuracy = acc[i];
  }
  cells[3].diverged = cells[4].diverged = true;
  const auto best = best_over_eta(cells);
  REQUIRE(best.size() == 2);
  CHECK(best[0].depth == 2);
  CHECK(best[0].eta == doctest::Approx(0.01));
  CHECK(best[0].final_accuracy == 0.9);
  CHECK_FALSE(best[0].all_diverged);
  CHECK(best[1].all_diverged);
  CHECK(best[1].final_accuracy == 0.3);

  const Dataset ds = synthetic_data();
  const DepthSweepSettings s =
      depth_sweep_settings_from(Config::parse(kSynthetic + "[depth_sweep]\ndepths = 1, 2\n"), ds);
  CHECK(s.base.epochs == 3);
  CHECK(s.base.schedule.kind == Schedule::Kind::exponential);
  CHECK(s.base.schedule.gamma == 0.95);
  CHECK(s.depths == std::vector<std::size_t>{1, 2});
  REQUIRE(s.grid.size() == 2);
  CHECK(s.grid[1].etas == std::vector<double>{1.0, 0.1, 0.01});

  // Worker count does not change the results.
  DepthSweepSettings one = s;
  one.base.epochs = 2;
  one.grid = {{OptimizerKind::fromage, {0.1, 0.01}}};
  DepthSweepSettings many = one;
  many.workers = 3;
  const auto a = depth_sweep(one, ds), b = depth_sweep(many, ds);
  REQUIRE(a.size() == 4);
  REQUIRE(b.size() == 4);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].depth == b[i].depth);
    CHECK(a[i].eta == b[i].eta);
    CHECK(a[i].final_loss == b[i].final_loss);
  }
}

TEST_CASE("depth one is easy for every optimizer on the MNIST subset") {
  const Config c = Config::parse(std::string(R"(
seed = 1
[data]
source = mnist
images = )") + FROMAGE_DATA_DIR + R"(/images.idx3-ubyte
labels = )" + FROMAGE_DATA_DIR + R"(/labels.idx1-ubyte
[depth_sweep]
depths = 1
optimizers = fromage, sgd, adam
)");
  const Dataset ds = load_dataset(data_settings_from(c), 1);
  const DepthSweepSettings s = depth_sweep_settings_from(c, ds);
  for (const BestCell& b : best_over_eta(depth_sweep(s, ds))) {
    CAPTURE(to_string(b.optimizer));
    CHECK(b.final_accuracy >= 0.9);
  }
}

TEST_CASE("run directories") {
  const fs::path out = testing::scratch_dir("exp_rundir");
  const fs::path a = make_run_dir(out, "train", "x");
  CHECK(a == out / "train" / "x");
  CHECK_THROWS_AS(make_run_dir(out, "train", "x"), std::runtime_error);
  const fs::path t1 = make_run_dir(out, "train", "");
  const fs::path t2 = make_run_dir(out, "train", "");
  CHECK(t1 != t2);
  CHECK(fs::is_directory(t1));
  CHECK(fs::is_directory(t2));
  CHECK_THROWS_AS(run_command("fly", Config::parse(""), out, std::cerr), std::invalid_argument);
  CHECK(command_names().size() == 6);
}

TEST_CASE("stream seeds are distinct") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t seed : {0u, 1u, 2u})
    for (SeedStream s : {SeedStream::data, SeedStream::init, SeedStream::batches, SeedStream::trials})
      for (std::uint64_t i = 0; i < 50; ++i) seen.insert(stream_seed(seed, s, i));
  CHECK(seen.size() == 3 * 4 * 50);
}
