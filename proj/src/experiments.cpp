#include "fromage/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <iomanip>
#include <ostream>
#include <set>
#include <stdexcept>

#include "fromage/random.hpp"

namespace fromage {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<std::uint64_t> to_u64(const std::vector<long long>& values, const char* key) {
  std::vector<std::uint64_t> out;
  for (long long v : values) {
    if (v < 0) throw ConfigError(std::string("config: '") + key + "' entries must be >= 0");
    out.push_back(static_cast<std::uint64_t>(v));
  }
  return out;
}

std::size_t positive_size(const Config& config, const char* key, long long fallback) {
  const long long v = config.get_int(key, fallback);
  if (v <= 0) throw ConfigError(std::string("config: '") + key + "' must be positive");
  return static_cast<std::size_t>(v);
}

std::vector<std::size_t> sizes_from(const Config& config, const char* key,
                                    std::vector<long long> fallback) {
  std::vector<std::size_t> out;
  for (long long v : config.get_ints(key, std::move(fallback))) {
    if (v <= 0) throw ConfigError(std::string("config: '") + key + "' entries must be positive");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

// Turns a value error from a parser or validator into a usage error.
template <typename F>
auto config_value(const char* key, F&& read) {
  try {
    return read();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: '") + key + "': " + e.what());
  }
}

Batch chunk_batch(const Dataset& data, std::size_t begin, std::size_t end) {
  std::vector<std::size_t> idx(end - begin);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = begin + i;
  return gather(data, idx);
}

// Runs `job(i)` for i in [0, n) on up to `workers` threads. Exceptions are
// collected per index and the first (lowest index) one is rethrown.
template <typename Job>
void run_jobs(std::size_t n, int workers, Job job) {
  std::vector<std::exception_ptr> errors(n);
  const int threads = std::max(1, workers);
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      job(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

// ---------------------------------------------------------------------------

std::uint64_t stream_seed(std::uint64_t seed, SeedStream stream, std::uint64_t index) {
  return derive_seed(derive_seed(seed, static_cast<std::uint64_t>(stream)), index);
}

DataSettings data_settings_from(const Config& config) {
  DataSettings s;
  s.source = config.get_string("data.source", "synthetic");
  if (s.source == "mnist") {
    s.images = config.get_path("data.images");
    s.labels = config.get_path("data.labels");
  } else if (s.source != "synthetic") {
    throw ConfigError("config: data.source must be mnist or synthetic, got '" + s.source + "'");
  }
  const long long subset = config.get_int("data.subset_size", 0);
  if (subset < 0) throw ConfigError("config: 'data.subset_size' must be >= 0");
  s.subset_size = static_cast<std::size_t>(subset);
  s.num_classes = static_cast<int>(config.get_int("data.num_classes", 2));
  if (s.num_classes < 1) throw ConfigError("config: 'data.num_classes' must be positive");
  s.dim = positive_size(config, "data.dim", 2);
  s.per_class = positive_size(config, "data.per_class", 100);
  s.separation = config.get_double("data.separation", 3.0);
  return s;
}

Dataset load_dataset(const DataSettings& s, std::uint64_t seed) {
  Dataset ds = s.source == "mnist"
                   ? load_mnist_idx(s.images, s.labels)
                   : synthetic_gaussian_classes(s.num_classes, s.dim, s.per_class, s.separation,
                                                stream_seed(seed, SeedStream::data, 0));
  if (s.subset_size > 0) ds = subset(ds, s.subset_size, stream_seed(seed, SeedStream::data, 1));
  return ds;
}

TrainSettings train_settings_from(const Config& config, const Dataset& data) {
  TrainSettings s;
  s.seed = config.get_u64("seed", 0);
  s.data = data_settings_from(config);

  if (config.has("model.widths")) {
    s.model.widths = sizes_from(config, "model.widths", {});
  } else {
    const std::size_t depth = positive_size(config, "model.depth", 2);
    const std::size_t width = positive_size(config, "model.width", 128);
    s.model.widths = sweep_widths(data.dim(), width, depth,
                                  static_cast<std::size_t>(data.num_classes));
  }
  s.model.nonlinearity = config_value("model.nonlinearity", [&] {
    return Nonlinearity::parse(config.get_string("model.nonlinearity", "relu"),
                               config.get_double("model.leaky_slope", 0.1));
  });
  s.model.final_nonlinearity = config.get_bool("model.final_nonlinearity", false);
  s.model.init = config_value("model.init", [&] {
    return parse_init_kind(config.get_string("model.init", "glorot_uniform"));
  });
  s.model.init_scale = config.get_double("model.init_scale", 1.0);
  s.model.seed = stream_seed(s.seed, SeedStream::init);
  config_value("model.widths", [&] {
    s.model.validate();
    return 0;
  });
  if (s.model.widths.front() != data.dim())
    throw ConfigError("config: model input width " + std::to_string(s.model.widths.front()) +
                      " does not match data dimension " + std::to_string(data.dim()));

  s.optimizer = config_value("optimizer.kind", [&] {
    return parse_optimizer_kind(config.get_string("optimizer.kind", "fromage"));
  });
  s.eta = config.get_double("optimizer.eta", 0.01);
  s.hyper.momentum = config.get_double("optimizer.momentum", s.hyper.momentum);
  s.hyper.beta1 = config.get_double("optimizer.beta1", s.hyper.beta1);
  s.hyper.beta2 = config.get_double("optimizer.beta2", s.hyper.beta2);
  s.hyper.epsilon = config.get_double("optimizer.epsilon", s.hyper.epsilon);
  s.hyper.weight_decay = config.get_double("optimizer.weight_decay", s.hyper.weight_decay);
  s.hyper.epsilon_floor = config.get_double("optimizer.epsilon_floor", s.hyper.epsilon_floor);
  s.clamp = config.get_bool("optimizer.clamp", false);

  s.schedule.kind = config_value("schedule.kind", [&] {
    return parse_schedule_kind(config.get_string("schedule.kind", "constant"));
  });
  s.schedule.gamma = config.get_double("schedule.gamma", s.schedule.gamma);
  s.schedule.factor = config.get_double("schedule.factor", s.schedule.factor);
  s.schedule.patience = static_cast<int>(config.get_int("schedule.patience", s.schedule.patience));
  config_value("schedule", [&] {
    s.schedule.validate();
    return 0;
  });

  const long long epochs = config.get_int("epochs", 10);
  if (epochs < 0) throw ConfigError("config: 'epochs' must be >= 0");
  s.epochs = static_cast<int>(epochs);
  s.batch_size = positive_size(config, "batch_size", 250);
  s.loss = config_value("loss", [&] {
    return parse_loss_kind(config.get_string("loss", "softmax_cross_entropy"));
  });
  for (long long e : config.get_ints("checkpoint_epochs", {})) {
    if (e < 0) throw ConfigError("config: 'checkpoint_epochs' entries must be >= 0");
    s.checkpoint_epochs.push_back(static_cast<int>(e));
  }
  s.checkpoint_steps = to_u64(config.get_ints("checkpoint_steps", {}), "checkpoint_steps");
  return s;
}

// ---------------------------------------------------------------------------

Evaluation full_pass(const Mlp& net, const Dataset& data, LossKind loss, bool with_gradients,
                     std::size_t chunk) {
  if (data.size() == 0) throw std::invalid_argument("full_pass: empty dataset");
  if (chunk == 0) throw std::invalid_argument("full_pass: chunk must be positive");
  const double n = static_cast<double>(data.size());
  Evaluation total;
  total.count = data.size();
  long double loss_sum = 0.0L;
  std::vector<Matrix> grads;
  for (std::size_t begin = 0; begin < data.size(); begin += chunk) {
    const std::size_t end = std::min(data.size(), begin + chunk);
    const Batch batch = chunk_batch(data, begin, end);
    const double weight = static_cast<double>(end - begin) / n;
    Evaluation part = with_gradients ? loss_and_gradients(net, batch, loss)
                                     : evaluate(net, batch, loss);
    loss_sum += static_cast<long double>(part.loss) * static_cast<long double>(weight);
    total.correct += part.correct;
    if (!with_gradients) continue;
    for (std::size_t k = 0; k < part.gradients.size(); ++k) {
      if (grads.size() <= k) {
        grads.push_back(scale(part.gradients.grads[k], weight));
      } else {
        grads[k] = axpy(grads[k], weight, part.gradients.grads[k]);
      }
    }
  }
  total.loss = static_cast<double>(loss_sum);
  if (with_gradients) total.gradients = GradientSet(std::move(grads));
  return total;
}

TrainResult train(const TrainSettings& settings, const Dataset& data, Mlp net,
                  const TrainHooks& hooks) {
  data.validate();
  if (net.config().widths.front() != data.dim())
    throw ShapeError("train: network input width " + std::to_string(net.config().widths.front()) +
                     " vs data dimension " + std::to_string(data.dim()));
  if (settings.epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
  if (settings.batch_size == 0) throw std::invalid_argument("train: batch_size must be positive");
  settings.schedule.validate();

  OptimizerState state =
      OptimizerState::create(settings.optimizer, settings.eta, net, settings.hyper, settings.clamp);
  const std::set<std::uint64_t> step_marks(hooks.snapshot_steps.begin(),
                                           hooks.snapshot_steps.end());
  const std::set<int> epoch_marks(hooks.snapshot_epochs.begin(), hooks.snapshot_epochs.end());
  auto snapshot = [&](std::uint64_t step, int epoch, bool epoch_end, const Mlp& current) {
    if (hooks.on_snapshot) hooks.on_snapshot(step, epoch, epoch_end, current);
  };

  TrainResult result(std::move(net));
  Mlp& current = result.net;
  if (epoch_marks.count(0)) snapshot(0, 0, true, current);

  std::vector<double> history;
  std::uint64_t step = 0;
  int low_accuracy_streak = 0;
  for (int epoch = 1; epoch <= settings.epochs; ++epoch) {
    const auto start = Clock::now();
    const auto order =
        batches(data.size(), settings.batch_size,
                stream_seed(settings.seed, SeedStream::batches, static_cast<std::uint64_t>(epoch)));
    EpochRecord row;
    row.epoch = epoch;
    row.eta = state.eta;
    row.relative_updates.assign(current.depth(), 0.0);
    long double loss_sum = 0.0L;
    std::size_t correct = 0;
    std::size_t seen = 0;
    std::string failure;

    for (std::size_t b = 0; b < order.size(); ++b) {
      const Batch batch = gather(data, order[b]);
      try {
        const Evaluation ev = loss_and_gradients(current, batch, settings.loss);
        if (!std::isfinite(ev.loss)) throw NonFiniteError("loss is not finite");
        loss_sum += static_cast<long double>(ev.loss) * static_cast<long double>(batch.size());
        correct += ev.correct;
        seen += batch.size();
        Mlp next = optimizer_step(current, ev.gradients, state);
        if (b + 1 == order.size()) {
          for (std::size_t k = 0; k < current.depth(); ++k) {
            const double w = frobenius_norm(current.weight(k));
            row.relative_updates[k] =
                w > 0.0 ? frobenius_norm(sub(next.weight(k), current.weight(k))) / w : 0.0;
          }
        }
        current = std::move(next);
      } catch (const NonFiniteError& e) {
        failure = "non-finite values at step " + std::to_string(step + 1) + ": " + e.what();
        break;
      }
      ++step;
      if (step_marks.count(step)) snapshot(step, epoch, false, current);
    }

    row.step = step;
    row.train_loss = failure.empty() && seen > 0
                         ? static_cast<double>(loss_sum / static_cast<long double>(seen))
                         : std::numeric_limits<double>::quiet_NaN();
    row.train_accuracy =
        seen > 0 ? static_cast<double>(correct) / static_cast<double>(seen) : 0.0;
    row.weight_norms = current.weight_norms();
    row.wall_seconds = seconds_since(start);

    if (failure.empty() && 2 * epoch > settings.epochs) {
      low_accuracy_streak = row.train_accuracy < 0.15 ? low_accuracy_streak + 1 : 0;
      if (low_accuracy_streak >= 3)
        failure = "train accuracy below 15% for 3 consecutive epochs in the second half";
    }
    if (!failure.empty()) {
      row.diverged = true;
      result.diverged = true;
      result.divergence_reason = failure;
      result.epochs.push_back(std::move(row));
      break;
    }
    result.epochs.push_back(row);
    if (hooks.progress)
      *hooks.progress << "  epoch " << epoch << "  eta " << row.eta << "  loss " << row.train_loss
                      << "  acc " << row.train_accuracy << '\n';
    if (epoch_marks.count(epoch)) snapshot(step, epoch, true, current);

    history.push_back(row.train_loss);
    const double next_eta = schedule_eta(settings.schedule, history, epoch, state.eta);
    if (settings.schedule.kind == Schedule::Kind::decay_on_plateau && next_eta != state.eta)
      history.clear();
    state.eta = next_eta;
  }

  result.steps = step;
  result.weight_floor_hits = state.weight_floor_hits;
  try {
    const Evaluation final_eval = full_pass(current, data, settings.loss, false);
    result.final_loss = final_eval.loss;
    result.final_accuracy = final_eval.accuracy();
  } catch (const NonFiniteError&) {
    result.final_loss = std::numeric_limits<double>::quiet_NaN();
    result.final_accuracy = 0.0;
  }
  if (!std::isfinite(result.final_loss) && !result.diverged) {
    result.diverged = true;
    result.divergence_reason = "non-finite loss after training";
  }
  return result;
}

// ---------------------------------------------------------------------------

std::vector<PerturbationPoint> perturbation_curve(const Mlp& net, const Dataset& data,
                                                  LossKind loss, const std::vector<double>& etas) {
  const Evaluation base = full_pass(net, data, loss, true);
  const double g1 = base.gradients.norms.front();
  if (g1 == 0.0) throw std::domain_error("perturbation_curve: input-layer gradient is zero");
  std::vector<PerturbationPoint> out;
  out.reserve(etas.size());
  for (double eta : etas) {
    if (!(eta >= 0.0)) throw std::invalid_argument("perturbation_curve: eta must be >= 0");
    const auto deltas = relative_update(net, base.gradients, eta, 0.0);
    const Evaluation moved = full_pass(perturb(net, deltas), data, loss, true);
    PerturbationPoint p;
    p.eta = eta;
    p.loss = moved.loss;
    p.baseline_loss = base.loss;
    p.grad_change =
        frobenius_norm(sub(moved.gradients.grads.front(), base.gradients.grads.front())) / g1;
    out.push_back(p);
  }
  return out;
}

std::vector<std::uint64_t> snapshot_schedule(std::size_t steps_per_epoch, int epochs,
                                             bool front_loaded, std::size_t count) {
  std::set<std::uint64_t> marks;
  if (steps_per_epoch == 0 || epochs <= 0 || count == 0) return {};
  const auto s = static_cast<std::uint64_t>(steps_per_epoch);
  const auto e = static_cast<std::uint64_t>(epochs);
  const auto c = static_cast<std::uint64_t>(count);
  auto ceil_div = [](std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; };

  if (!front_loaded || e == 1) {
    if (e == 1) {
      for (std::uint64_t i = 1; i <= c; ++i) marks.insert(std::max<std::uint64_t>(1, ceil_div(s * i, c)));
    } else {
      for (std::uint64_t i = 1; i <= std::min(c, e); ++i) marks.insert(s * ceil_div(e * i, std::min(c, e)));
    }
  } else {
    const std::uint64_t first = c / 2;
    const std::uint64_t rest = c - first;
    for (std::uint64_t i = 1; i <= first; ++i) marks.insert(ceil_div(s * i, first));
    for (std::uint64_t j = 1; j <= rest; ++j) marks.insert(s * (1 + ceil_div((e - 1) * j, rest)));
  }
  return {marks.begin(), marks.end()};
}

PerturbSweepResult perturb_sweep(const TrainSettings& settings, const Dataset& data,
                                 const std::vector<double>& etas, bool front_loaded,
                                 std::size_t snapshots,
                                 const std::function<void(const SnapshotCurve&, const Mlp&)>&
                                     on_curve) {
  const std::size_t steps_per_epoch = (data.size() + settings.batch_size - 1) / settings.batch_size;
  std::vector<SnapshotCurve> curves;
  TrainHooks hooks;
  hooks.snapshot_steps = snapshot_schedule(steps_per_epoch, settings.epochs, front_loaded, snapshots);
  hooks.on_snapshot = [&](std::uint64_t step, int epoch, bool, const Mlp& net) {
    SnapshotCurve curve;
    curve.index = curves.size();
    curve.step = step;
    curve.epoch = epoch;
    curve.points = perturbation_curve(net, data, settings.loss, etas);
    if (on_curve) on_curve(curve, net);
    curves.push_back(std::move(curve));
  };
  TrainResult training = train(settings, data, Mlp::initialize(settings.model), hooks);
  return {std::move(training), std::move(curves)};
}

// ---------------------------------------------------------------------------

std::vector<NormGrowthPoint> norm_growth(std::uint64_t steps, double eta, bool with_prefactor,
                                         std::size_t rows, std::size_t cols, std::uint64_t seed) {
  if (steps == 0) throw std::invalid_argument("norm_growth: steps must be >= 1");
  if (!(eta >= 0.0)) throw std::invalid_argument("norm_growth: eta must be >= 0");
  Rng rng = make_rng(seed);
  MlpConfig config;
  config.widths = {cols, rows};
  config.seed = seed;
  Mlp net(config, {gaussian_matrix(rows, cols, rng)});
  const double w0 = frobenius_norm(net.weight(0));
  const double log_growth = with_prefactor ? 0.0 : 0.5 * std::log1p(eta * eta);

  std::optional<OptimizerState> state;
  if (eta > 0.0)
    state = OptimizerState::create(with_prefactor ? OptimizerKind::fromage : OptimizerKind::lars,
                                   eta, net);

  std::vector<NormGrowthPoint> out;
  out.reserve(steps + 1);
  auto record = [&](std::uint64_t t) {
    NormGrowthPoint p;
    p.step = t;
    p.weight_norm = frobenius_norm(net.weight(0));
    p.predicted = w0 * std::exp(log_growth * static_cast<double>(t));
    p.rel_error = std::abs(p.weight_norm - p.predicted) / p.predicted;
    out.push_back(p);
  };
  record(0);
  for (std::uint64_t t = 1; t <= steps; ++t) {
    // A scale-invariant layer receives gradients orthogonal to its weights.
    const Matrix& w = net.weight(0);
    const Matrix g = gaussian_matrix(rows, cols, rng);
    const double along = inner_product_frobenius(g, w) / inner_product_frobenius(w, w);
    if (state) net = optimizer_step(net, GradientSet({axpy(g, -along, w)}), *state);
    record(t);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> sweep_widths(std::size_t input, std::size_t width, std::size_t depth,
                                      std::size_t classes) {
  if (depth == 0) throw std::invalid_argument("sweep_widths: depth must be positive");
  std::vector<std::size_t> widths{input};
  for (std::size_t k = 1; k < depth; ++k) widths.push_back(width);
  widths.push_back(classes);
  return widths;
}

namespace {

const std::vector<double>& default_etas(OptimizerKind kind) {
  static const std::vector<double> fromage{0.1, 0.01, 0.001};
  static const std::vector<double> sgd{1.0, 0.1, 0.01};
  static const std::vector<double> adam{0.01, 0.001, 0.0001};
  switch (kind) {
    case OptimizerKind::sgd: return sgd;
    case OptimizerKind::adam: return adam;
    default: return fromage;
  }
}

TrainSettings cell_settings(const TrainSettings& base, OptimizerKind optimizer, double eta) {
  TrainSettings s = base;
  s.optimizer = optimizer;
  s.eta = eta;
  return s;
}

}  // namespace

DepthSweepSettings depth_sweep_settings_from(const Config& config, const Dataset& data) {
  const bool full = config.get_bool("depth_sweep.full_fidelity", false);
  DepthSweepSettings s;
  s.base = train_settings_from(config, data);
  if (!config.has("epochs")) s.base.epochs = full ? 100 : 30;
  if (!config.has("schedule.kind")) {
    s.base.schedule.kind = Schedule::Kind::exponential;
    s.base.schedule.gamma = config.get_double("schedule.gamma", 0.95);
  }
  s.width = positive_size(config, "model.width", full ? 784 : 256);
  s.depths = sizes_from(config, "depth_sweep.depths",
                        full ? std::vector<long long>{2, 8, 16, 32, 50}
                             : std::vector<long long>{2, 8, 16, 32});
  for (const std::string& name : config.get_strings("depth_sweep.optimizers", {"fromage", "sgd"})) {
    const OptimizerKind kind =
        config_value("depth_sweep.optimizers", [&] { return parse_optimizer_kind(name); });
    const std::string key = "depth_sweep." + to_string(kind) + "_etas";
    s.grid.push_back({kind, config.get_doubles(key, default_etas(kind))});
  }
  s.workers = static_cast<int>(config.get_int("depth_sweep.workers", 1));
  return s;
}

std::vector<SweepCell> depth_sweep(const DepthSweepSettings& settings, const Dataset& data,
                                   std::ostream* progress) {
  std::vector<SweepCell> cells;
  for (std::size_t depth : settings.depths)
    for (const OptimizerGrid& g : settings.grid)
      for (double eta : g.etas) {
        SweepCell cell;
        cell.depth = depth;
        cell.optimizer = g.optimizer;
        cell.eta = eta;
        cells.push_back(cell);
      }

  const auto classes = static_cast<std::size_t>(data.num_classes);
  run_jobs(cells.size(), settings.workers, [&](std::size_t i) {
    SweepCell& cell = cells[i];
    TrainSettings s = cell_settings(settings.base, cell.optimizer, cell.eta);
    s.model.widths = sweep_widths(data.dim(), settings.width, cell.depth, classes);
    s.model.seed = stream_seed(settings.base.seed, SeedStream::init, cell.depth);
    const auto start = Clock::now();
    const TrainResult r = train(s, data, Mlp::initialize(s.model));
    cell.final_loss = r.final_loss;
    cell.final_accuracy = r.final_accuracy;
    cell.diverged = r.diverged;
    cell.steps = r.steps;
    cell.wall_seconds = seconds_since(start);
    if (progress) {
#pragma omp critical(fromage_progress)
      *progress << "  depth " << cell.depth << "  " << to_string(cell.optimizer) << "  eta "
                << cell.eta << "  acc " << cell.final_accuracy << (cell.diverged ? "  diverged" : "")
                << "  (" << std::fixed << std::setprecision(1) << cell.wall_seconds << " s)\n"
                << std::defaultfloat << std::setprecision(6);
    }
  });
  return cells;
}

std::vector<BestCell> best_over_eta(const std::vector<SweepCell>& cells) {
  std::vector<BestCell> out;
  for (const SweepCell& c : cells) {
    auto it = std::find_if(out.begin(), out.end(), [&](const BestCell& b) {
      return b.depth == c.depth && b.optimizer == c.optimizer;
    });
    if (it == out.end()) {
      out.push_back({c.depth, c.optimizer, c.eta, c.final_accuracy, c.diverged});
      continue;
    }
    it->all_diverged = it->all_diverged && c.diverged;
    if (c.final_accuracy > it->final_accuracy) {
      it->eta = c.eta;
      it->final_accuracy = c.final_accuracy;
    }
  }
  return out;
}

std::vector<LrCell> lr_grid(const TrainSettings& base, const Dataset& data,
                            const std::vector<OptimizerGrid>& grid, int workers,
                            std::ostream* progress) {
  std::vector<LrCell> cells;
  for (const OptimizerGrid& g : grid)
    for (double eta : g.etas) {
      LrCell cell;
      cell.optimizer = g.optimizer;
      cell.eta = eta;
      cells.push_back(cell);
    }
  if (cells.empty()) throw std::invalid_argument("lr_grid: empty grid");

  run_jobs(cells.size(), workers, [&](std::size_t i) {
    LrCell& cell = cells[i];
    TrainSettings s = cell_settings(base, cell.optimizer, cell.eta);
    s.schedule = Schedule{};
    const TrainResult r = train(s, data, Mlp::initialize(s.model));
    cell.error = r.final_loss;
    cell.final_accuracy = r.final_accuracy;
    cell.diverged = r.diverged;
    if (progress) {
#pragma omp critical(fromage_progress)
      *progress << "  " << to_string(cell.optimizer) << "  eta " << cell.eta << "  loss "
                << cell.error << (cell.diverged ? "  diverged" : "") << '\n';
    }
  });
  score_lr_cells(cells);
  return cells;
}

void score_lr_cells(std::vector<LrCell>& cells) {
  for (LrCell& cell : cells) {
    cell.score.reset();
    if (cell.diverged || !(cell.error > 0.0)) continue;
    double best = cell.error;
    for (const LrCell& other : cells)
      if (other.optimizer == cell.optimizer && !other.diverged && other.error > 0.0)
        best = std::min(best, other.error);
    cell.score = best / cell.error;
  }
}

}  // namespace fromage
