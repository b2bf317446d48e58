#include <algorithm>
#include <cmath>
#include <exception>
#include <random>
#include <stdexcept>

#include "fromage/experiments.hpp"
#include "fromage/random.hpp"

namespace fromage {

std::string to_string(BoundCheck check) {
  switch (check) {
    case BoundCheck::functional: return "functional";
    case BoundCheck::jacobian: return "jacobian";
    case BoundCheck::conditioning: return "conditioning";
    case BoundCheck::toy: return "toy";
    case BoundCheck::descent: return "descent";
  }
  return "unknown";
}

BoundSweepSettings bound_sweep_settings_from(const Config& config) {
  BoundSweepSettings s;
  auto count = [&](const char* key, std::size_t fallback) {
    const long long v = config.get_int(key, static_cast<long long>(fallback));
    if (v < 0) throw ConfigError(std::string("config: '") + key + "' must be >= 0");
    return static_cast<std::size_t>(v);
  };
  s.seed = config.get_u64("seed", 0);
  s.trials = count("verify_bounds.trials", s.trials);
  s.depths.clear();
  for (long long d : config.get_ints("verify_bounds.depths", {1, 2, 4, 8})) {
    if (d <= 0) throw ConfigError("config: 'verify_bounds.depths' entries must be positive");
    s.depths.push_back(static_cast<std::size_t>(d));
  }
  s.slopes = config.get_doubles("verify_bounds.slopes", s.slopes);
  s.relative_sizes = config.get_doubles("verify_bounds.relative_sizes", s.relative_sizes);
  s.width = count("verify_bounds.width", s.width);
  if (s.width == 0) throw ConfigError("config: 'verify_bounds.width' must be positive");
  s.nonlinearity = config.get_string("verify_bounds.nonlinearity", s.nonlinearity);
  if (s.nonlinearity != "leaky_relu" && s.nonlinearity != "relu" && s.nonlinearity != "identity")
    throw ConfigError("config: 'verify_bounds.nonlinearity' must be leaky_relu, relu or identity");
  s.fault_scale = config.get_double("verify_bounds.fault_scale", s.fault_scale);
  if (!(s.fault_scale > 0.0)) throw ConfigError("config: 'verify_bounds.fault_scale' must be positive");
  s.lemma_trials = count("verify_bounds.lemma_trials", s.lemma_trials);
  s.toy_trials = count("verify_bounds.toy_trials", s.toy_trials);
  s.descent_trials = count("verify_bounds.descent_trials", s.descent_trials);
  s.descent_grid = count("verify_bounds.descent_grid", s.descent_grid);
  return s;
}

namespace {

struct NetCase {
  Nonlinearity phi;
  std::size_t depth = 0;
  double relative_size = 0.0;
};

std::vector<NetCase> net_cases(const BoundSweepSettings& s) {
  std::vector<Nonlinearity> phis;
  if (s.nonlinearity == "leaky_relu") {
    for (double a : s.slopes) phis.push_back(Nonlinearity::leaky_relu(a));
  } else if (s.nonlinearity == "relu") {
    phis.push_back(Nonlinearity::relu());
  } else {
    phis.push_back(Nonlinearity::identity());
  }
  std::vector<NetCase> out;
  for (const Nonlinearity& phi : phis)
    for (std::size_t depth : s.depths)
      for (double r : s.relative_sizes) out.push_back({phi, depth, r});
  return out;
}

Mlp random_net(const Nonlinearity& phi, std::size_t width, std::size_t depth, Rng& rng) {
  MlpConfig config;
  config.widths.assign(depth + 1, width);
  config.nonlinearity = phi;
  config.final_nonlinearity = true;
  std::vector<Matrix> weights;
  for (std::size_t k = 0; k < depth; ++k) weights.push_back(gaussian_matrix(width, width, rng));
  return Mlp(config, std::move(weights));
}

// Deltas of relative size r in random Gaussian directions.
std::vector<Matrix> random_deltas(const Mlp& net, double r, Rng& rng) {
  std::vector<Matrix> deltas;
  for (const Matrix& w : net.weights()) {
    const Matrix g = gaussian_matrix(w.rows(), w.cols(), rng);
    deltas.push_back(scale(g, r * frobenius_norm(w) / frobenius_norm(g)));
  }
  return deltas;
}

BoundRow to_row(BoundCheck check, const BoundComparison& c, double fault_scale) {
  BoundRow row;
  row.check = check;
  row.depth = c.context.depth;
  row.layer = c.context.layer;
  row.alpha = c.context.alpha;
  row.beta = c.context.beta;
  row.kappa = c.context.kappa;
  row.r_max = c.context.r_max;
  row.measured = c.measured;
  row.bound = c.bound * fault_scale;
  row.satisfied = within_bound(row.measured, row.bound);
  row.hypothesis_violated = c.hypothesis_violated;
  row.asserted = !c.hypothesis_violated;
  return row;
}

std::vector<BoundRow> theorem_trial(const NetCase& nc, const BoundSweepSettings& s, Rng& rng) {
  const Mlp net = random_net(nc.phi, s.width, nc.depth, rng);
  const Mlp moved = perturb(net, random_deltas(net, nc.relative_size, rng));
  const Matrix x = gaussian_matrix(s.width, 1, rng);
  std::vector<BoundRow> rows;
  rows.push_back(to_row(BoundCheck::functional, functional_bound(net, moved, x), s.fault_scale));
  for (std::size_t l = 0; l < nc.depth; ++l)
    rows.push_back(
        to_row(BoundCheck::jacobian, jacobian_bound(net, moved, x, l), s.fault_scale));
  return rows;
}

// Rank-one product of random factors, so rank(X) = 1 < min(rows, cols).
Matrix rank_one(std::size_t rows, std::size_t cols, Rng& rng) {
  return matmul(gaussian_matrix(rows, 1, rng), gaussian_matrix(1, cols, rng));
}

BoundRow lemma_trial(std::size_t index, const BoundSweepSettings& s, Rng& rng) {
  std::uniform_int_distribution<std::size_t> dim(1, 6);
  std::uniform_int_distribution<std::size_t> extra(0, 3);
  const std::size_t cols = dim(rng);
  const std::size_t rows = cols + extra(rng);
  const std::size_t batch = dim(rng);
  const Matrix m = gaussian_matrix(rows, cols, rng);
  // Alternate between an unrelated second matrix and a small perturbation of M.
  const Matrix mt = index % 2 == 0 ? gaussian_matrix(rows, cols, rng)
                                   : add(m, gaussian_matrix(rows, cols, rng, 0.05));
  const bool deficient = index % 3 == 0;
  const Matrix x = deficient ? rank_one(cols, batch, rng) : gaussian_matrix(cols, batch, rng);
  const Matrix y = deficient ? rank_one(cols, batch, rng) : gaussian_matrix(cols, batch, rng);
  const double cap = std::max(singular_extremes(m).kappa, singular_extremes(mt).kappa);
  BoundComparison c = matrix_conditioning_check(mt, m, x, y, cap);
  return to_row(BoundCheck::conditioning, c, s.fault_scale);
}

BoundRow toy_trial(std::size_t index, const BoundSweepSettings& s, Rng& rng) {
  std::uniform_real_distribution<double> mag(0.1, 2.0);
  std::uniform_real_distribution<double> rel(0.0, 0.5);
  std::bernoulli_distribution coin(0.5);
  auto sign = [&]() { return coin(rng) ? 1.0 : -1.0; };
  const double a = sign() * mag(rng);
  const double b = sign() * mag(rng);
  // Even trials push both factors outward (the saturating case).
  const double da = (index % 2 == 0 ? 1.0 : sign()) * rel(rng) * a;
  const double db = (index % 2 == 0 ? 1.0 : sign()) * rel(rng) * b;
  return to_row(BoundCheck::toy, toy_scalar_bound(a, b, da, db), s.fault_scale);
}

BoundRow descent_trial(std::size_t index, const BoundSweepSettings& s, Rng& rng) {
  const auto cases = net_cases(s);
  const NetCase& nc = cases[index % cases.size()];
  const std::size_t depth = std::min<std::size_t>(nc.depth, 4);
  const Mlp net = random_net(nc.phi, s.width, depth, rng);
  Batch batch{gaussian_matrix(s.width, 8, rng), {}, std::nullopt};
  std::uniform_int_distribution<int> label(0, static_cast<int>(s.width) - 1);
  for (std::size_t i = 0; i < 8; ++i) batch.labels.push_back(label(rng));

  std::vector<Matrix> deltas;
  if (index % 2 == 0) {
    const Evaluation ev = loss_and_gradients(net, batch, LossKind::softmax_cross_entropy);
    deltas = relative_update(net, ev.gradients, nc.relative_size, 1e-12);
  } else {
    deltas = random_deltas(net, nc.relative_size, rng);
  }
  const DescentReport report = descent_inequality_check(
      net, deltas, batch, LossKind::softmax_cross_entropy, s.descent_grid);
  return to_row(BoundCheck::descent, report.comparison, s.fault_scale);
}

}  // namespace

BoundSweepResult verify_bounds(const BoundSweepSettings& s) {
  const auto cases = net_cases(s);
  const std::size_t theorem_trials = cases.size() * s.trials;
  const std::size_t lemma_begin = theorem_trials;
  const std::size_t toy_begin = lemma_begin + s.lemma_trials;
  const std::size_t descent_begin = toy_begin + s.toy_trials;
  const std::size_t total = descent_begin + s.descent_trials;

  std::vector<std::vector<BoundRow>> per_trial(total);
  std::vector<std::exception_ptr> errors(total);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::size_t t = 0; t < total; ++t) {
    const std::uint64_t seed = s.seed + t;
    Rng rng = make_rng(seed);
    try {
      std::vector<BoundRow> rows;
      if (t < lemma_begin) {
        rows = theorem_trial(cases[t / s.trials], s, rng);
      } else if (t < toy_begin) {
        rows.push_back(lemma_trial(t - lemma_begin, s, rng));
      } else if (t < descent_begin) {
        rows.push_back(toy_trial(t - toy_begin, s, rng));
      } else {
        rows.push_back(descent_trial(t - descent_begin, s, rng));
      }
      for (BoundRow& row : rows) {
        row.trial = t;
        row.seed = seed;
      }
      per_trial[t] = std::move(rows);
    } catch (...) {
      errors[t] = std::current_exception();
    }
  }
  for (std::size_t t = 0; t < total; ++t) {
    if (!errors[t]) continue;
    try {
      std::rethrow_exception(errors[t]);
    } catch (const std::exception& e) {
      throw std::runtime_error("verify_bounds: trial " + std::to_string(t) + " (seed " +
                               std::to_string(s.seed + t) + ") failed: " + e.what());
    }
  }

  BoundSweepResult result;
  for (auto& rows : per_trial) {
    for (BoundRow& row : rows) {
      if (row.asserted) {
        ++result.asserted;
        if (!row.satisfied) {
          ++result.violations;
          if (result.offending_seeds.empty() || result.offending_seeds.back() != row.seed)
            result.offending_seeds.push_back(row.seed);
        }
      }
      result.rows.push_back(std::move(row));
    }
  }
  return result;
}

}  // namespace fromage
