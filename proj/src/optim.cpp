#include "fromage/optim.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

namespace fromage {

OptimizerKind parse_optimizer_kind(std::string_view name) {
  if (name == "fromage") return OptimizerKind::fromage;
  if (name == "lars") return OptimizerKind::lars;
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  throw std::invalid_argument("unknown optimizer '" + std::string(name) + "'");
}

std::string to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::lars: return "lars";
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::adam: return "adam";
    default: return "fromage";
  }
}

OptimizerState OptimizerState::create(OptimizerKind kind, double eta, const Mlp& net,
                                      OptimizerHyper hyper, bool clamp) {
  if (!(eta > 0.0)) throw std::invalid_argument("optimizer: eta must be positive");
  if (!(hyper.epsilon_floor > 0.0))
    throw std::invalid_argument("optimizer: epsilon_floor must be positive");
  OptimizerState state;
  state.kind = kind;
  state.eta = eta;
  state.hyper = hyper;
  auto zeros = [&] {
    std::vector<Matrix> out;
    for (const Matrix& w : net.weights()) out.emplace_back(w.rows(), w.cols());
    return out;
  };
  if (kind == OptimizerKind::sgd) state.velocity = zeros();
  if (kind == OptimizerKind::adam) {
    state.first_moment = zeros();
    state.second_moment = zeros();
  }
  if (clamp) state.clamp_norms = net.weight_norms();
  return state;
}

namespace {

void check_step_inputs(const Mlp& net, const GradientSet& grads, const OptimizerState& state,
                       OptimizerKind expected) {
  if (state.kind != expected)
    throw std::invalid_argument("optimizer: state is for " + to_string(state.kind) + ", not " +
                                to_string(expected));
  if (grads.size() != net.depth())
    throw ShapeError("optimizer: " + std::to_string(grads.size()) + " gradients for depth " +
                     std::to_string(net.depth()));
  for (std::size_t k = 0; k < net.depth(); ++k) {
    if (!grads.grads[k].same_shape(net.weight(k)))
      throw ShapeError("optimizer: gradient " + grads.grads[k].shape_string() + " for layer " +
                       std::to_string(k + 1) + " of shape " + net.weight(k).shape_string());
    if (!all_finite(grads.grads[k]))
      throw NonFiniteError("optimizer: non-finite gradient in layer " + std::to_string(k + 1));
  }
}

}  // namespace

std::vector<Matrix> relative_update(const Mlp& net, const GradientSet& grads, double eta,
                                    double floor, std::size_t* weight_floor_hits) {
  std::vector<Matrix> deltas;
  deltas.reserve(net.depth());
  for (std::size_t k = 0; k < net.depth(); ++k) {
    const Matrix& w = net.weight(k);
    const double g_norm = grads.norms[k];
    if (g_norm < floor) {
      deltas.emplace_back(w.rows(), w.cols());
      continue;
    }
    double w_norm = frobenius_norm(w);
    if (w_norm < floor) {
      w_norm = floor;
      if (weight_floor_hits) ++*weight_floor_hits;
      std::cerr << "warning: layer " << k + 1 << " weight norm below epsilon_floor\n";
    }
    deltas.push_back(scale(grads.grads[k], -eta * w_norm / g_norm));
  }
  return deltas;
}

Mlp fromage_step(const Mlp& net, const GradientSet& grads, OptimizerState& state) {
  check_step_inputs(net, grads, state, OptimizerKind::fromage);
  const double eta = state.eta;
  const double prefactor = 1.0 / std::sqrt(1.0 + eta * eta);
  const std::vector<Matrix> deltas =
      relative_update(net, grads, eta, state.hyper.epsilon_floor, &state.weight_floor_hits);
  std::vector<Matrix> weights;
  weights.reserve(net.depth());
  for (std::size_t k = 0; k < net.depth(); ++k) {
    if (grads.norms[k] < state.hyper.epsilon_floor) {
      weights.push_back(net.weight(k));
      continue;
    }
    Matrix w = add(net.weight(k), deltas[k]);
    for (double& v : w.values()) v *= prefactor;
    weights.push_back(std::move(w));
  }
  ++state.steps;
  return Mlp(net.config(), std::move(weights));
}

Mlp lars_step(const Mlp& net, const GradientSet& grads, OptimizerState& state) {
  check_step_inputs(net, grads, state, OptimizerKind::lars);
  const double eta = state.eta;
  const double decay = 1.0 - eta * state.hyper.weight_decay;
  const std::vector<Matrix> deltas =
      relative_update(net, grads, eta, state.hyper.epsilon_floor, &state.weight_floor_hits);
  std::vector<Matrix> weights;
  weights.reserve(net.depth());
  for (std::size_t k = 0; k < net.depth(); ++k) {
    Matrix w = net.weight(k);
    if (state.hyper.weight_decay > 0.0)
      for (double& v : w.values()) v *= decay;
    weights.push_back(add(w, deltas[k]));
  }
  ++state.steps;
  return Mlp(net.config(), std::move(weights));
}

Mlp sgd_step(const Mlp& net, const GradientSet& grads, OptimizerState& state) {
  check_step_inputs(net, grads, state, OptimizerKind::sgd);
  const double mu = state.hyper.momentum;
  std::vector<Matrix> velocity;
  std::vector<Matrix> weights;
  for (std::size_t k = 0; k < net.depth(); ++k) {
    velocity.push_back(axpy(grads.grads[k], mu, state.velocity[k]));
    weights.push_back(axpy(net.weight(k), -state.eta, velocity.back()));
  }
  Mlp next(net.config(), std::move(weights));
  state.velocity = std::move(velocity);
  ++state.steps;
  return next;
}

Mlp adam_step(const Mlp& net, const GradientSet& grads, OptimizerState& state) {
  check_step_inputs(net, grads, state, OptimizerKind::adam);
  const auto& h = state.hyper;
  const std::uint64_t t = state.steps + 1;
  const double correction1 = 1.0 - std::pow(h.beta1, static_cast<double>(t));
  const double correction2 = 1.0 - std::pow(h.beta2, static_cast<double>(t));
  std::vector<Matrix> first = state.first_moment;
  std::vector<Matrix> second = state.second_moment;
  std::vector<Matrix> weights;
  for (std::size_t k = 0; k < net.depth(); ++k) {
    Matrix w = net.weight(k);
    auto m = first[k].values();
    auto v = second[k].values();
    const auto g = grads.grads[k].values();
    auto wv = w.values();
    for (std::size_t i = 0; i < wv.size(); ++i) {
      m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
      v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      wv[i] -= state.eta * m_hat / (std::sqrt(v_hat) + h.epsilon);
    }
    require_finite(w, "adam_step");
    weights.push_back(std::move(w));
  }
  Mlp next(net.config(), std::move(weights));
  state.first_moment = std::move(first);
  state.second_moment = std::move(second);
  state.steps = t;
  return next;
}

Mlp optimizer_step(const Mlp& net, const GradientSet& grads, OptimizerState& state) {
  Mlp next = [&] {
    switch (state.kind) {
      case OptimizerKind::lars: return lars_step(net, grads, state);
      case OptimizerKind::sgd: return sgd_step(net, grads, state);
      case OptimizerKind::adam: return adam_step(net, grads, state);
      default: return fromage_step(net, grads, state);
    }
  }();
  if (state.clamp_norms) return apply_norm_clamp(next, *state.clamp_norms);
  return next;
}

Mlp apply_norm_clamp(const Mlp& net, std::span<const double> initial_norms) {
  if (initial_norms.size() != net.depth())
    throw ShapeError("apply_norm_clamp: " + std::to_string(initial_norms.size()) +
                     " caps for depth " + std::to_string(net.depth()));
  std::vector<Matrix> weights;
  weights.reserve(net.depth());
  for (std::size_t k = 0; k < net.depth(); ++k) {
    const double norm = frobenius_norm(net.weight(k));
    if (norm > initial_norms[k]) {
      weights.push_back(scale(net.weight(k), initial_norms[k] / norm));
    } else {
      weights.push_back(net.weight(k));
    }
  }
  return Mlp(net.config(), std::move(weights));
}

void Schedule::validate() const {
  if (kind == Kind::decay_on_plateau && !(factor > 0.0 && factor < 1.0))
    throw std::invalid_argument("schedule: plateau factor must lie in (0, 1)");
  if (kind == Kind::decay_on_plateau && patience < 1)
    throw std::invalid_argument("schedule: patience must be at least 1");
  if (kind == Kind::exponential && !(gamma > 0.0 && gamma < 1.0))
    throw std::invalid_argument("schedule: gamma must lie in (0, 1)");
}

Schedule::Kind parse_schedule_kind(std::string_view name) {
  if (name == "constant") return Schedule::Kind::constant;
  if (name == "exponential") return Schedule::Kind::exponential;
  if (name == "decay_on_plateau" || name == "plateau") return Schedule::Kind::decay_on_plateau;
  throw std::invalid_argument("unknown schedule '" + std::string(name) + "'");
}

std::string to_string(Schedule::Kind kind) {
  switch (kind) {
    case Schedule::Kind::exponential: return "exponential";
    case Schedule::Kind::decay_on_plateau: return "decay_on_plateau";
    default: return "constant";
  }
}

double schedule_eta(const Schedule& schedule, std::span<const double> history, int /*epoch*/,
                    double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("schedule_eta: eta must be positive");
  switch (schedule.kind) {
    case Schedule::Kind::exponential: return eta * schedule.gamma;
    case Schedule::Kind::decay_on_plateau: {
      const std::size_t patience = static_cast<std::size_t>(schedule.patience);
      if (history.size() <= patience) return eta;
      const auto split = history.end() - static_cast<std::ptrdiff_t>(patience);
      const double best_before = *std::min_element(history.begin(), split);
      const double best_recent = *std::min_element(split, history.end());
      const bool improved = best_recent <= best_before - 1e-3 * std::abs(best_before);
      return improved ? eta : eta * schedule.factor;
    }
    default: return eta;
  }
}

}  // namespace fromage
