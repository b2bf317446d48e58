#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fromage/net.hpp"

namespace fromage {

enum class OptimizerKind { fromage, lars, sgd, adam };

OptimizerKind parse_optimizer_kind(std::string_view name);
std::string to_string(OptimizerKind kind);

struct OptimizerHyper {
  double momentum = 0.9;      // sgd heavy ball
  double beta1 = 0.9;         // adam
  double beta2 = 0.999;       // adam
  double epsilon = 1e-8;      // adam
  double weight_decay = 0.0;  // lars, decoupled
  double epsilon_floor = 1e-12;
};

/// Everything an optimizer carries between steps. Each weight matrix is one
/// parameter group.
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::fromage;
  double eta = 0.01;
  OptimizerHyper hyper;
  std::vector<Matrix> velocity;       // sgd
  std::vector<Matrix> first_moment;   // adam
  std::vector<Matrix> second_moment;  // adam
  std::uint64_t steps = 0;
  std::optional<std::vector<double>> clamp_norms;  // per-layer caps, from init
  std::size_t weight_floor_hits = 0;

  /// Buffers are zero-initialised in the shape of `net`. With `clamp`, the
  /// current layer norms of `net` become the caps.
  static OptimizerState create(OptimizerKind kind, double eta, const Mlp& net,
                               OptimizerHyper hyper = {}, bool clamp = false);
};

/// -eta * (||W_l|| / ||g_l||) * g_l per layer; a zero matrix for layers whose
/// gradient norm is below `floor`. ||W_l|| is floored at `floor` in the ratio.
std::vector<Matrix> relative_update(const Mlp& net, const GradientSet& grads, double eta,
                                    double floor, std::size_t* weight_floor_hits = nullptr);

/// W_l <- (W_l + relative_update_l) / sqrt(1 + eta^2). Layers with a
/// vanishing gradient are left bitwise unchanged, prefactor included.
Mlp fromage_step(const Mlp& net, const GradientSet& grads, OptimizerState& state);

/// W_l <- (1 - eta * lambda) W_l + relative_update_l, no prefactor.
Mlp lars_step(const Mlp& net, const GradientSet& grads, OptimizerState& state);

/// v <- mu v + g;  W <- W - eta v
Mlp sgd_step(const Mlp& net, const GradientSet& grads, OptimizerState& state);

/// Bias-corrected Adam.
Mlp adam_step(const Mlp& net, const GradientSet& grads, OptimizerState& state);

/// Dispatches on state.kind, then applies the norm clamp if one is set.
Mlp optimizer_step(const Mlp& net, const GradientSet& grads, OptimizerState& state);

/// Rescales any layer whose norm exceeds its cap back onto the cap.
Mlp apply_norm_clamp(const Mlp& net, std::span<const double> initial_norms);

struct Schedule {
  enum class Kind { constant, decay_on_plateau, exponential };
  Kind kind = Kind::constant;
  double factor = 0.1;  // decay_on_plateau multiplier
  int patience = 5;     // epochs without a 0.1% improvement
  double gamma = 0.9;   // exponential multiplier per epoch

  void validate() const;
};

Schedule::Kind parse_schedule_kind(std::string_view name);
std::string to_string(Schedule::Kind kind);

/// Learning rate for the next epoch, given the one just used.
///
/// constant returns eta. exponential returns eta * gamma. decay_on_plateau
/// returns eta * factor when the best loss of the last `patience` entries of
/// `history` failed to improve on the best earlier entry by at least 0.1%;
/// callers restart `history` after a decay.
double schedule_eta(const Schedule& schedule, std::span<const double> history, int epoch,
                    double eta);

}  // namespace fromage
