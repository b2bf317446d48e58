#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fromage/net.hpp"

namespace fromage {

/// Relative tolerance on "measured <= bound", absorbing float round-off.
inline constexpr double kBoundTolerance = 1e-9;

struct BoundContext {
  std::size_t depth = 0;
  std::optional<std::size_t> layer;
  double alpha = 1.0;
  double beta = 1.0;
  double kappa = 1.0;
  double r_max = 0.0;
};

/// A measured quantity next to the bound that should dominate it.
struct BoundComparison {
  double measured = 0.0;
  double bound = 0.0;
  bool satisfied = false;
  double slack = 0.0;  // bound - measured
  BoundContext context;
  bool hypothesis_violated = false;  // e.g. relu, which has no positive alpha
  std::string note;

  static BoundComparison make(double measured, double bound, BoundContext context = {});
};

/// measured <= bound + kBoundTolerance * |bound|
bool within_bound(double measured, double bound);

/// Layerwise relative perturbation sizes r_k = ||dW_k|| / ||W_k||.
struct PerturbationSpec {
  std::vector<Matrix> deltas;
  std::vector<double> relative_sizes;

  static PerturbationSpec from(const Mlp& net, std::vector<Matrix> deltas);
  double max_relative_size() const;
};

/// Two-scalar network f(x) = a b x perturbed to (a + da)(b + db) x.
BoundComparison toy_scalar_bound(double a, double b, double da, double db);

/// Largest condition number over W_l, perturbed W_l and dW_l. Zero dW_l are
/// skipped (their kappa is undefined); `skipped` receives how many were.
double max_condition_number(const Mlp& net, const Mlp& perturbed,
                            std::size_t* skipped = nullptr);

/// ||f~(x) - f(x)|| / ||f(x)||  against
/// (beta/alpha kappa^2)^L [prod_k (1 + r_k) - 1].
BoundComparison functional_bound(const Mlp& net, const Mlp& perturbed, const Matrix& x);

/// ||J~_l - J_l||_F / ||J_l||_F  against
/// (beta/alpha kappa^2)^(L-l) [prod_{k=l+1..L} (beta/alpha)(1 + r_k) - 1].
BoundComparison jacobian_bound(const Mlp& net, const Mlp& perturbed, const Matrix& x,
                               std::size_t l);

/// ||Mt X|| / ||M Y||  against  kappa_cap^2 ||Mt|| ||X|| / (||M|| ||Y||).
/// Mt and M must both have condition number <= kappa_cap, and must not be
/// wide: a wide M has a null space, so ||M Y|| has no lower bound in ||Y||.
BoundComparison matrix_conditioning_check(const Matrix& mt, const Matrix& m, const Matrix& x,
                                          const Matrix& y, double kappa_cap);

/// prod_k (1 + r_k) - 1
double drt_model(std::span<const double> relative_sizes);

/// (1 + cos_theta)^(1/L) - 1. Returns -1 at cos_theta = -1 (no step size
/// guarantees descent).
double descent_threshold(std::size_t depth, double cos_theta);

struct DescentReport {
  BoundComparison comparison;  // measured = LHS, bound = RHS
  double lhs = 0.0;            // L(W + dW) - L(W)
  double rhs = 0.0;
  std::vector<double> cos_theta;      // per layer; 0 for an untouched layer
  std::vector<double> max_breakdown;  // per layer, max over the t grid
  std::size_t grid_size = 0;
  double refinement_change = 0.0;  // relative change of the max on the 2x grid
  bool refinement_ok = false;      // refinement_change < 1%
};

/// Both sides of the integrated descent inequality
///   L(W + dW) - L(W) <= -sum_l ||g_l|| ||dW_l|| [cos theta_l - max_t b_l(t)]
/// with b_l(t) = ||g_l(W + t dW) - g_l(W)|| / ||g_l(W)||, the max taken over a
/// uniform grid of `grid_size` points in [0, 1]. A satisfied report is
/// evidence rather than proof, since the true max may fall between points.
DescentReport descent_inequality_check(const Mlp& net, std::span<const Matrix> deltas,
                                       const Batch& batch, LossKind loss,
                                       std::size_t grid_size = 64);

/// ||g_l(W + dW) - g_l(W)|| / ||g_l(W)|| on the given batch.
double gradient_breakdown_measured(const Mlp& net, std::span<const Matrix> deltas,
                                   const Batch& batch, LossKind loss, std::size_t l);

}  // namespace fromage
