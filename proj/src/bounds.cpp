#include "fromage/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fromage {

bool within_bound(double measured, double bound) {
  return measured <= bound + kBoundTolerance * std::abs(bound);
}

BoundComparison BoundComparison::make(double measured, double bound, BoundContext context) {
  BoundComparison c;
  c.measured = measured;
  c.bound = bound;
  c.satisfied = within_bound(measured, bound);
  c.slack = bound - measured;
  c.context = context;
  return c;
}

PerturbationSpec PerturbationSpec::from(const Mlp& net, std::vector<Matrix> deltas) {
  if (deltas.size() != net.depth())
    throw ShapeError("PerturbationSpec: " + std::to_string(deltas.size()) +
                     " deltas for depth " + std::to_string(net.depth()));
  PerturbationSpec spec;
  for (std::size_t k = 0; k < net.depth(); ++k) {
    if (!deltas[k].same_shape(net.weight(k)))
      throw ShapeError("PerturbationSpec: delta " + deltas[k].shape_string() + " for layer " +
                       net.weight(k).shape_string());
    spec.relative_sizes.push_back(frobenius_norm(deltas[k]) / frobenius_norm(net.weight(k)));
  }
  spec.deltas = std::move(deltas);
  return spec;
}

double PerturbationSpec::max_relative_size() const {
  return relative_sizes.empty()
             ? 0.0
             : *std::max_element(relative_sizes.begin(), relative_sizes.end());
}

BoundComparison toy_scalar_bound(double a, double b, double da, double db) {
  if (a == 0.0 || b == 0.0)
    throw std::invalid_argument("toy_scalar_bound: a and b must be nonzero");
  const double measured = std::abs((a + da) * (b + db) - a * b) / std::abs(a * b);
  const double bound = (1.0 + std::abs(da) / std::abs(a)) * (1.0 + std::abs(db) / std::abs(b)) - 1.0;
  BoundContext ctx;
  ctx.depth = 2;
  ctx.r_max = std::max(std::abs(da / a), std::abs(db / b));
  return BoundComparison::make(measured, bound, ctx);
}

namespace {

void check_pair(const Mlp& net, const Mlp& perturbed, const char* what) {
  if (net.config().widths != perturbed.config().widths)
    throw ShapeError(std::string(what) + ": networks have different architectures");
  const Nonlinearity& phi = net.config().nonlinearity;
  if (phi.alpha == 0.0)
    throw std::invalid_argument(std::string(what) +
                                ": alpha = 0, the transmission hypothesis fails");
}

std::vector<double> relative_sizes(const Mlp& net, const Mlp& perturbed) {
  std::vector<double> r;
  for (std::size_t k = 0; k < net.depth(); ++k)
    r.push_back(frobenius_norm(sub(perturbed.weight(k), net.weight(k))) /
                frobenius_norm(net.weight(k)));
  return r;
}

BoundContext context_for(const Mlp& net, double kappa, const std::vector<double>& r) {
  BoundContext ctx;
  ctx.depth = net.depth();
  ctx.alpha = net.config().nonlinearity.alpha;
  ctx.beta = net.config().nonlinearity.beta;
  ctx.kappa = kappa;
  ctx.r_max = r.empty() ? 0.0 : *std::max_element(r.begin(), r.end());
  return ctx;
}

double euclidean_norm(const Matrix& v) { return frobenius_norm(v); }

void annotate(BoundComparison& c, const Mlp& net, std::size_t skipped) {
  c.hypothesis_violated = net.config().nonlinearity.violates_transmission();
  if (c.hypothesis_violated) c.note = "relu violates the transmission hypothesis";
  if (skipped > 0) {
    if (!c.note.empty()) c.note += "; ";
    c.note += std::to_string(skipped) + " zero perturbation(s) excluded from kappa";
  }
}

}  // namespace

double max_condition_number(const Mlp& net, const Mlp& perturbed, std::size_t* skipped) {
  double kappa = 1.0;
  std::size_t zero = 0;
  for (std::size_t k = 0; k < net.depth(); ++k) {
    kappa = std::max(kappa, singular_extremes(net.weight(k)).kappa);
    kappa = std::max(kappa, singular_extremes(perturbed.weight(k)).kappa);
    const Matrix delta = sub(perturbed.weight(k), net.weight(k));
    if (frobenius_norm(delta) == 0.0) {
      ++zero;
      continue;
    }
    kappa = std::max(kappa, singular_extremes(delta).kappa);
  }
  if (skipped) *skipped = zero;
  return kappa;
}

BoundComparison functional_bound(const Mlp& net, const Mlp& perturbed, const Matrix& x) {
  check_pair(net, perturbed, "functional_bound");
  if (x.cols() != 1) throw ShapeError("functional_bound: x must be a single column");
  const Matrix f = predict(net, x);
  const double f_norm = euclidean_norm(f);
  if (f_norm == 0.0)
    throw std::domain_error("functional_bound: f(x) = 0, relative difference undefined");
  const double measured = euclidean_norm(sub(predict(perturbed, x), f)) / f_norm;

  std::size_t skipped = 0;
  const double kappa = max_condition_number(net, perturbed, &skipped);
  const std::vector<double> r = relative_sizes(net, perturbed);
  const Nonlinearity& phi = net.config().nonlinearity;
  const double ratio = phi.beta / phi.alpha;
  const double depth = static_cast<double>(net.depth());
  const double bound = std::pow(ratio * kappa * kappa, depth) * drt_model(r);

  BoundComparison c = BoundComparison::make(measured, bound, context_for(net, kappa, r));
  annotate(c, net, skipped);
  return c;
}

BoundComparison jacobian_bound(const Mlp& net, const Mlp& perturbed, const Matrix& x,
                               std::size_t l) {
  check_pair(net, perturbed, "jacobian_bound");
  if (x.cols() != 1) throw ShapeError("jacobian_bound: x must be a single column");
  const std::size_t depth = net.depth();
  if (l >= depth)
    throw std::out_of_range("jacobian_bound: layer " + std::to_string(l) + " outside [0, " +
                            std::to_string(depth - 1) + "]");
  const Matrix jac = jacobian_layer_to_output(forward(net, x), net, l);
  const double jac_norm = frobenius_norm(jac);
  if (jac_norm == 0.0) throw std::domain_error("jacobian_bound: zero Jacobian");
  const Matrix jac_tilde = jacobian_layer_to_output(forward(perturbed, x), perturbed, l);
  const double measured = frobenius_norm(sub(jac_tilde, jac)) / jac_norm;

  std::size_t skipped = 0;
  const double kappa = max_condition_number(net, perturbed, &skipped);
  const std::vector<double> r = relative_sizes(net, perturbed);
  const Nonlinearity& phi = net.config().nonlinearity;
  const double ratio = phi.beta / phi.alpha;
  double product = 1.0;
  for (std::size_t k = l; k < depth; ++k) product *= ratio * (1.0 + r[k]);
  const double bound =
      std::pow(ratio * kappa * kappa, static_cast<double>(depth - l)) * (product - 1.0);

  BoundContext ctx = context_for(net, kappa, r);
  ctx.layer = l;
  BoundComparison c = BoundComparison::make(measured, bound, ctx);
  annotate(c, net, skipped);
  return c;
}

BoundComparison matrix_conditioning_check(const Matrix& mt, const Matrix& m, const Matrix& x,
                                          const Matrix& y, double kappa_cap) {
  if (!mt.same_shape(m))
    throw ShapeError("matrix_conditioning_check: " + mt.shape_string() + " vs " +
                     m.shape_string());
  if (m.rows() < m.cols())
    throw ShapeError("matrix_conditioning_check: M " + m.shape_string() +
                     " is wide; the lemma needs full column rank");
  const double kappa_m = singular_extremes(m).kappa;
  const double kappa_mt = singular_extremes(mt).kappa;
  if (!within_bound(kappa_m, kappa_cap) || !within_bound(kappa_mt, kappa_cap))
    throw std::invalid_argument("matrix_conditioning_check: condition number " +
                                std::to_string(std::max(kappa_m, kappa_mt)) +
                                " exceeds kappa_cap " + std::to_string(kappa_cap));
  const double denom = frobenius_norm(matmul(m, y));
  if (denom == 0.0) throw std::domain_error("matrix_conditioning_check: ||M Y|| = 0");
  const double measured = frobenius_norm(matmul(mt, x)) / denom;
  const double bound = kappa_cap * kappa_cap * frobenius_norm(mt) * frobenius_norm(x) /
                       (frobenius_norm(m) * frobenius_norm(y));
  BoundContext ctx;
  ctx.kappa = kappa_cap;
  return BoundComparison::make(measured, bound, ctx);
}

double drt_model(std::span<const double> relative_sizes) {
  double product = 1.0;
  for (double r : relative_sizes) {
    if (r < 0.0) throw std::invalid_argument("drt_model: relative sizes must be nonnegative");
    product *= 1.0 + r;
  }
  return product - 1.0;
}

double descent_threshold(std::size_t depth, double cos_theta) {
  if (depth == 0) throw std::invalid_argument("descent_threshold: depth must be positive");
  if (!(cos_theta >= -1.0 && cos_theta <= 1.0))
    throw std::invalid_argument("descent_threshold: cos_theta must lie in [-1, 1]");
  if (cos_theta == -1.0) return -1.0;
  return std::pow(1.0 + cos_theta, 1.0 / static_cast<double>(depth)) - 1.0;
}

namespace {

std::vector<Matrix> scaled_deltas(std::span<const Matrix> deltas, double t) {
  std::vector<Matrix> out;
  out.reserve(deltas.size());
  for (const Matrix& d : deltas) out.push_back(scale(d, t));
  return out;
}

// Per-layer max over the grid t_i = i / (points - 1) of the relative gradient change.
std::vector<double> max_breakdown_on_grid(const Mlp& net, std::span<const Matrix> deltas,
                                          const Batch& batch, LossKind loss,
                                          const GradientSet& base, std::size_t points) {
  std::vector<double> best(net.depth(), 0.0);
  for (std::size_t i = 1; i < points; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(points - 1);
    const Mlp moved = perturb(net, scaled_deltas(deltas, t));
    const GradientSet g = loss_and_gradients(moved, batch, loss).gradients;
    for (std::size_t k = 0; k < net.depth(); ++k)
      best[k] = std::max(best[k], frobenius_norm(sub(g.grads[k], base.grads[k])) / base.norms[k]);
  }
  return best;
}

}  // namespace

DescentReport descent_inequality_check(const Mlp& net, std::span<const Matrix> deltas,
                                       const Batch& batch, LossKind loss,
                                       std::size_t grid_size) {
  if (grid_size < 2) throw std::invalid_argument("descent_inequality_check: grid_size < 2");
  if (deltas.size() != net.depth())
    throw ShapeError("descent_inequality_check: delta count does not match depth");
  const Evaluation base = loss_and_gradients(net, batch, loss);
  for (std::size_t k = 0; k < net.depth(); ++k)
    if (base.gradients.norms[k] == 0.0)
      throw std::domain_error("descent_inequality_check: zero gradient in layer " +
                              std::to_string(k + 1));

  DescentReport report;
  report.grid_size = grid_size;
  report.lhs = evaluate(perturb(net, deltas), batch, loss).loss - base.loss;
  report.max_breakdown =
      max_breakdown_on_grid(net, deltas, batch, loss, base.gradients, grid_size);
  const std::vector<double> refined =
      max_breakdown_on_grid(net, deltas, batch, loss, base.gradients, 2 * grid_size - 1);

  double rhs = 0.0;
  double worst_change = 0.0;
  for (std::size_t k = 0; k < net.depth(); ++k) {
    const double g_norm = base.gradients.norms[k];
    const double d_norm = frobenius_norm(deltas[k]);
    double cos_theta = 0.0;
    if (d_norm > 0.0)
      cos_theta = -inner_product_frobenius(deltas[k], base.gradients.grads[k]) / (g_norm * d_norm);
    report.cos_theta.push_back(cos_theta);
    rhs -= g_norm * d_norm * (cos_theta - report.max_breakdown[k]);
    if (report.max_breakdown[k] > 0.0)
      worst_change = std::max(worst_change, (refined[k] - report.max_breakdown[k]) /
                                                report.max_breakdown[k]);
  }
  report.rhs = rhs;
  report.refinement_change = worst_change;
  report.refinement_ok = worst_change < 0.01;

  BoundContext ctx;
  ctx.depth = net.depth();
  ctx.alpha = net.config().nonlinearity.alpha;
  ctx.beta = net.config().nonlinearity.beta;
  double r_max = 0.0;
  for (std::size_t k = 0; k < net.depth(); ++k)
    r_max = std::max(r_max, frobenius_norm(deltas[k]) / frobenius_norm(net.weight(k)));
  ctx.r_max = r_max;
  report.comparison = BoundComparison::make(report.lhs, report.rhs, ctx);
  report.comparison.note = "max over t approximated on a " + std::to_string(grid_size) +
                           "-point grid";
  return report;
}

double gradient_breakdown_measured(const Mlp& net, std::span<const Matrix> deltas,
                                   const Batch& batch, LossKind loss, std::size_t l) {
  if (l >= net.depth())
    throw std::out_of_range("gradient_breakdown_measured: layer " + std::to_string(l) +
                            " out of range");
  const GradientSet base = loss_and_gradients(net, batch, loss).gradients;
  if (base.norms[l] == 0.0)
    throw std::domain_error("gradient_breakdown_measured: zero gradient in layer " +
                            std::to_string(l + 1));
  const GradientSet moved = loss_and_gradients(perturb(net, deltas), batch, loss).gradients;
  return frobenius_norm(sub(moved.grads[l], base.grads[l])) / base.norms[l];
}

}  // namespace fromage
