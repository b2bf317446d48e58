#include "fromage/net.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "fromage/random.hpp"

namespace fromage {

Nonlinearity Nonlinearity::identity() { return {Activation::identity, 1.0, 1.0, 1.0}; }

Nonlinearity Nonlinearity::relu() { return {Activation::relu, 0.0, 0.5, 0.5}; }

Nonlinearity Nonlinearity::leaky_relu(double slope) {
  if (!(slope > 0.0 && slope <= 1.0))
    throw std::invalid_argument("leaky_relu: slope must lie in (0, 1], got " +
                                std::to_string(slope));
  return {Activation::leaky_relu, slope, slope, 1.0};
}

std::string Nonlinearity::name() const {
  switch (kind) {
    case Activation::relu: return "relu";
    case Activation::leaky_relu: {
      std::ostringstream os;
      os << "leaky_relu(" << slope << ")";
      return os.str();
    }
    default: return "identity";
  }
}

Nonlinearity Nonlinearity::parse(std::string_view name, double slope) {
  if (name == "identity") return identity();
  if (name == "relu") return relu();
  if (name == "leaky_relu") return leaky_relu(slope);
  throw std::invalid_argument("unknown nonlinearity '" + std::string(name) + "'");
}

InitKind parse_init_kind(std::string_view name) {
  if (name == "glorot_uniform") return InitKind::glorot_uniform;
  if (name == "orthogonal") return InitKind::orthogonal;
  if (name == "scaled_gaussian") return InitKind::scaled_gaussian;
  throw std::invalid_argument("unknown init '" + std::string(name) + "'");
}

std::string to_string(InitKind kind) {
  switch (kind) {
    case InitKind::orthogonal: return "orthogonal";
    case InitKind::scaled_gaussian: return "scaled_gaussian";
    default: return "glorot_uniform";
  }
}

void MlpConfig::validate() const {
  if (widths.size() < 2) throw std::invalid_argument("MlpConfig: need at least one layer");
  for (std::size_t w : widths)
    if (w == 0) throw std::invalid_argument("MlpConfig: widths must be positive");
  if (!(init_scale > 0.0)) throw std::invalid_argument("MlpConfig: init_scale must be positive");
}

bool MlpConfig::operator==(const MlpConfig& o) const {
  return widths == o.widths && nonlinearity.kind == o.nonlinearity.kind &&
         nonlinearity.slope == o.nonlinearity.slope &&
         final_nonlinearity == o.final_nonlinearity && init == o.init &&
         init_scale == o.init_scale && seed == o.seed;
}

Mlp Mlp::initialize(const MlpConfig& config) {
  config.validate();
  Rng rng = make_rng(config.seed);
  std::vector<Matrix> weights;
  weights.reserve(config.depth());
  for (std::size_t k = 0; k < config.depth(); ++k) {
    const std::size_t fan_in = config.widths[k];
    const std::size_t fan_out = config.widths[k + 1];
    Matrix w;
    switch (config.init) {
      case InitKind::glorot_uniform: {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        w = scale(uniform_matrix(fan_out, fan_in, rng, -limit, limit), config.init_scale);
        break;
      }
      case InitKind::orthogonal:
        w = scale(orthogonal_matrix(fan_out, fan_in, rng), config.init_scale);
        break;
      case InitKind::scaled_gaussian:
        w = gaussian_matrix(fan_out, fan_in, rng,
                            config.init_scale / std::sqrt(static_cast<double>(fan_in)));
        break;
    }
    if (frobenius_norm(w) == 0.0)
      throw std::runtime_error("Mlp::initialize: layer " + std::to_string(k + 1) +
                               " initialised to zero");
    weights.push_back(std::move(w));
  }
  return Mlp(config, std::move(weights));
}

Mlp::Mlp(MlpConfig config, std::vector<Matrix> weights)
    : config_(std::move(config)), weights_(std::move(weights)) {
  config_.validate();
  if (weights_.size() != config_.depth())
    throw ShapeError("Mlp: " + std::to_string(weights_.size()) + " weights for depth " +
                     std::to_string(config_.depth()));
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    const Matrix& w = weights_[k];
    if (w.rows() != config_.widths[k + 1] || w.cols() != config_.widths[k])
      throw ShapeError("Mlp: layer " + std::to_string(k + 1) + " has shape " +
                       w.shape_string() + ", expected " + std::to_string(config_.widths[k + 1]) +
                       "x" + std::to_string(config_.widths[k]));
    require_finite(w, "Mlp");
  }
}

std::vector<double> Mlp::weight_norms() const {
  std::vector<double> norms;
  norms.reserve(weights_.size());
  for (const Matrix& w : weights_) norms.push_back(frobenius_norm(w));
  return norms;
}

GradientSet::GradientSet(std::vector<Matrix> g) : grads(std::move(g)) {
  norms.reserve(grads.size());
  for (const Matrix& m : grads) norms.push_back(frobenius_norm(m));
}

namespace {

bool activated(const Mlp& net, std::size_t k) {
  return k + 1 < net.depth() || net.config().final_nonlinearity;
}

Matrix apply_elementwise(const Nonlinearity& phi, const Matrix& z) {
  Matrix out = z;
  for (double& v : out.values()) v = phi.apply(v);
  return out;
}

Matrix derivative_elementwise(const Nonlinearity& phi, const Matrix& z) {
  Matrix out = z;
  for (double& v : out.values()) v = phi.derivative(v);
  return out;
}

void check_input(const Mlp& net, const Matrix& x) {
  if (x.empty() || x.rows() != net.config().widths.front())
    throw ShapeError("forward: input " + x.shape_string() + " for input width " +
                     std::to_string(net.config().widths.front()));
}

Evaluation run(const Mlp& net, const Batch& batch, LossKind loss, bool with_gradient) {
  check_input(net, batch.inputs);
  if (batch.size() == 0) throw std::invalid_argument("loss_and_gradients: empty batch");

  Evaluation eval;
  eval.count = batch.size();
  if (!with_gradient) {
    const LossValue value = evaluate_loss(predict(net, batch.inputs), batch, loss, false);
    eval.loss = value.loss;
    eval.correct = value.correct;
    return eval;
  }

  const ForwardTrace trace = forward(net, batch.inputs);
  LossValue value = evaluate_loss(trace.output(), batch, loss, true);
  eval.loss = value.loss;
  eval.correct = value.correct;

  const Nonlinearity& phi = net.config().nonlinearity;
  const std::size_t depth = net.depth();
  std::vector<Matrix> grads(depth);
  // delta = d loss / d z_k, starting from the output layer
  Matrix delta = std::move(value.output_grad);
  for (std::size_t k = depth; k-- > 0;) {
    if (activated(net, k)) delta = hadamard(delta, derivative_elementwise(phi, trace.pre[k]));
    grads[k] = matmul_nt(delta, trace.hidden[k]);
    if (k > 0) delta = matmul_tn(net.weight(k), delta);
  }
  eval.gradients = GradientSet(std::move(grads));
  return eval;
}

}  // namespace

ForwardTrace forward(const Mlp& net, const Matrix& x) {
  check_input(net, x);
  const Nonlinearity& phi = net.config().nonlinearity;
  ForwardTrace trace;
  trace.hidden.reserve(net.depth() + 1);
  trace.pre.reserve(net.depth());
  trace.hidden.push_back(x);
  for (std::size_t k = 0; k < net.depth(); ++k) {
    trace.pre.push_back(matmul(net.weight(k), trace.hidden.back()));
    trace.hidden.push_back(activated(net, k) ? apply_elementwise(phi, trace.pre.back())
                                             : trace.pre.back());
  }
  return trace;
}

Matrix predict(const Mlp& net, const Matrix& x) {
  check_input(net, x);
  const Nonlinearity& phi = net.config().nonlinearity;
  Matrix h = x;
  for (std::size_t k = 0; k < net.depth(); ++k) {
    h = matmul(net.weight(k), h);
    if (activated(net, k))
      for (double& v : h.values()) v = phi.apply(v);
  }
  return h;
}

Evaluation loss_and_gradients(const Mlp& net, const Batch& batch, LossKind loss) {
  return run(net, batch, loss, true);
}

Evaluation evaluate(const Mlp& net, const Batch& batch, LossKind loss) {
  return run(net, batch, loss, false);
}

Matrix jacobian_layer_to_output(const ForwardTrace& trace, const Mlp& net, std::size_t l) {
  const std::size_t depth = net.depth();
  if (l >= depth)
    throw std::out_of_range("jacobian_layer_to_output: layer " + std::to_string(l) +
                            " outside [0, " + std::to_string(depth - 1) + "]");
  if (trace.pre.size() != depth || trace.hidden.empty() || trace.hidden.front().cols() != 1)
    throw ShapeError("jacobian_layer_to_output: needs a single-example trace of this network");

  const Nonlinearity& phi = net.config().nonlinearity;
  auto factor = [&](std::size_t k) {
    if (!activated(net, k)) return net.weight(k);
    const Matrix d = derivative_elementwise(phi, trace.pre[k]);
    return scale_rows(d.values(), net.weight(k));
  };

  Matrix jac = factor(depth - 1);
  for (std::size_t k = depth - 1; k-- > l;) jac = matmul(jac, factor(k));
  return jac;
}

Mlp perturb(const Mlp& net, std::span<const Matrix> deltas) {
  if (deltas.size() != net.depth())
    throw ShapeError("perturb: " + std::to_string(deltas.size()) + " deltas for depth " +
                     std::to_string(net.depth()));
  std::vector<Matrix> weights;
  weights.reserve(net.depth());
  for (std::size_t k = 0; k < net.depth(); ++k) weights.push_back(add(net.weight(k), deltas[k]));
  return Mlp(net.config(), std::move(weights));
}

}  // namespace fromage
