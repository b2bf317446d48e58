#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fromage/linalg.hpp"
#include "fromage/loss.hpp"

namespace fromage {

enum class Activation { identity, relu, leaky_relu };

/// Elementwise nonlinearity together with its transmission constants.
///
/// alpha and beta bound how much the map can shrink or stretch vectors and
/// their differences. leaky_relu(a) transmits between a and 1. relu does not
/// satisfy the lower bound for any alpha > 0; it is modelled as
/// alpha = beta = 1/2 and flagged through violates_transmission().
///
/// Derivatives at 0 follow the negative branch: relu'(0) = 0 and
/// leaky_relu'(0) = a.
struct Nonlinearity {
  Activation kind = Activation::identity;
  double slope = 1.0;  // negative-branch slope of leaky_relu
  double alpha = 1.0;
  double beta = 1.0;

  static Nonlinearity identity();
  static Nonlinearity relu();
  static Nonlinearity leaky_relu(double slope);

  bool violates_transmission() const { return kind == Activation::relu; }

  double apply(double x) const {
    switch (kind) {
      case Activation::relu: return x > 0.0 ? x : 0.0;
      case Activation::leaky_relu: return x > 0.0 ? x : slope * x;
      default: return x;
    }
  }

  double derivative(double x) const {
    switch (kind) {
      case Activation::relu: return x > 0.0 ? 1.0 : 0.0;
      case Activation::leaky_relu: return x > 0.0 ? 1.0 : slope;
      default: return 1.0;
    }
  }

  std::string name() const;
  static Nonlinearity parse(std::string_view name, double slope);
};

enum class InitKind { glorot_uniform, orthogonal, scaled_gaussian };

InitKind parse_init_kind(std::string_view name);
std::string to_string(InitKind kind);

struct MlpConfig {
  std::vector<std::size_t> widths;  // n_0 .. n_L
  Nonlinearity nonlinearity = Nonlinearity::identity();
  bool final_nonlinearity = true;  // apply phi after W_L as well
  InitKind init = InitKind::glorot_uniform;
  // Gain applied to every init scheme. For scaled_gaussian the entries are
  // N(0, init_scale^2 / fan_in).
  double init_scale = 1.0;
  std::uint64_t seed = 0;

  std::size_t depth() const { return widths.empty() ? 0 : widths.size() - 1; }
  void validate() const;

  bool operator==(const MlpConfig&) const;
};

/// Bias-free multilayer perceptron. weights()[k] is W_{k+1} with shape
/// n_{k+1} x n_k, so layer numbering in the docs is one-based.
class Mlp {
 public:
  /// Draws weights from config.init using config.seed.
  static Mlp initialize(const MlpConfig& config);

  Mlp(MlpConfig config, std::vector<Matrix> weights);

  const MlpConfig& config() const { return config_; }
  std::size_t depth() const { return weights_.size(); }
  const std::vector<Matrix>& weights() const { return weights_; }
  const Matrix& weight(std::size_t k) const { return weights_.at(k); }
  std::vector<double> weight_norms() const;

 private:
  MlpConfig config_;
  std::vector<Matrix> weights_;
};

/// Cached hidden states of one forward pass over a batch (examples as columns).
struct ForwardTrace {
  std::vector<Matrix> hidden;  // h_0 .. h_L, h_0 = x
  std::vector<Matrix> pre;     // pre[k] = z_{k+1} = W_{k+1} h_k

  const Matrix& output() const { return hidden.back(); }
};

struct GradientSet {
  std::vector<Matrix> grads;
  std::vector<double> norms;

  GradientSet() = default;
  explicit GradientSet(std::vector<Matrix> g);

  std::size_t size() const { return grads.size(); }
};

struct Evaluation {
  double loss = 0.0;
  std::size_t correct = 0;
  std::size_t count = 0;
  GradientSet gradients;

  double accuracy() const {
    return count == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(count);
  }
};

ForwardTrace forward(const Mlp& net, const Matrix& x);

/// Network output only; does not retain the hidden states.
Matrix predict(const Mlp& net, const Matrix& x);

/// Batch-averaged loss and exact gradients with respect to every W_l.
Evaluation loss_and_gradients(const Mlp& net, const Batch& batch, LossKind loss);

/// Loss and accuracy without gradients.
Evaluation evaluate(const Mlp& net, const Batch& batch, LossKind loss);

/// d f / d h_l for a single-example trace, 0 <= l < L:
///   Phi'_L W_L Phi'_{L-1} W_{L-1} ... Phi'_{l+1} W_{l+1}
/// where Phi'_k = diag(phi'(z_k)) (the identity for an un-activated last layer).
Matrix jacobian_layer_to_output(const ForwardTrace& trace, const Mlp& net, std::size_t l);

/// New network with weights W_l + deltas[l]; the input network is untouched.
Mlp perturb(const Mlp& net, std::span<const Matrix> deltas);

}  // namespace fromage
