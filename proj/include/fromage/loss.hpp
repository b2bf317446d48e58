#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fromage/linalg.hpp"

namespace fromage {

enum class LossKind { softmax_cross_entropy, mean_squared_error };

LossKind parse_loss_kind(std::string_view name);
std::string to_string(LossKind kind);

/// A materialised minibatch: one example per column.
///
/// Mean squared error regresses onto `targets` when present and onto one-hot
/// encoded labels otherwise. Cross-entropy always uses the labels.
struct Batch {
  Matrix inputs;
  std::vector<int> labels;
  std::optional<Matrix> targets;

  std::size_t size() const { return inputs.cols(); }
};

struct LossValue {
  double loss = 0.0;
  std::size_t correct = 0;  // argmax hits; 0 when the batch carries no labels
  Matrix output_grad;       // d loss / d outputs, same shape as the outputs
};

/// Batch-averaged loss of network outputs (n_out x B) plus its gradient.
///
/// softmax_cross_entropy: mean over columns of logsumexp(o) - o[label].
/// mean_squared_error:    mean over columns of 0.5 * ||o - t||^2.
LossValue evaluate_loss(const Matrix& outputs, const Batch& batch, LossKind kind,
                        bool with_gradient = true);

}  // namespace fromage
