#include "fromage/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fromage {

LossKind parse_loss_kind(std::string_view name) {
  if (name == "softmax_cross_entropy" || name == "cross_entropy")
    return LossKind::softmax_cross_entropy;
  if (name == "mean_squared_error" || name == "mse") return LossKind::mean_squared_error;
  throw std::invalid_argument("unknown loss '" + std::string(name) + "'");
}

std::string to_string(LossKind kind) {
  return kind == LossKind::softmax_cross_entropy ? "softmax_cross_entropy"
                                                 : "mean_squared_error";
}

namespace {

void check_labels(const Batch& batch, std::size_t classes) {
  if (batch.labels.size() != batch.size())
    throw std::invalid_argument("loss: " + std::to_string(batch.labels.size()) +
                                " labels for a batch of " + std::to_string(batch.size()));
  for (int label : batch.labels)
    if (label < 0 || static_cast<std::size_t>(label) >= classes)
      throw std::out_of_range("loss: label " + std::to_string(label) + " out of range [0, " +
                              std::to_string(classes) + ")");
}

std::size_t argmax_hits(const Matrix& outputs, const std::vector<int>& labels) {
  if (labels.size() != outputs.cols()) return 0;
  std::size_t hits = 0;
  for (std::size_t j = 0; j < outputs.cols(); ++j) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < outputs.rows(); ++i)
      if (outputs(i, j) > outputs(best, j)) best = i;
    if (static_cast<int>(best) == labels[j]) ++hits;
  }
  return hits;
}

}  // namespace

LossValue evaluate_loss(const Matrix& outputs, const Batch& batch, LossKind kind,
                        bool with_gradient) {
  if (batch.inputs.empty() || batch.size() == 0)
    throw std::invalid_argument("loss: empty batch");
  if (outputs.cols() != batch.size())
    throw ShapeError("loss: outputs " + outputs.shape_string() + " for a batch of " +
                     std::to_string(batch.size()));
  const std::size_t n = outputs.rows();
  const std::size_t count = outputs.cols();
  const double inv = 1.0 / static_cast<double>(count);

  LossValue result;
  if (with_gradient) result.output_grad = Matrix(n, count);

  if (kind == LossKind::softmax_cross_entropy) {
    check_labels(batch, n);
    double total = 0.0;
    std::vector<double> column(n);
    for (std::size_t j = 0; j < count; ++j) {
      double peak = outputs(0, j);
      for (std::size_t i = 1; i < n; ++i) peak = std::max(peak, outputs(i, j));
      double denom = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        column[i] = std::exp(outputs(i, j) - peak);
        denom += column[i];
      }
      const int y = batch.labels[j];
      total += std::log(denom) + peak - outputs(static_cast<std::size_t>(y), j);
      if (with_gradient) {
        for (std::size_t i = 0; i < n; ++i) {
          const double p = column[i] / denom;
          result.output_grad(i, j) = (p - (static_cast<int>(i) == y ? 1.0 : 0.0)) * inv;
        }
      }
    }
    result.loss = total * inv;
  } else {
    if (batch.targets) {
      if (!batch.targets->same_shape(outputs))
        throw ShapeError("loss: targets " + batch.targets->shape_string() + " vs outputs " +
                         outputs.shape_string());
    } else {
      check_labels(batch, n);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < count; ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        const double target = batch.targets
                                  ? (*batch.targets)(i, j)
                                  : (batch.labels[j] == static_cast<int>(i) ? 1.0 : 0.0);
        const double r = outputs(i, j) - target;
        total += 0.5 * r * r;
        if (with_gradient) result.output_grad(i, j) = r * inv;
      }
    }
    result.loss = total * inv;
  }
  result.correct = argmax_hits(outputs, batch.labels);
  return result;
}

}  // namespace fromage
