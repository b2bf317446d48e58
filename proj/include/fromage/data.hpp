#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "fromage/linalg.hpp"
#include "fromage/loss.hpp"

namespace fromage {

/// Examples are the columns of `inputs` (d x N) so a batch forward pass is a
/// single chain of matrix products.
struct Dataset {
  Matrix inputs;
  std::vector<int> labels;
  int num_classes = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return inputs.rows(); }
  void validate() const;
};

class IdxError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

/// Reads an IDX image/label pair (big-endian headers, unsigned byte payload).
/// Pixels are scaled to [0, 1]; labels give num_classes = max label + 1, at
/// least 10 so MNIST subsets keep the full output layer.
Dataset load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Writes `ds` as an IDX pair, quantising inputs to round(255 * x) clamped
/// to [0, 255]. dim must equal rows * cols.
void write_idx(const Dataset& ds, std::size_t rows, std::size_t cols,
               const std::filesystem::path& images, const std::filesystem::path& labels);

/// Class c is N(separation * mu_c, I) with mu_c = e_c when num_classes <= d,
/// otherwise evenly spaced unit vectors in the first two coordinates.
/// Examples are interleaved by class.
Dataset synthetic_gaussian_classes(int num_classes, std::size_t d, std::size_t per_class,
                                   double separation, std::uint64_t seed);

/// `count` distinct examples chosen by a seeded permutation, kept in their
/// original order. count >= ds.size() returns ds unchanged.
Dataset subset(const Dataset& ds, std::size_t count, std::uint64_t seed);

using BatchIndices = std::vector<std::size_t>;

/// Seeded permutation of [0, n) cut into consecutive batches; the last one
/// may be short.
std::vector<BatchIndices> batches(std::size_t n, std::size_t batch_size,
                                  std::uint64_t epoch_seed);

Batch gather(const Dataset& ds, std::span<const std::size_t> indices);
Batch full_batch(const Dataset& ds);

}  // namespace fromage
