#include "fromage/random.hpp"

#include <cmath>

namespace fromage {

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = dist(rng);
  return m;
}

Matrix uniform_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = dist(rng);
  return m;
}

Matrix orthogonal_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  const bool tall = rows >= cols;
  const std::size_t count = tall ? cols : rows;
  const std::size_t len = tall ? rows : cols;
  // Rows of `basis` are orthonormalised by modified Gram-Schmidt, run twice.
  Matrix basis = gaussian_matrix(count, len, rng);
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t i = 0; i < count; ++i) {
      auto vi = basis.row(i);
      for (std::size_t j = 0; j < i; ++j) {
        const auto vj = basis.row(j);
        double dot = 0.0;
        for (std::size_t t = 0; t < len; ++t) dot += vi[t] * vj[t];
        for (std::size_t t = 0; t < len; ++t) vi[t] -= dot * vj[t];
      }
      double norm = 0.0;
      for (double v : vi) norm += v * v;
      norm = std::sqrt(norm);
      for (double& v : vi) v /= norm;
    }
  }
  return tall ? transpose(basis) : basis;
}

}  // namespace fromage
