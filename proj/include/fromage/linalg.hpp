#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fromage {

/// Thrown when operand shapes do not conform. The message names both shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when an operation would leave a NaN or Inf in a matrix.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major matrix of doubles. Vectors are stored as n x 1 columns.
///
/// A default constructed matrix is 0 x 0 and only exists so that containers
/// of matrices can be resized; every public operation rejects it.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix column(std::span<const double> values);
  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  Matrix col(std::size_t c) const;

  std::string shape_string() const;

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct ConditionReport {
  double sigma_max = 0.0;
  double sigma_min = 0.0;
  double kappa = 0.0;  // +inf when sigma_min == 0

  bool singular() const;
};

// Throws NonFiniteError naming `what` if any entry is NaN or Inf.
void require_finite(const Matrix& m, const char* what);
bool all_finite(const Matrix& m);

double frobenius_norm(const Matrix& m);
double inner_product_frobenius(const Matrix& a, const Matrix& b);
/// Euclidean norm of every column.
std::vector<double> column_norms(const Matrix& m);

Matrix matmul(const Matrix& a, const Matrix& b);
/// a^T * b without materialising the transpose at the call site.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a * b^T
Matrix matmul_nt(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& m, double factor);
/// a + factor * b
Matrix axpy(const Matrix& a, double factor, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
/// diag(d) * m, with d given as the diagonal entries.
Matrix scale_rows(std::span<const double> d, const Matrix& m);

/// Largest and smallest singular values by one-sided Jacobi (Hestenes)
/// rotations applied to the smaller dimension. Relative accuracy is close to
/// machine precision for both extremes, including sigma_min.
ConditionReport singular_extremes(const Matrix& m);

/// All min(rows, cols) singular values in decreasing order, same method.
std::vector<double> singular_values(const Matrix& m);

}  // namespace fromage
