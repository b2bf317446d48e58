#include "fromage/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fromage/kernels.hpp"

namespace fromage {

namespace {

void require_nonempty(const Matrix& m, const char* what) {
  if (m.empty()) throw ShapeError(std::string(what) + ": empty matrix");
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_string() + " vs " +
                     b.shape_string());
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
  if (rows == 0 || cols == 0) throw ShapeError("Matrix: dimensions must be positive");
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (rows == 0 || cols == 0) throw ShapeError("Matrix: dimensions must be positive");
  if (data_.size() != rows * cols)
    throw ShapeError("Matrix: " + std::to_string(data_.size()) + " values for shape " +
                     shape_string());
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  if (rows.size() == 0) throw ShapeError("from_rows: no rows");
  const std::size_t cols = rows.begin()->size();
  std::vector<double> data;
  data.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    if (r.size() != cols) throw ShapeError("from_rows: ragged rows");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Matrix(rows.size(), cols, std::move(data));
}

Matrix Matrix::column(std::span<const double> values) {
  return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> values) {
  Matrix m(values.size(), values.size());
  for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
  return m;
}

Matrix Matrix::col(std::size_t c) const {
  if (c >= cols_) throw ShapeError("col: index out of range for " + shape_string());
  Matrix out(rows_, 1);
  for (std::size_t r = 0; r < rows_; ++r) out(r, 0) = (*this)(r, c);
  return out;
}

std::string Matrix::shape_string() const {
  std::ostringstream os;
  os << rows_ << "x" << cols_;
  return os.str();
}

bool ConditionReport::singular() const { return std::isinf(kappa); }

bool all_finite(const Matrix& m) {
  return std::all_of(m.values().begin(), m.values().end(),
                     [](double v) { return std::isfinite(v); });
}

void require_finite(const Matrix& m, const char* what) {
  if (!all_finite(m))
    throw NonFiniteError(std::string(what) + ": non-finite entry in " + m.shape_string() +
                         " result");
}

// Accumulated in long double so that norm identities hold to a few ulps.
double frobenius_norm(const Matrix& m) {
  require_nonempty(m, "frobenius_norm");
  long double sum = 0.0L;
  for (double v : m.values()) sum += static_cast<long double>(v) * v;
  return static_cast<double>(std::sqrt(sum));
}

double inner_product_frobenius(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "inner_product_frobenius");
  require_nonempty(a, "inner_product_frobenius");
  long double sum = 0.0L;
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) sum += static_cast<long double>(av[i]) * bv[i];
  return static_cast<double>(sum);
}

std::vector<double> column_norms(const Matrix& m) {
  require_nonempty(m, "column_norms");
  std::vector<double> sums(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) sums[c] += row[c] * row[c];
  }
  for (double& s : sums) s = std::sqrt(s);
  return sums;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  require_nonempty(a, "matmul");
  require_nonempty(b, "matmul");
  if (a.cols() != b.rows())
    throw ShapeError("matmul: shape mismatch " + a.shape_string() + " * " + b.shape_string());
  Matrix c(a.rows(), b.cols());
  kernels::gemm(a.rows(), b.cols(), a.cols(), a.data(), b.data(), c.data());
  require_finite(c, "matmul");
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  require_nonempty(a, "matmul_tn");
  require_nonempty(b, "matmul_tn");
  if (a.rows() != b.rows())
    throw ShapeError("matmul_tn: shape mismatch " + a.shape_string() + "^T * " +
                     b.shape_string());
  return matmul(transpose(a), b);
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  require_nonempty(a, "matmul_nt");
  require_nonempty(b, "matmul_nt");
  if (a.cols() != b.cols())
    throw ShapeError("matmul_nt: shape mismatch " + a.shape_string() + " * " +
                     b.shape_string() + "^T");
  return matmul(a, transpose(b));
}

Matrix transpose(const Matrix& m) {
  require_nonempty(m, "transpose");
  Matrix out(m.cols(), m.rows());
  kernels::transpose(m.rows(), m.cols(), m.data(), out.data());
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) { return axpy(a, 1.0, b); }

Matrix sub(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "sub");
  require_nonempty(a, "sub");
  Matrix out = a;
  auto ov = out.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] -= bv[i];
  require_finite(out, "sub");
  return out;
}

Matrix scale(const Matrix& m, double factor) {
  require_nonempty(m, "scale");
  Matrix out = m;
  for (double& v : out.values()) v *= factor;
  require_finite(out, "scale");
  return out;
}

Matrix axpy(const Matrix& a, double factor, const Matrix& b) {
  require_same_shape(a, b, "axpy");
  require_nonempty(a, "axpy");
  Matrix out = a;
  auto ov = out.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] += factor * bv[i];
  require_finite(out, "axpy");
  return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "hadamard");
  require_nonempty(a, "hadamard");
  Matrix out = a;
  auto ov = out.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] *= bv[i];
  require_finite(out, "hadamard");
  return out;
}

Matrix scale_rows(std::span<const double> d, const Matrix& m) {
  require_nonempty(m, "scale_rows");
  if (d.size() != m.rows())
    throw ShapeError("scale_rows: " + std::to_string(d.size()) + " factors for " +
                     m.shape_string());
  Matrix out = m;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (double& v : out.row(r)) v *= d[r];
  require_finite(out, "scale_rows");
  return out;
}

namespace {

constexpr int kMaxSweeps = 80;

// Rows of `work` are the vectors to be orthogonalised (columns of the smaller
// Gram dimension). On return their norms are the singular values.
std::vector<double> jacobi_row_norms(Matrix work, const std::string& shape) {
  const std::size_t count = work.rows();
  const std::size_t len = work.cols();
  const double tol = std::numeric_limits<double>::epsilon() * static_cast<double>(len);

  auto dot = [&](std::size_t i, std::size_t j) {
    const double* x = work.data() + i * len;
    const double* y = work.data() + j * len;
    long double s = 0.0L;
    for (std::size_t t = 0; t < len; ++t) s += static_cast<long double>(x[t]) * y[t];
    return static_cast<double>(s);
  };

  bool converged = count < 2;
  for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
    converged = true;
    for (std::size_t i = 0; i + 1 < count; ++i) {
      for (std::size_t j = i + 1; j < count; ++j) {
        const double alpha = dot(i, i);
        const double beta = dot(j, j);
        const double gamma = dot(i, j);
        if (alpha == 0.0 || beta == 0.0) continue;
        if (std::abs(gamma) <= tol * std::sqrt(alpha) * std::sqrt(beta)) continue;
        converged = false;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
        const double c = 1.0 / std::hypot(1.0, t);
        const double s = c * t;
        double* x = work.data() + i * len;
        double* y = work.data() + j * len;
        for (std::size_t p = 0; p < len; ++p) {
          const double xi = x[p];
          const double yi = y[p];
          x[p] = c * xi - s * yi;
          y[p] = s * xi + c * yi;
        }
      }
    }
  }
  if (!converged)
    throw std::runtime_error("singular_extremes: Jacobi sweeps did not converge for " +
                             shape + " matrix");

  std::vector<double> sigma(count);
  for (std::size_t i = 0; i < count; ++i) sigma[i] = std::sqrt(std::max(0.0, dot(i, i)));
  std::sort(sigma.begin(), sigma.end(), std::greater<>());
  return sigma;
}

}  // namespace

std::vector<double> singular_values(const Matrix& m) {
  require_nonempty(m, "singular_values");
  require_finite(m, "singular_values");
  // Tall: orthogonalise the columns (rows of m^T). Wide: the rows of m.
  return m.rows() >= m.cols() ? jacobi_row_norms(transpose(m), m.shape_string())
                              : jacobi_row_norms(m, m.shape_string());
}

ConditionReport singular_extremes(const Matrix& m) {
  const std::vector<double> sigma = singular_values(m);
  ConditionReport report;
  report.sigma_max = sigma.front();
  report.sigma_min = sigma.back();
  report.kappa = report.sigma_min > 0.0 ? report.sigma_max / report.sigma_min
                                        : std::numeric_limits<double>::infinity();
  return report;
}

}  // namespace fromage
