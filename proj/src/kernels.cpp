#include "fromage/kernels.hpp"

#include <algorithm>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fromage::kernels {

namespace reference {

void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
          double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double sum = 0.0;
      for (std::size_t p = 0; p < k; ++p) sum += a[i * k + p] * b[p * n + j];
      c[i * n + j] = sum;
    }
  }
}

void transpose(std::size_t rows, std::size_t cols, const double* in, double* out) {
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[j * rows + i] = in[i * cols + j];
}

}  // namespace reference

namespace {

constexpr std::size_t kMr = 4;   // rows of c per micro tile
constexpr std::size_t kNr = 16;  // cols of c per micro tile (two 512-bit lanes)

// b is packed into ceil(n / kNr) panels, each k x kNr contiguous, zero padded.
std::vector<double> pack_b(std::size_t n, std::size_t k, const double* b) {
  const std::size_t panels = (n + kNr - 1) / kNr;
  std::vector<double> packed(panels * k * kNr, 0.0);
  for (std::size_t jp = 0; jp < panels; ++jp) {
    const std::size_t j0 = jp * kNr;
    const std::size_t width = std::min(kNr, n - j0);
    double* dst = packed.data() + jp * k * kNr;
    for (std::size_t p = 0; p < k; ++p) {
      const double* src = b + p * n + j0;
      for (std::size_t j = 0; j < width; ++j) dst[p * kNr + j] = src[j];
    }
  }
  return packed;
}

template <std::size_t Rows>
inline void micro_tile(std::size_t k, std::size_t lda, const double* a, const double* panel,
                       double* c, std::size_t ldc, std::size_t width) {
  double acc[Rows][kNr] = {};
  for (std::size_t p = 0; p < k; ++p) {
    const double* bp = panel + p * kNr;
    for (std::size_t r = 0; r < Rows; ++r) {
      const double ar = a[r * lda + p];
#pragma omp simd
      for (std::size_t j = 0; j < kNr; ++j) acc[r][j] += ar * bp[j];
    }
  }
  for (std::size_t r = 0; r < Rows; ++r)
    for (std::size_t j = 0; j < width; ++j) c[r * ldc + j] = acc[r][j];
}

void row_tile(std::size_t i0, std::size_t m, std::size_t n, std::size_t k, const double* a,
              const double* packed, double* c) {
  const std::size_t rows = std::min(kMr, m - i0);
  const std::size_t panels = (n + kNr - 1) / kNr;
  for (std::size_t jp = 0; jp < panels; ++jp) {
    const std::size_t j0 = jp * kNr;
    const std::size_t width = std::min(kNr, n - j0);
    const double* panel = packed + jp * k * kNr;
    const double* ai = a + i0 * k;
    double* ci = c + i0 * n + j0;
    switch (rows) {
      case 4: micro_tile<4>(k, k, ai, panel, ci, n, width); break;
      case 3: micro_tile<3>(k, k, ai, panel, ci, n, width); break;
      case 2: micro_tile<2>(k, k, ai, panel, ci, n, width); break;
      default: micro_tile<1>(k, k, ai, panel, ci, n, width); break;
    }
  }
}

}  // namespace

void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
          double* c, Exec exec) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    std::fill(c, c + m * n, 0.0);
    return;
  }
  const std::vector<double> packed = pack_b(n, k, b);
  const std::size_t tiles = (m + kMr - 1) / kMr;
  const long long tile_count = static_cast<long long>(tiles);
  if (exec == Exec::parallel && m * n * k > 32 * 32 * 32) {
#pragma omp parallel for schedule(static)
    for (long long t = 0; t < tile_count; ++t)
      row_tile(static_cast<std::size_t>(t) * kMr, m, n, k, a, packed.data(), c);
  } else {
    for (long long t = 0; t < tile_count; ++t)
      row_tile(static_cast<std::size_t>(t) * kMr, m, n, k, a, packed.data(), c);
  }
}

void transpose(std::size_t rows, std::size_t cols, const double* in, double* out, Exec exec) {
  constexpr std::size_t kBlock = 32;
  const long long row_blocks = static_cast<long long>((rows + kBlock - 1) / kBlock);
  auto block = [&](long long rb) {
    const std::size_t i0 = static_cast<std::size_t>(rb) * kBlock;
    const std::size_t i1 = std::min(rows, i0 + kBlock);
    for (std::size_t j0 = 0; j0 < cols; j0 += kBlock) {
      const std::size_t j1 = std::min(cols, j0 + kBlock);
      for (std::size_t i = i0; i < i1; ++i)
        for (std::size_t j = j0; j < j1; ++j) out[j * rows + i] = in[i * cols + j];
    }
  };
  if (exec == Exec::parallel && rows * cols > 64 * 64) {
#pragma omp parallel for schedule(static)
    for (long long rb = 0; rb < row_blocks; ++rb) block(rb);
  } else {
    for (long long rb = 0; rb < row_blocks; ++rb) block(rb);
  }
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace fromage::kernels
