#pragma once

#include <cstddef>

// Raw dense kernels behind Matrix. All operands are row-major and contiguous.
//
// Each kernel exists in two flavours: a plain serial reference used by the
// tests as an oracle, and a blocked kernel that is OpenMP-parallel over row
// tiles of the output. The blocked kernel sums over the inner dimension in
// the same order for every thread count, so its result does not depend on
// OMP_NUM_THREADS.

namespace fromage::kernels {

enum class Exec { serial, parallel };

namespace reference {

// c[m x n] = a[m x k] * b[k x n]
void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
          double* c);

void transpose(std::size_t rows, std::size_t cols, const double* in, double* out);

}  // namespace reference

// c[m x n] = a[m x k] * b[k x n]
void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
          double* c, Exec exec = Exec::parallel);

void transpose(std::size_t rows, std::size_t cols, const double* in, double* out,
               Exec exec = Exec::parallel);

// Number of threads the parallel flavour will use.
int max_threads();

}  // namespace fromage::kernels
