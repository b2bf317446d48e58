#pragma once

#include <cstdint>
#include <random>

#include "fromage/linalg.hpp"

namespace fromage {

// All randomness flows through explicitly seeded engines; no global state.
using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

/// splitmix64 of (seed, stream): independent seeds for sub-jobs of one run.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng, double stddev = 1.0);
Matrix uniform_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo, double hi);

/// Random matrix with orthonormal rows (wide) or columns (tall).
Matrix orthogonal_matrix(std::size_t rows, std::size_t cols, Rng& rng);

}  // namespace fromage
