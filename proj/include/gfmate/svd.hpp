#pragma once

#include <cstdint>
#include <vector>

#include "gfmate/linalg.hpp"

namespace gfmate {

struct SvdResult {
  DenseMatrix u;              // rows × k, orthonormal columns
  std::vector<double> s;      // k values, non-increasing
  DenseMatrix vt;             // k × cols
};

struct RandomizedSvdOptions {
  std::size_t oversampling = 10;
  std::size_t power_iterations = 4;
};

/// Matrices with both dimensions at or below this go through dense Jacobi.
inline constexpr std::size_t kJacobiDimLimit = 512;

/// Rank-k SVD of x. Uses one-sided Jacobi when both dimensions are
/// ≤ kJacobiDimLimit, randomized subspace iteration otherwise.
SvdResult truncated_svd(const DenseMatrix& x, std::size_t k, std::uint64_t seed);

/// Thin SVD by one-sided (Hestenes) Jacobi rotations; k = min(rows, cols).
SvdResult jacobi_svd(const DenseMatrix& x);

/// Halko–Martinsson–Tropp randomized range finder with power iterations,
/// followed by Jacobi on the small projected matrix.
SvdResult randomized_svd(const DenseMatrix& x, std::size_t k, std::uint64_t seed,
                         const RandomizedSvdOptions& opts = {});

/// Orthonormalizes the columns of m in place (modified Gram–Schmidt, two
/// passes). Columns that collapse are replaced with vectors drawn from `seed`
/// and re-orthogonalized, so the result always has orthonormal columns when
/// rows ≥ cols.
void orthonormalize_columns(DenseMatrix& m, std::uint64_t seed);

}  // namespace gfmate
