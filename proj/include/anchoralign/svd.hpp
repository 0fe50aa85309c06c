#pragma once

#include <vector>

#include "anchoralign/matrix.hpp"

namespace anchoralign {

struct SvdResult {
  Matrix u;                // n x n, orthogonal
  std::vector<double> s;   // descending, non-negative
  Matrix v;                // n x n, orthogonal
  int sweeps = 0;
};

inline constexpr int kSvdSweepCap = 64;
inline constexpr std::size_t kSvdMaxDim = 4096;

// One-sided (Hestenes) Jacobi SVD of a square matrix: m = u * diag(s) * v^T.
SvdResult svd(const Matrix& m);

// u * diag(s) * v^T
Matrix reconstruct(const SvdResult& r);

}  // namespace anchoralign
