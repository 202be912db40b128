#pragma once

#include "magna/common.hpp"

namespace magna {

// Solves M X = B by Gaussian elimination with partial pivoting followed by one
// round of iterative refinement. Throws NumericError when a pivot falls below
// 1e-12 in magnitude.
Matrix dense_solve(const Matrix& m, const Matrix& b);

struct SymEigen {
  Vector values;   // ascending
  Matrix vectors;  // column k pairs with values(k); orthonormal
};

// Cyclic Jacobi rotations. Requires |M - M^T| <= 1e-10 elementwise.
SymEigen sym_eigen(const Matrix& m);

}  // namespace magna
