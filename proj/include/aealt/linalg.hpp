#pragma once

#include "aealt/matrix.hpp"

namespace aealt {

struct EigenDecomposition {
    Vector eigenvalues;   // descending
    Matrix eigenvectors;  // row i is the unit eigenvector for eigenvalues[i]
};

// Cyclic Jacobi rotations for a symmetric matrix. Plenty fast for the
// covariance sizes this library works with (d up to a few hundred).
EigenDecomposition symmetric_eigen(const Matrix& sym);

// Largest principal angle (radians) between the row spaces of a and b.
// Rows need not be orthonormal; each basis is orthonormalized first.
double max_principal_angle(const Matrix& a, const Matrix& b);

// Gram-Schmidt orthonormalization of the rows (throws on rank deficiency).
Matrix orthonormalize_rows(const Matrix& m);

}  // namespace aealt
