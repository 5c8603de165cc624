// takagi.hpp — Factorization of complex symmetric matrices as M = G G^T.

#pragma once

#include "stoq/types.hpp"

namespace stoq {

// Takagi decomposition M = U diag(sigma) U^T with U unitary, sigma >= 0,
// for complex symmetric (not Hermitian) M.
struct TakagiResult {
    Matrix u;
    RealVector sigma;
};

TakagiResult takagi_factorize(Matrix m);

// G with G G^T = M, rectangular with numerical-rank(M) columns,
// ordered by descending singular value. Real symmetric input takes the
// eigendecomposition route (negative eigenvalues give imaginary columns);
// genuinely complex input goes through Jacobi Takagi.
struct SymmetricFactor {
    Matrix g;
    double residual;  // ||G G^T - M||_max
};

SymmetricFactor factor_complex_symmetric(const Matrix& m);

} // namespace stoq
