// takagi.cpp — Takagi factorization of complex symmetric matrices.
//
// Uses the real symmetric embedding B = [[Re M, Im M], [Im M, -Re M]]:
// an eigenpair (sigma, [u; v]) of B with sigma > 0 yields a con-eigenvector
// w = u + i v with M conj(w) = sigma w, and the w's from an orthonormal real
// eigenbasis are automatically complex-orthonormal. Collecting the positive
// half of the (+/-) paired spectrum gives M = U diag(sigma) U^T.

#include "stoq/takagi.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace stoq {

TakagiResult takagi_factorize(Matrix m) {
    if (m.rows() != m.cols()) {
        throw Error("takagi", "matrix must be square");
    }
    const Eigen::Index n = m.rows();
    TakagiResult result;
    result.u = Matrix::Identity(n, n);
    result.sigma = RealVector::Zero(n);
    if (n == 0) return result;

    const double scale = max_abs(m);
    if (scale == 0.0) return result;
    if (max_abs((m - m.transpose()).eval()) > 1e-12 * scale) {
        throw Error("takagi", "matrix is not complex symmetric");
    }
    m = ((m + m.transpose()) / 2.0).eval();  // kill rounding asymmetry

    RealMatrix b(2 * n, 2 * n);
    b.topLeftCorner(n, n) = m.real();
    b.topRightCorner(n, n) = m.imag();
    b.bottomLeftCorner(n, n) = m.imag();
    b.bottomRightCorner(n, n) = -m.real();

    Eigen::SelfAdjointEigenSolver<RealMatrix> solver(b);
    if (solver.info() != Eigen::Success) {
        throw Error("takagi", "eigendecomposition of embedding failed");
    }
    // Eigenvalues come in (+sigma, -sigma) pairs; the top n (ascending order)
    // are the nonnegative half.
    const RealVector& lambda = solver.eigenvalues();
    const RealMatrix& vecs = solver.eigenvectors();
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Index src = 2 * n - 1 - k;  // descending sigma
        result.sigma[k] = std::max(lambda[src], 0.0);
        result.u.col(k) = vecs.col(src).head(n).cast<Complex>() +
                          Complex(0.0, 1.0) * vecs.col(src).tail(n).cast<Complex>();
    }
    return result;
}

SymmetricFactor factor_complex_symmetric(const Matrix& m) {
    const Eigen::Index n = m.rows();
    SymmetricFactor out;
    out.g = Matrix::Zero(n, 0);
    out.residual = 0.0;
    const double scale = max_abs(m);
    if (n == 0 || scale == 0.0) return out;

    constexpr double kRankTol = 1e-11;

    Matrix g;
    if (m.imag().cwiseAbs().maxCoeff() == 0.0) {
        // Real symmetric: plain eigendecomposition; negative eigenvalues pick
        // up a factor i so that G G^T (no conjugation) still reproduces M.
        Eigen::SelfAdjointEigenSolver<RealMatrix> solver(m.real());
        if (solver.info() != Eigen::Success) {
            throw Error("takagi", "eigendecomposition failed");
        }
        const RealVector lambda = solver.eigenvalues();
        const RealMatrix& q = solver.eigenvectors();
        std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) {
            return std::abs(lambda[i]) > std::abs(lambda[j]);
        });
        const double sigma_max = std::abs(lambda[order.front()]);
        Eigen::Index rank = 0;
        while (rank < n && std::abs(lambda[order[static_cast<std::size_t>(rank)]]) >
                               kRankTol * sigma_max) {
            ++rank;
        }
        g = Matrix::Zero(n, rank);
        for (Eigen::Index k = 0; k < rank; ++k) {
            const Eigen::Index idx = order[static_cast<std::size_t>(k)];
            const double l = lambda[idx];
            const Complex root = (l >= 0.0) ? Complex(std::sqrt(l), 0.0)
                                            : Complex(0.0, std::sqrt(-l));
            g.col(k) = q.col(idx).cast<Complex>() * root;
        }
    } else {
        TakagiResult t = takagi_factorize(m);
        const double sigma_max = t.sigma[0];
        Eigen::Index rank = 0;
        while (rank < n && t.sigma[rank] > kRankTol * sigma_max) ++rank;
        g = Matrix::Zero(n, rank);
        for (Eigen::Index k = 0; k < rank; ++k) {
            g.col(k) = t.u.col(k) * std::sqrt(t.sigma[k]);
        }
    }

    out.g = std::move(g);
    out.residual = max_abs((out.g * out.g.transpose() - m).eval());
    return out;
}

} // namespace stoq
