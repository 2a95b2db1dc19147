#pragma once

#include <span>

#include "cfmimo/complexmat.hpp"

namespace cfmimo {

/// Lower-triangular Cholesky factor L of a Hermitian positive-definite
/// matrix, A = L L^H. Factor once, solve for many right-hand sides.
class CholeskyFactor {
public:
    /// Factors A reading only the lower triangle. Throws NotPositiveDefinite
    /// when a pivot falls at or below rel_pivot_tol times the largest
    /// diagonal entry of A.
    static CholeskyFactor compute(const CMatrix& A, double rel_pivot_tol = 1e-14);

    /// Semidefinite-tolerant variant for covariance square roots: a pivot at
    /// or below tolerance zeroes its column instead of failing, so L L^H
    /// still reproduces an exactly rank-deficient A.
    static CholeskyFactor compute_psd(const CMatrix& A, double rel_pivot_tol = 1e-14);

    std::size_t dim() const { return L_.rows(); }
    const CMatrix& lower() const { return L_; }

    /// Solves A x = b through the two triangular systems.
    CVector solve(const CVector& b) const;
    void solve(const CVector& b, CVector& x) const;

    /// y = L w; with w ~ N_C(0, I) this draws from N_C(0, A).
    void apply_factor(const CVector& w, CVector& y) const;

private:
    explicit CholeskyFactor(CMatrix L) : L_(std::move(L)) {}
    CMatrix L_;
};

/// Solves A x = b for Hermitian positive-definite A via Cholesky, with one
/// step of iterative refinement so the relative residual stays near machine
/// precision even for conditioning up to ~1e8.
CVector cholesky_solve(const CMatrix& A, const CVector& b);

/// Like cholesky_solve, but factors the Jacobi-scaled system
/// D^{-1/2} A D^{-1/2} (unit diagonal) so that the pivot test measures true
/// conditioning instead of diagonal dynamic range. Needed for the per-access-
/// point weighting matrices, whose diagonal legitimately spans the pathloss
/// range (tens of orders of magnitude) while staying positive definite.
CVector equilibrated_cholesky_solve(const CMatrix& A, const CVector& b);

/// x^H M x. For Hermitian M the imaginary part is rounding noise.
cxd quadratic_form(const CVector& x, const CMatrix& M);

/// Real part of x^H M x, for Hermitian M.
double quadratic_form_real(const CVector& x, const CMatrix& M);

/// Rotates v by a global phase and positive scale so that ||v|| = 1 and the
/// largest-magnitude entry is real positive. Makes eigenvector-style outputs
/// comparable across runs.
void normalize_phase(CVector& v);

/// Unit-norm maximizer of the Rayleigh quotient |g^H a|^2 / (a^H B a) for
/// Hermitian positive-definite B: the direction B^{-1} g, which attains the
/// only nonzero generalized eigenvalue g^H B^{-1} g of the pair (g g^H, B).
CVector rank1_rayleigh_maximizer(const CVector& g, const CMatrix& B);

} // namespace cfmimo
