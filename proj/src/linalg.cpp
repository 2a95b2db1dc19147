#include "cfmimo/linalg.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace cfmimo {

namespace {

CMatrix factor_impl(const CMatrix& A, double rel_pivot_tol, bool psd_ok) {
    const std::size_t n = A.rows();
    if (n == 0 || A.cols() != n)
        throw DimensionMismatch("cholesky: matrix must be square and nonempty");

    double max_diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, A(i, i).real());
    const double pivot_floor = rel_pivot_tol * max_diag;

    CMatrix L(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = A(j, j).real();
        for (std::size_t k = 0; k < j; ++k) d -= std::norm(L(j, k));
        if (d <= pivot_floor) {
            if (!psd_ok)
                throw NotPositiveDefinite("cholesky: pivot " + std::to_string(d) +
                                          " at column " + std::to_string(j) +
                                          " below tolerance " + std::to_string(pivot_floor));
            L(j, j) = 0.0;
            continue;
        }
        const double ljj = std::sqrt(d);
        L(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            cxd s = A(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= L(i, k) * std::conj(L(j, k));
            L(i, j) = s / ljj;
        }
    }
    return L;
}

} // namespace

CholeskyFactor CholeskyFactor::compute(const CMatrix& A, double rel_pivot_tol) {
    return CholeskyFactor(factor_impl(A, rel_pivot_tol, false));
}

CholeskyFactor CholeskyFactor::compute_psd(const CMatrix& A, double rel_pivot_tol) {
    return CholeskyFactor(factor_impl(A, rel_pivot_tol, true));
}

void CholeskyFactor::solve(const CVector& b, CVector& x) const {
    const std::size_t n = dim();
    if (b.size() != n)
        throw DimensionMismatch("cholesky solve: rhs length != matrix dimension");
    x.resize(n);
    // L y = b
    for (std::size_t i = 0; i < n; ++i) {
        cxd s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= L_(i, k) * x[k];
        x[i] = s / L_(i, i);
    }
    // L^H x = y
    for (std::size_t ii = n; ii-- > 0;) {
        cxd s = x[ii];
        for (std::size_t k = ii + 1; k < n; ++k) s -= std::conj(L_(k, ii)) * x[k];
        x[ii] = s / L_(ii, ii);
    }
}

CVector CholeskyFactor::solve(const CVector& b) const {
    CVector x;
    solve(b, x);
    return x;
}

void CholeskyFactor::apply_factor(const CVector& w, CVector& y) const {
    const std::size_t n = dim();
    if (w.size() != n)
        throw DimensionMismatch("cholesky apply: vector length != matrix dimension");
    y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        cxd s{};
        for (std::size_t k = 0; k <= i; ++k) s += L_(i, k) * w[k];
        y[i] = s;
    }
}

CVector cholesky_solve(const CMatrix& A, const CVector& b) {
    if (b.size() != A.rows())
        throw DimensionMismatch("cholesky_solve: rhs length != matrix rows");
    const CholeskyFactor F = CholeskyFactor::compute(A);
    CVector x = F.solve(b);
    // One refinement pass; keeps the residual at machine level for
    // ill-conditioned systems.
    CVector r = A.matvec(x);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
    CVector d = F.solve(r);
    x += d;
    return x;
}

CVector equilibrated_cholesky_solve(const CMatrix& A, const CVector& b) {
    const std::size_t n = A.rows();
    if (b.size() != n)
        throw DimensionMismatch("equilibrated_cholesky_solve: rhs length != matrix rows");
    std::vector<double> s(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = A(i, i).real();
        if (d > 0.0) s[i] = 1.0 / std::sqrt(d);
    }
    CMatrix As(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) As(i, j) = s[i] * s[j] * A(i, j);
    const CholeskyFactor F = CholeskyFactor::compute(As);

    CVector bs(n);
    for (std::size_t i = 0; i < n; ++i) bs[i] = s[i] * b[i];
    CVector y = F.solve(bs);
    CVector x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = s[i] * y[i];

    // One refinement pass against the original system.
    CVector r = A.matvec(x);
    for (std::size_t i = 0; i < n; ++i) r[i] = s[i] * (b[i] - r[i]);
    CVector dy = F.solve(r);
    for (std::size_t i = 0; i < n; ++i) x[i] += s[i] * dy[i];
    return x;
}

cxd quadratic_form(const CVector& x, const CMatrix& M) {
    if (M.rows() != M.cols())
        throw DimensionMismatch("quadratic_form: matrix must be square");
    if (x.size() != M.rows())
        throw DimensionMismatch("quadratic_form: vector length != matrix dimension");
    cxd s{};
    for (std::size_t i = 0; i < M.rows(); ++i) {
        cxd row{};
        for (std::size_t j = 0; j < M.cols(); ++j) row += M(i, j) * x[j];
        s += std::conj(x[i]) * row;
    }
    return s;
}

double quadratic_form_real(const CVector& x, const CMatrix& M) {
    return quadratic_form(x, M).real();
}

void normalize_phase(CVector& v) {
    const double n = v.norm();
    if (n <= 0.0) throw ZeroVector("normalize_phase: zero vector");
    std::size_t imax = 0;
    double amax = -1.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double a = std::abs(v[i]);
        if (a > amax) {
            amax = a;
            imax = i;
        }
    }
    const cxd rot = std::conj(v[imax]) / (amax * n);
    v *= rot;
    // Pin the anchor entry exactly real.
    v[imax] = cxd{std::abs(v[imax]), 0.0};
}

CVector rank1_rayleigh_maximizer(const CVector& g, const CMatrix& B) {
    if (g.size() != B.rows())
        throw DimensionMismatch("rank1_rayleigh_maximizer: vector length != matrix dimension");
    if (g.norm() <= 1e-300)
        throw ZeroVector("rank1_rayleigh_maximizer: direction vector is zero");
    CVector a = equilibrated_cholesky_solve(B, g);
    normalize_phase(a);
    return a;
}

} // namespace cfmimo
