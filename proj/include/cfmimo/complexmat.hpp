#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "cfmimo/errors.hpp"

namespace cfmimo {

using cxd = std::complex<double>;

/// Dense complex vector. Thin wrapper over contiguous storage; all
/// higher-level semantics (Hermitian solves, quadratic forms) live in
/// linalg.hpp.
class CVector {
public:
    CVector() = default;
    explicit CVector(std::size_t n) : v_(n) {}
    CVector(std::initializer_list<cxd> init) : v_(init) {}

    std::size_t size() const { return v_.size(); }
    cxd& operator[](std::size_t i) { return v_[i]; }
    const cxd& operator[](std::size_t i) const { return v_[i]; }
    cxd* data() { return v_.data(); }
    const cxd* data() const { return v_.data(); }
    auto begin() const { return v_.begin(); }
    auto end() const { return v_.end(); }

    void resize(std::size_t n) { v_.assign(n, cxd{}); }
    void set_zero() { std::fill(v_.begin(), v_.end(), cxd{}); }

    /// Squared Euclidean norm.
    double norm2() const {
        double s = 0.0;
        for (const cxd& z : v_) s += std::norm(z);
        return s;
    }
    double norm() const { return std::sqrt(norm2()); }

    CVector& operator+=(const CVector& o) {
        for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
        return *this;
    }
    CVector& operator-=(const CVector& o) {
        for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
        return *this;
    }
    CVector& operator*=(cxd s) {
        for (cxd& z : v_) z *= s;
        return *this;
    }
    CVector& operator*=(double s) {
        for (cxd& z : v_) z *= s;
        return *this;
    }

    friend bool operator==(const CVector&, const CVector&) = default;

private:
    std::vector<cxd> v_;
};

/// Inner product x^H y (conjugate-linear in the first argument).
inline cxd dot(const CVector& x, const CVector& y) {
    if (x.size() != y.size())
        throw DimensionMismatch("dot: vector lengths differ");
    cxd s{};
    for (std::size_t i = 0; i < x.size(); ++i) s += std::conj(x[i]) * y[i];
    return s;
}

/// Dense complex matrix, row-major.
class CMatrix {
public:
    CMatrix() = default;
    CMatrix(std::size_t rows, std::size_t cols) : r_(rows), c_(cols), a_(rows * cols) {}

    static CMatrix identity(std::size_t n) {
        CMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return r_; }
    std::size_t cols() const { return c_; }
    cxd& operator()(std::size_t i, std::size_t j) { return a_[i * c_ + j]; }
    const cxd& operator()(std::size_t i, std::size_t j) const { return a_[i * c_ + j]; }
    cxd* data() { return a_.data(); }
    const cxd* data() const { return a_.data(); }

    void resize(std::size_t rows, std::size_t cols) {
        r_ = rows;
        c_ = cols;
        a_.assign(rows * cols, cxd{});
    }
    void set_zero() { std::fill(a_.begin(), a_.end(), cxd{}); }

    cxd trace() const {
        cxd t{};
        for (std::size_t i = 0; i < std::min(r_, c_); ++i) t += (*this)(i, i);
        return t;
    }

    double frobenius() const {
        double s = 0.0;
        for (const cxd& z : a_) s += std::norm(z);
        return std::sqrt(s);
    }

    /// y = M x.
    void matvec(const CVector& x, CVector& y) const {
        if (x.size() != c_)
            throw DimensionMismatch("matvec: size mismatch");
        y.resize(r_);
        for (std::size_t i = 0; i < r_; ++i) {
            cxd s{};
            const cxd* row = a_.data() + i * c_;
            for (std::size_t j = 0; j < c_; ++j) s += row[j] * x[j];
            y[i] = s;
        }
    }

    CVector matvec(const CVector& x) const {
        CVector y;
        matvec(x, y);
        return y;
    }

    CMatrix& operator+=(const CMatrix& o) {
        for (std::size_t i = 0; i < a_.size(); ++i) a_[i] += o.a_[i];
        return *this;
    }
    CMatrix& operator*=(double s) {
        for (cxd& z : a_) z *= s;
        return *this;
    }

    /// M += s * A.
    void add_scaled(const CMatrix& A, double s) {
        for (std::size_t i = 0; i < a_.size(); ++i) a_[i] += s * A.a_[i];
    }

    /// M += s * v v^H (Hermitian rank-1 update).
    void add_outer(const CVector& v, double s) {
        for (std::size_t i = 0; i < r_; ++i) {
            const cxd vi = v[i];
            cxd* row = a_.data() + i * c_;
            for (std::size_t j = 0; j < c_; ++j) row[j] += s * vi * std::conj(v[j]);
        }
    }

    /// M += s * diag(d).
    void add_diag(std::span<const double> d, double s) {
        for (std::size_t i = 0; i < std::min(r_, c_); ++i) (*this)(i, i) += s * d[i];
    }

    /// Replace M by (M + M^H)/2. Squares away rounding drift in products
    /// that are Hermitian analytically.
    void hermitize() {
        for (std::size_t i = 0; i < r_; ++i) {
            (*this)(i, i) = cxd{(*this)(i, i).real(), 0.0};
            for (std::size_t j = i + 1; j < c_; ++j) {
                const cxd m = 0.5 * ((*this)(i, j) + std::conj((*this)(j, i)));
                (*this)(i, j) = m;
                (*this)(j, i) = std::conj(m);
            }
        }
    }

    friend bool operator==(const CMatrix&, const CMatrix&) = default;

private:
    std::size_t r_ = 0, c_ = 0;
    std::vector<cxd> a_;
};

inline CMatrix matmul(const CMatrix& A, const CMatrix& B) {
    if (A.cols() != B.rows())
        throw DimensionMismatch("matmul: inner dimensions differ");
    CMatrix C(A.rows(), B.cols());
    for (std::size_t i = 0; i < A.rows(); ++i)
        for (std::size_t k = 0; k < A.cols(); ++k) {
            const cxd aik = A(i, k);
            for (std::size_t j = 0; j < B.cols(); ++j) C(i, j) += aik * B(k, j);
        }
    return C;
}

inline CMatrix herm_transpose(const CMatrix& A) {
    CMatrix T(A.cols(), A.rows());
    for (std::size_t i = 0; i < A.rows(); ++i)
        for (std::size_t j = 0; j < A.cols(); ++j) T(j, i) = std::conj(A(i, j));
    return T;
}

/// Entrywise Hermitian check: |M - M^H| <= rel_tol * max|M| on every entry.
inline bool is_hermitian(const CMatrix& M, double rel_tol = 1e-12) {
    if (M.rows() != M.cols()) return false;
    double scale = 0.0;
    for (std::size_t i = 0; i < M.rows(); ++i)
        for (std::size_t j = 0; j < M.cols(); ++j) scale = std::max(scale, std::abs(M(i, j)));
    if (scale == 0.0) return true;
    for (std::size_t i = 0; i < M.rows(); ++i)
        for (std::size_t j = i; j < M.cols(); ++j)
            if (std::abs(M(i, j) - std::conj(M(j, i))) > rel_tol * scale) return false;
    return true;
}

} // namespace cfmimo
