#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "matrix.hpp"
#include "tolerance.hpp"

namespace detdyn {

/// Sign and log-magnitude of a real determinant. sign == 0 means exact zero.
template <typename R>
struct LogAbsDet {
    int sign = 0;
    R log_abs = -std::numeric_limits<R>::infinity();
};

/// PA = LU with partial pivoting. A pivot whose magnitude does not exceed
/// tol.threshold(max |a_ij|) marks the factorization singular; the determinant
/// is then reported as exact zero.
template <Scalar T>
class LuFactorization {
public:
    using real_type = real_of_t<T>;

    LuFactorization(const BasicMatrix<T>& a, const Tolerance& tol) : lu_(a), perm_(a.rows()) {
        detail::require(a.is_square(), ErrorKind::NonSquare, "LU of " + a.shape());
        const std::size_t n = a.rows();
        std::iota(perm_.begin(), perm_.end(), std::size_t{0});
        threshold_ = tol.threshold(max_abs(a));
        for (std::size_t k = 0; k < n; ++k) {
            std::size_t p = k;
            real_type best = std::abs(lu_(k, k));
            for (std::size_t i = k + 1; i < n; ++i) {
                const real_type v = std::abs(lu_(i, k));
                if (v > best) {
                    best = v;
                    p = i;
                }
            }
            if (best <= threshold_) {
                if (!singular_) first_small_pivot_ = k;
                singular_ = true;
                continue;
            }
            if (p != k) {
                for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(p, j));
                std::swap(perm_[k], perm_[p]);
                parity_ = -parity_;
            }
            const T pivot = lu_(k, k);
            for (std::size_t i = k + 1; i < n; ++i) {
                const T f = lu_(i, k) / pivot;
                lu_(i, k) = f;
                if (f == T{}) continue;
                for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= f * lu_(k, j);
            }
        }
    }

    std::size_t dim() const noexcept { return lu_.rows(); }
    bool singular() const noexcept { return singular_; }
    std::size_t first_small_pivot() const noexcept { return first_small_pivot_; }
    real_type pivot_threshold() const noexcept { return threshold_; }

    T determinant() const {
        if (singular_) return T{};
        T d = static_cast<T>(static_cast<real_type>(parity_));
        for (std::size_t i = 0; i < dim(); ++i) d *= lu_(i, i);
        return d;
    }

    /// Smallest and largest pivot magnitudes; their ratio is a cheap
    /// conditioning indicator.
    std::pair<real_type, real_type> pivot_range() const {
        real_type lo = std::numeric_limits<real_type>::infinity(), hi = 0;
        for (std::size_t i = 0; i < dim(); ++i) {
            lo = std::min(lo, std::abs(lu_(i, i)));
            hi = std::max(hi, std::abs(lu_(i, i)));
        }
        return {lo, hi};
    }

    LogAbsDet<real_type> log_abs_det() const
        requires(!is_complex<T>::value)
    {
        LogAbsDet<real_type> out;
        if (singular_) return out;
        int sign = parity_;
        real_type acc = 0;
        for (std::size_t i = 0; i < dim(); ++i) {
            const T p = lu_(i, i);
            if (p < 0) sign = -sign;
            acc += std::log(std::abs(p));
        }
        out.sign = sign;
        out.log_abs = acc;
        return out;
    }

    std::vector<T> solve(const std::vector<T>& b) const {
        detail::require(b.size() == dim(), ErrorKind::DimensionMismatch, "right-hand side length");
        require_regular();
        const std::size_t n = dim();
        std::vector<T> x(n);
        for (std::size_t i = 0; i < n; ++i) {
            T s = b[perm_[i]];
            for (std::size_t j = 0; j < i; ++j) s -= lu_(i, j) * x[j];
            x[i] = s;
        }
        for (std::size_t i = n; i-- > 0;) {
            T s = x[i];
            for (std::size_t j = i + 1; j < n; ++j) s -= lu_(i, j) * x[j];
            x[i] = s / lu_(i, i);
        }
        return x;
    }

    /// Solves x^T A = b^T.
    std::vector<T> solve_transposed(const std::vector<T>& b) const {
        detail::require(b.size() == dim(), ErrorKind::DimensionMismatch, "right-hand side length");
        require_regular();
        const std::size_t n = dim();
        // A^T = U^T L^T P  ->  U^T y = b, L^T z = y, x = P^T z
        std::vector<T> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            T s = b[i];
            for (std::size_t j = 0; j < i; ++j) s -= lu_(j, i) * y[j];
            y[i] = s / lu_(i, i);
        }
        for (std::size_t i = n; i-- > 0;) {
            T s = y[i];
            for (std::size_t j = i + 1; j < n; ++j) s -= lu_(j, i) * y[j];
            y[i] = s;
        }
        std::vector<T> x(n);
        for (std::size_t i = 0; i < n; ++i) x[perm_[i]] = y[i];
        return x;
    }

    BasicMatrix<T> inverse() const {
        require_regular();
        const std::size_t n = dim();
        BasicMatrix<T> inv(n, n);
        std::vector<T> e(n);
        for (std::size_t j = 0; j < n; ++j) {
            std::fill(e.begin(), e.end(), T{});
            e[j] = T{1};
            const auto c = solve(e);
            for (std::size_t i = 0; i < n; ++i) inv(i, j) = c[i];
        }
        return inv;
    }

private:
    void require_regular() const {
        if (singular_)
            throw Error(ErrorKind::Singular,
                        "pivot " + std::to_string(first_small_pivot_) + " is below the tolerance threshold");
    }

    BasicMatrix<T> lu_;
    std::vector<std::size_t> perm_;
    int parity_ = 1;
    bool singular_ = false;
    std::size_t first_small_pivot_ = 0;
    real_type threshold_ = 0;
};

template <Scalar T>
LuFactorization<T> lu_factor(const BasicMatrix<T>& a, const OptTolerance& tol = {}) {
    detail::require(a.is_square(), ErrorKind::NonSquare, "LU of " + a.shape());
    return LuFactorization<T>(a, resolve(tol, a.rows()));
}

/// Determinant by LU with partial pivoting; exact 0 when a pivot falls below
/// tolerance.
template <Scalar T>
T det(const BasicMatrix<T>& a, const OptTolerance& tol = {}) {
    detail::require(a.is_square(), ErrorKind::NonSquare, "determinant of " + a.shape());
    if (a.rows() == 0) return T{1};
    return lu_factor(a, tol).determinant();
}

template <Scalar T>
BasicMatrix<T> inverse(const BasicMatrix<T>& a, const OptTolerance& tol = {}) {
    detail::require(a.is_square(), ErrorKind::NonSquare, "inverse of " + a.shape());
    return lu_factor(a, tol).inverse();
}

template <Scalar T>
std::vector<T> solve(const BasicMatrix<T>& a, const std::vector<T>& b, const OptTolerance& tol = {}) {
    return lu_factor(a, tol).solve(b);
}

template <std::floating_point T>
LogAbsDet<T> log_abs_det(const BasicMatrix<T>& a, const OptTolerance& tol = {}) {
    detail::require(a.is_square(), ErrorKind::NonSquare, "determinant of " + a.shape());
    if (a.rows() == 0) return {1, T{0}};
    return lu_factor(a, tol).log_abs_det();
}

// ---------------------------------------------------------------------------
// Cholesky

/// A = L L^T for symmetric positive definite A.
template <std::floating_point T>
class Cholesky {
public:
    Cholesky(const BasicMatrix<T>& a, const Tolerance& tol) : l_(a.rows(), a.rows()) {
        detail::require(a.is_square(), ErrorKind::NonSquare, "Cholesky of " + a.shape());
        const T scale = max_abs(a);
        const T thr = tol.threshold(scale);
        if (!is_symmetric(a, thr))
            throw Error(ErrorKind::NotPositiveDefinite, "matrix is not symmetric");
        const std::size_t n = a.rows();
        for (std::size_t j = 0; j < n; ++j) {
            T d = a(j, j);
            for (std::size_t k = 0; k < j; ++k) d -= l_(j, k) * l_(j, k);
            if (!(d > thr))
                throw Error(ErrorKind::NotPositiveDefinite,
                            "nonpositive pivot at column " + std::to_string(j));
            const T ljj = std::sqrt(d);
            l_(j, j) = ljj;
            for (std::size_t i = j + 1; i < n; ++i) {
                T s = a(i, j);
                for (std::size_t k = 0; k < j; ++k) s -= l_(i, k) * l_(j, k);
                l_(i, j) = s / ljj;
            }
        }
    }

    const BasicMatrix<T>& lower() const noexcept { return l_; }

    std::vector<T> solve(const std::vector<T>& b) const {
        const std::size_t n = l_.rows();
        detail::require(b.size() == n, ErrorKind::DimensionMismatch, "right-hand side length");
        std::vector<T> y(b);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < i; ++k) y[i] -= l_(i, k) * y[k];
            y[i] /= l_(i, i);
        }
        for (std::size_t i = n; i-- > 0;) {
            for (std::size_t k = i + 1; k < n; ++k) y[i] -= l_(k, i) * y[k];
            y[i] /= l_(i, i);
        }
        return y;
    }

    /// x^T A^{-1} x = |L^{-1} x|^2, which is nonnegative by construction.
    T inverse_quadratic_form(const std::vector<T>& x) const {
        const std::size_t n = l_.rows();
        detail::require(x.size() == n, ErrorKind::DimensionMismatch, "vector length");
        std::vector<T> y(x);
        T s = 0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < i; ++k) y[i] -= l_(i, k) * y[k];
            y[i] /= l_(i, i);
            s += y[i] * y[i];
        }
        return s;
    }

    T log_det() const {
        T s = 0;
        for (std::size_t i = 0; i < l_.rows(); ++i) s += std::log(l_(i, i));
        return 2 * s;
    }

    T determinant() const {
        T d = 1;
        for (std::size_t i = 0; i < l_.rows(); ++i) d *= l_(i, i) * l_(i, i);
        return d;
    }

    BasicMatrix<T> inverse() const {
        const std::size_t n = l_.rows();
        BasicMatrix<T> inv(n, n);
        std::vector<T> e(n);
        for (std::size_t j = 0; j < n; ++j) {
            std::fill(e.begin(), e.end(), T{0});
            e[j] = 1;
            const auto c = solve(e);
            for (std::size_t i = 0; i < n; ++i) inv(i, j) = c[i];
        }
        return inv;
    }

private:
    BasicMatrix<T> l_;
};

template <std::floating_point T>
Cholesky<T> cholesky(const BasicMatrix<T>& a, const OptTolerance& tol = {}) {
    return Cholesky<T>(a, resolve(tol, a.rows()));
}

}  // namespace detdyn
