#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <utility>
#include <vector>

#include "matrix.hpp"
#include "tolerance.hpp"

namespace detdyn {

namespace detail {

/// Gaussian elimination with full pivoting, stopped as soon as the largest
/// remaining entry drops to the tolerance threshold. Encodes P A Q = L U in
/// place: rows/cols are physically permuted, multipliers stored below the
/// diagonal of the first `rank` columns.
template <Scalar T>
struct FullPivotElimination {
    BasicMatrix<T> work;
    std::vector<std::size_t> row_perm;
    std::vector<std::size_t> col_perm;
    std::size_t rank = 0;

    FullPivotElimination(const BasicMatrix<T>& a, const Tolerance& tol)
        : work(a), row_perm(a.rows()), col_perm(a.cols()) {
        using R = real_of_t<T>;
        std::iota(row_perm.begin(), row_perm.end(), std::size_t{0});
        std::iota(col_perm.begin(), col_perm.end(), std::size_t{0});
        const std::size_t m = a.rows(), n = a.cols();
        const R thr = tol.threshold(max_abs(a));
        const std::size_t steps = std::min(m, n);
        for (std::size_t k = 0; k < steps; ++k) {
            std::size_t pi = k, pj = k;
            R best = 0;
            for (std::size_t i = k; i < m; ++i)
                for (std::size_t j = k; j < n; ++j) {
                    const R v = std::abs(work(i, j));
                    if (v > best) {
                        best = v;
                        pi = i;
                        pj = j;
                    }
                }
            if (best <= thr) break;
            if (pi != k) {
                for (std::size_t j = 0; j < n; ++j) std::swap(work(k, j), work(pi, j));
                std::swap(row_perm[k], row_perm[pi]);
            }
            if (pj != k) {
                for (std::size_t i = 0; i < m; ++i) std::swap(work(i, k), work(i, pj));
                std::swap(col_perm[k], col_perm[pj]);
            }
            const T pivot = work(k, k);
            for (std::size_t i = k + 1; i < m; ++i) {
                const T f = work(i, k) / pivot;
                work(i, k) = f;
                for (std::size_t j = k + 1; j < n; ++j) work(i, j) -= f * work(k, j);
            }
            rank = k + 1;
        }
    }
};

}  // namespace detail

/// Numerical rank: number of full-pivoting elimination pivots exceeding
/// tol.threshold(max |a_ij|). Invariant under row and column permutations.
template <Scalar T>
std::size_t rank(const BasicMatrix<T>& a, const OptTolerance& tol = {}) {
    if (a.empty()) return 0;
    return detail::FullPivotElimination<T>(a, resolve(tol, std::max(a.rows(), a.cols()))).rank;
}

template <Scalar T>
struct FullRankFactors {
    BasicMatrix<T> left;   // n x r, full column rank
    BasicMatrix<T> right;  // r x n, full row rank
    std::size_t rank() const noexcept { return left.cols(); }
};

/// M = C * F with both factors of rank r = rank(M). For r = 0 the factors are
/// empty (n x 0 and 0 x n).
template <Scalar T>
FullRankFactors<T> full_rank_factorization(const BasicMatrix<T>& a, const OptTolerance& tol = {}) {
    const std::size_t m = a.rows(), n = a.cols();
    detail::FullPivotElimination<T> e(a, resolve(tol, std::max(m, n)));
    const std::size_t r = e.rank;
    FullRankFactors<T> out{BasicMatrix<T>(m, r), BasicMatrix<T>(r, n)};
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t orig_row = e.row_perm[i];
        for (std::size_t k = 0; k < r; ++k) {
            if (i == k)
                out.left(orig_row, k) = T{1};
            else if (i > k)
                out.left(orig_row, k) = e.work(i, k);
        }
    }
    for (std::size_t k = 0; k < r; ++k)
        for (std::size_t j = k; j < n; ++j) out.right(k, e.col_perm[j]) = e.work(k, j);
    return out;
}

}  // namespace detdyn
