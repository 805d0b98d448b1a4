#pragma once

// Determinant and log-determinant evolution under ordered sequences of
// rank-one updates H + u_1 v_1^T + ... + u_k v_k^T.

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"

namespace detdyn {

struct RankOneUpdate {
    Vector u;
    Vector v;
};

/// Ordered rank-one pairs (u_i, v_i) sharing the dimension of a base matrix.
class UpdateSequence {
public:
    explicit UpdateSequence(std::size_t base_dim, std::vector<RankOneUpdate> updates = {}) : n_(base_dim) {
        for (auto& up : updates) push_back(std::move(up));
    }

    /// Columns of U and V become u_i and v_i.
    static UpdateSequence from_factors(const Matrix& u, const Matrix& v) {
        detail::require(u.rows() == v.rows() && u.cols() == v.cols(), ErrorKind::DimensionMismatch,
                        "U is " + u.shape() + " but V is " + v.shape());
        UpdateSequence seq(u.rows());
        for (std::size_t j = 0; j < u.cols(); ++j) seq.push_back({u.col(j), v.col(j)});
        return seq;
    }

    /// Symmetric updates u_i u_i^T.
    static UpdateSequence symmetric(std::size_t base_dim, const std::vector<Vector>& directions) {
        UpdateSequence seq(base_dim);
        for (const auto& d : directions) seq.push_back({d, d});
        return seq;
    }

    void push_back(RankOneUpdate up) {
        detail::require(up.u.size() == n_ && up.v.size() == n_, ErrorKind::DimensionMismatch,
                        "update vectors must have length " + std::to_string(n_));
        for (double x : up.u) detail::require(std::isfinite(x), ErrorKind::NonFinite, "update entries must be finite");
        for (double x : up.v) detail::require(std::isfinite(x), ErrorKind::NonFinite, "update entries must be finite");
        updates_.push_back(std::move(up));
    }

    std::size_t base_dim() const noexcept { return n_; }
    std::size_t size() const noexcept { return updates_.size(); }
    bool empty() const noexcept { return updates_.empty(); }
    const RankOneUpdate& operator[](std::size_t i) const { return updates_[i]; }
    auto begin() const noexcept { return updates_.begin(); }
    auto end() const noexcept { return updates_.end(); }

    UpdateSequence prefix(std::size_t k) const {
        detail::require(k <= size(), ErrorKind::InvalidArgument, "prefix longer than the sequence");
        return UpdateSequence(n_, {updates_.begin(), updates_.begin() + static_cast<std::ptrdiff_t>(k)});
    }

    /// H + Delta_k.
    Matrix applied_to(const Matrix& h, std::size_t k) const {
        require_compatible(h);
        detail::require(k <= size(), ErrorKind::InvalidArgument, "step beyond the sequence");
        Matrix m = h;
        for (std::size_t i = 0; i < k; ++i) m.add_outer(updates_[i].u, updates_[i].v);
        return m;
    }

    Matrix applied_to(const Matrix& h) const { return applied_to(h, size()); }

    /// Columns u_i and v_i as matrices U, V (n x r).
    std::pair<Matrix, Matrix> factors() const {
        Matrix u(n_, size()), v(n_, size());
        for (std::size_t j = 0; j < size(); ++j)
            for (std::size_t i = 0; i < n_; ++i) {
                u(i, j) = updates_[j].u[i];
                v(i, j) = updates_[j].v[i];
            }
        return {u, v};
    }

    void require_compatible(const Matrix& h) const {
        detail::require(h.is_square(), ErrorKind::NonSquare, "base matrix is " + h.shape());
        detail::require(h.rows() == n_, ErrorKind::DimensionMismatch,
                        "base matrix is " + h.shape() + " but updates have length " + std::to_string(n_));
    }

private:
    std::size_t n_;
    std::vector<RankOneUpdate> updates_;
};

/// D_0..D_r with D_k = D_{k-1} + increments[k-1].
struct DetTrace {
    std::vector<double> values;
    std::vector<double> increments;

    double final_value() const { return values.back(); }
};

/// Multiplicative form det(H + Delta_r) = det(H) * prod factors. The log
/// fields are populated only when det(H) and every factor are positive.
struct LogDetTrace {
    double base_det = 0;
    std::vector<double> factors;
    std::vector<double> values;  // det(H + Delta_k), k = 0..r, by the product form
    std::optional<double> base_logdet;
    std::vector<double> log_increments;

    double final_det() const { return values.back(); }

    std::optional<double> final_logdet() const {
        if (!base_logdet) return std::nullopt;
        double s = *base_logdet;
        for (double x : log_increments) s += x;
        return s;
    }
};

/// det(H + u v^T) = det(H) + v^T adj(H) u. Valid for singular H.
inline double det_rank_one(const Matrix& h, const RankOneUpdate& up, const OptTolerance& tol = {}) {
    detail::require(h.is_square(), ErrorKind::NonSquare, "base matrix is " + h.shape());
    detail::require(up.u.size() == h.rows() && up.v.size() == h.rows(), ErrorKind::DimensionMismatch,
                    "update vectors must match the base dimension");
    return det(h, tol) + dot(up.v, matvec(adjugate(h), up.u));
}

/// Additive determinant recursion D_k = D_{k-1} + v_k^T adj(H + Delta_{k-1}) u_k.
/// The adjugate is recomputed per step (O(r n^4)).
inline DetTrace det_sequence(const Matrix& h, const UpdateSequence& seq, const OptTolerance& tol = {}) {
    seq.require_compatible(h);
    DetTrace trace;
    trace.values.reserve(seq.size() + 1);
    trace.values.push_back(det(h, tol));
    Matrix m = h;
    for (const auto& up : seq) {
        const double inc = dot(up.v, matvec(adjugate(m), up.u));
        trace.increments.push_back(inc);
        trace.values.push_back(trace.values.back() + inc);
        m.add_outer(up.u, up.v);
    }
    return trace;
}

namespace detail {

/// Walks the factors 1 + v_i^T (H + Delta_{i-1})^{-1} u_i, maintaining the
/// inverse by rank-one updates. When |factor| < tol.rel the updated matrix is
/// refactorized; a singular refactorization raises StepError(kind, i).
/// `check_final` extends the nonsingularity requirement to H + Delta_r.
inline std::vector<double> product_factors(const Matrix& h, const UpdateSequence& seq, const Tolerance& tol,
                                           ErrorKind kind, bool check_final) {
    const std::size_t r = seq.size();
    auto lu0 = LuFactorization<double>(h, tol);
    if (lu0.singular()) throw StepError(kind, 0, "base matrix is singular at tolerance");
    Matrix inv = lu0.inverse();
    Matrix m = h;
    double running_det = lu0.determinant();
    std::vector<double> factors;
    factors.reserve(r);
    for (std::size_t i = 1; i <= r; ++i) {
        const auto& up = seq[i - 1];
        const Vector inv_u = matvec(inv, up.u);
        double f = 1.0 + dot(up.v, inv_u);
        m.add_outer(up.u, up.v);
        const bool need_inverse = i < r;
        if (std::abs(f) >= tol.rel) {
            if (need_inverse) {
                // (M + u v^T)^{-1} = M^{-1} - M^{-1} u v^T M^{-1} / f
                const Vector vt_inv = matvec(inv.transpose(), up.v);
                inv.add_outer(inv_u, vt_inv, -1.0 / f);
            }
        } else if (need_inverse || check_final) {
            LuFactorization<double> lu(m, tol);
            if (lu.singular()) throw StepError(kind, i, "updated matrix is singular at tolerance");
            f = lu.determinant() / running_det;
            if (need_inverse) inv = lu.inverse();
        }
        running_det *= f;
        factors.push_back(f);
    }
    return factors;
}

}  // namespace detail

/// det(H + Delta_r) = det(H) prod_i (1 + v_i^T (H + Delta_{i-1})^{-1} u_i).
/// Requires H + Delta_k nonsingular for k < r; otherwise raises
/// IntermediateSingular with the first offending k.
inline LogDetTrace det_product(const Matrix& h, const UpdateSequence& seq, const OptTolerance& tol = {}) {
    seq.require_compatible(h);
    const Tolerance t = resolve(tol, h.rows());
    LogDetTrace out;
    out.factors = detail::product_factors(h, seq, t, ErrorKind::IntermediateSingular, false);
    const auto lu = LuFactorization<double>(h, t);
    out.base_det = lu.determinant();
    out.values.push_back(out.base_det);
    for (double f : out.factors) out.values.push_back(out.values.back() * f);
    const auto ld = lu.log_abs_det();
    bool positive = ld.sign > 0;
    for (double f : out.factors) positive = positive && f > 0;
    if (positive) {
        out.base_logdet = ld.log_abs;
        for (double f : out.factors) out.log_increments.push_back(std::log(f));
    }
    return out;
}

/// log det(H + Delta_r) = log det(H) + sum_i log(1 + v_i^T (H + Delta_{i-1})^{-1} u_i),
/// requiring det(H + Delta_k) > 0 for every k = 0..r.
inline LogDetTrace logdet_sequence(const Matrix& h, const UpdateSequence& seq, const OptTolerance& tol = {}) {
    seq.require_compatible(h);
    const Tolerance t = resolve(tol, h.rows());
    const auto lu = LuFactorization<double>(h, t);
    const auto ld = lu.log_abs_det();
    if (ld.sign <= 0) throw StepError(ErrorKind::NonPositiveDeterminant, 0, "det(H) is not positive");
    LogDetTrace out;
    out.factors = detail::product_factors(h, seq, t, ErrorKind::NonPositiveDeterminant, true);
    out.base_det = lu.determinant();
    out.base_logdet = ld.log_abs;
    out.values.push_back(out.base_det);
    for (std::size_t i = 0; i < out.factors.size(); ++i) {
        const double f = out.factors[i];
        if (!(f > 0)) throw StepError(ErrorKind::NonPositiveDeterminant, i + 1, "det(H + Delta_k) is not positive");
        out.log_increments.push_back(std::log(f));
        out.values.push_back(out.values.back() * f);
    }
    return out;
}

struct ContributionStep {
    double quadratic_form = 0;           // u^T (I + Delta_{i-1})^{-1} u
    std::vector<double> eigenvalues;     // lambda_j of I + Delta_{i-1}
    std::vector<double> weights;         // alpha_j^2 / lambda_j
    double weighted_sum = 0;             // sum of weights
    double log_increment = 0;            // log(1 + quadratic_form) >= 0
};

struct ContributionReport {
    std::vector<ContributionStep> steps;

    double total_logdet() const {
        double s = 0;
        for (const auto& st : steps) s += st.log_increment;
        return s;
    }
};

/// Per-step information contribution of symmetric updates u_i u_i^T applied
/// to the identity: the quadratic form, its eigenbasis weights alpha_j^2 /
/// lambda_j, and the log-determinant increment.
inline ContributionReport contribution_analysis(const UpdateSequence& seq, const OptTolerance& tol = {}) {
    const std::size_t n = seq.base_dim();
    const Tolerance t = resolve(tol, n);
    for (std::size_t i = 0; i < seq.size(); ++i) {
        const auto& up = seq[i];
        double scale = 0, diff = 0;
        for (std::size_t k = 0; k < n; ++k) {
            scale = std::max({scale, std::abs(up.u[k]), std::abs(up.v[k])});
            diff = std::max(diff, std::abs(up.u[k] - up.v[k]));
        }
        if (diff > t.threshold(scale))
            throw StepError(ErrorKind::NonSymmetricUpdate, i + 1, "contribution analysis needs u_i == v_i");
    }
    ContributionReport report;
    Matrix m = Matrix::identity(n);
    for (const auto& up : seq) {
        ContributionStep step;
        const auto chol = cholesky(m, t);
        step.quadratic_form = chol.inverse_quadratic_form(up.u);
        const auto eig = symmetric_eigen(m);
        step.eigenvalues = eig.values;
        for (std::size_t j = 0; j < n; ++j) {
            double alpha = 0;
            for (std::size_t k = 0; k < n; ++k) alpha += eig.vectors(k, j) * up.u[k];
            step.weights.push_back(alpha * alpha / eig.values[j]);
            step.weighted_sum += step.weights.back();
        }
        step.log_increment = std::log1p(step.quadratic_form);
        report.steps.push_back(std::move(step));
        m.add_outer(up.u, up.u);
    }
    return report;
}

}  // namespace detdyn
