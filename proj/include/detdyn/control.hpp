#pragma once

// Estimation and control applications: covariance log-det accumulation,
// information-form determinant contraction, controllability Gramian growth
// and reachable ellipses.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"
#include "singular.hpp"

namespace detdyn {

// ---------------------------------------------------------------------------
// Covariance accumulation  P_i = P_{i-1} + u_i u_i^T

struct CovarianceTrace {
    std::vector<double> logdets;     // log det(P_0), ..., log det(P_k)
    std::vector<double> quadratic;   // x_i = u_i^T P_{i-1}^{-1} u_i
    std::vector<double> increments;  // log(1 + x_i)
    double lower_bound = 0;          // sum x_i / (1 + x_i)
    double upper_bound = 0;          // sum x_i

    double total_increment() const {
        double s = 0;
        for (double d : increments) s += d;
        return s;
    }
    double logdet_change() const { return logdets.back() - logdets.front(); }
};

inline CovarianceTrace covariance_trace(const Matrix& p, const std::vector<Vector>& updates,
                                        const OptTolerance& tol = {}) {
    detail::require(p.is_square(), ErrorKind::NonSquare, "P is " + p.shape());
    const std::size_t n = p.rows();
    const Tolerance t = resolve(tol, n);
    CovarianceTrace out;
    Matrix cur = p;
    auto chol = Cholesky<double>(cur, t);
    out.logdets.push_back(chol.log_det());
    for (std::size_t i = 0; i < updates.size(); ++i) {
        const auto& u = updates[i];
        detail::require(u.size() == n, ErrorKind::DimensionMismatch, "update " + std::to_string(i) + " has wrong length");
        const double x = chol.inverse_quadratic_form(u);
        out.quadratic.push_back(x);
        out.increments.push_back(std::log1p(x));
        out.lower_bound += x / (1 + x);
        out.upper_bound += x;
        cur.add_outer(u, u);
        chol = Cholesky<double>(cur, t);
        out.logdets.push_back(chol.log_det());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Information form  P_i^{-1} = P_{i-1}^{-1} + v_i v_i^T

struct InfoFilterTrace {
    std::vector<double> dets;       // det(P_0), ..., det(P_k)
    std::vector<double> quadratic;  // v_i^T P_{i-1} v_i
    std::vector<double> factors;    // 1 / (1 + v_i^T P_{i-1} v_i)
    std::optional<double> beta;     // realized minimum of the quadratic forms
    std::optional<double> geometric_bound;  // det(P) (1 + beta)^{-k}, when beta > 0
};

inline InfoFilterTrace info_filter_trace(const Matrix& p, const std::vector<Vector>& measurements,
                                         const OptTolerance& tol = {}) {
    detail::require(p.is_square(), ErrorKind::NonSquare, "P is " + p.shape());
    const std::size_t n = p.rows();
    const Tolerance t = resolve(tol, n);
    InfoFilterTrace out;
    const auto chol_p = Cholesky<double>(p, t);
    Matrix info = chol_p.inverse();
    // symmetrize to keep later Cholesky factorizations clean
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) info(i, j) = info(j, i) = (info(i, j) + info(j, i)) / 2;
    out.dets.push_back(chol_p.determinant());
    for (std::size_t i = 0; i < measurements.size(); ++i) {
        const auto& v = measurements[i];
        detail::require(v.size() == n, ErrorKind::DimensionMismatch,
                        "measurement " + std::to_string(i) + " has wrong length");
        const double q = i == 0 ? dot(v, matvec(p, v)) : Cholesky<double>(info, t).inverse_quadratic_form(v);
        const double f = 1.0 / (1.0 + q);
        out.quadratic.push_back(q);
        out.factors.push_back(f);
        out.dets.push_back(out.dets.back() * f);
        info.add_outer(v, v);
    }
    if (!out.quadratic.empty()) {
        double beta = out.quadratic.front();
        for (double q : out.quadratic) beta = std::min(beta, q);
        out.beta = beta;
        if (beta > 0) {
            // same operation order as the determinant recursion, so rounding
            // cannot invert det_k <= bound
            const double f = 1.0 / (1.0 + beta);
            double bound = out.dets.front();
            for (std::size_t i = 0; i < out.quadratic.size(); ++i) bound *= f;
            out.geometric_bound = bound;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Controllability Gramian

struct GramianBuild {
    Matrix A;
    Matrix B;
    std::size_t horizon = 0;
    std::vector<Vector> directions;  // u_l = A^i b_j, i outer, j inner
    Matrix W;

    std::size_t n() const noexcept { return A.rows(); }
};

inline Matrix gramian_from_directions(std::size_t n, const std::vector<Vector>& directions) {
    Matrix w(n, n);
    for (const auto& u : directions) {
        detail::require(u.size() == n, ErrorKind::DimensionMismatch, "direction has wrong length");
        w.add_outer(u, u);
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) w(i, j) = w(j, i) = (w(i, j) + w(j, i)) / 2;
    return w;
}

inline GramianBuild build_gramian(const Matrix& a, const Matrix& b, std::size_t horizon) {
    detail::require(a.is_square(), ErrorKind::NonSquare, "A is " + a.shape());
    detail::require(b.rows() == a.rows(), ErrorKind::DimensionMismatch,
                    "B is " + b.shape() + " but A is " + a.shape());
    detail::require(horizon >= 1, ErrorKind::InvalidArgument, "horizon must be at least 1");
    GramianBuild g{a, b, horizon, {}, {}};
    std::vector<Vector> cur;
    for (std::size_t j = 0; j < b.cols(); ++j) cur.push_back(b.col(j));
    for (std::size_t i = 0; i < horizon; ++i) {
        for (auto& c : cur) {
            g.directions.push_back(c);
            c = matvec(a, c);
        }
    }
    g.W = gramian_from_directions(a.rows(), g.directions);
    return g;
}

/// W~_0(eps), ..., W~_L(eps) with W~_l = eps I + sum_{j<=l} u_j u_j^T.
inline std::vector<Matrix> regularized_partial_sums(const std::vector<Vector>& directions, std::size_t n, double eps) {
    std::vector<Matrix> out;
    Matrix w = Matrix::identity(n) * eps;
    out.push_back(w);
    for (const auto& u : directions) {
        w.add_outer(u, u);
        out.push_back(w);
    }
    return out;
}

struct GramianEpsRow {
    double eps = 0;
    std::vector<double> factors;    // 1 + u_l^T W~_{l-1}(eps)^{-1} u_l
    double det_regularized = 0;     // det(W~_L(eps))
    double identity_residual = 0;   // |det - eps^n prod| / det
    double normalized_det = 0;      // eps^{-(n-r)} det(eps I + W)
    double scaled_product = 0;      // eps^r prod factors
};

struct GramianGrowth {
    std::vector<double> eps_schedule;
    std::vector<GramianEpsRow> rows;
    std::size_t rank_r = 0;
    double pdet_estimate = 0;        // normalized determinant at the smallest eps
    double pdet_product_route = 0;   // eps^r prod factors at the smallest eps
    std::optional<double> log_pdet;  // when pdet > 0
    bool converged = false;

    const GramianEpsRow& finest() const { return rows.back(); }
};

namespace detail {

inline GramianGrowth gramian_growth_unchecked(const std::vector<Vector>& directions, const Matrix& w,
                                              const std::vector<double>& schedule, const Tolerance& t) {
    constexpr double kLimitTol = 1e-6;
    const std::size_t n = w.rows();
    using LD = long double;
    GramianGrowth out;
    out.eps_schedule = schedule;
    out.rank_r = rank(w, t);
    const std::size_t r = out.rank_r;
    const Tolerance ld_tol = Tolerance::standard(n);
    for (double eps : schedule) {
        GramianEpsRow row;
        row.eps = eps;
        BasicMatrix<LD> wt = BasicMatrix<LD>::identity(n) * static_cast<LD>(eps);
        LD log_prod = 0;
        for (const auto& u : directions) {
            const auto ul = cast_vector<LD>(u);
            const LD x = Cholesky<LD>(wt, ld_tol).inverse_quadratic_form(ul);
            row.factors.push_back(static_cast<double>(1 + x));
            log_prod += std::log1p(x);
            wt.add_outer(ul, ul);
        }
        const auto chol = Cholesky<LD>(wt, ld_tol);
        const LD log_det = chol.log_det();
        const LD log_eps = std::log(static_cast<LD>(eps));
        const LD log_identity = static_cast<LD>(n) * log_eps + log_prod;
        row.det_regularized = static_cast<double>(std::exp(log_det));
        row.identity_residual = static_cast<double>(std::abs(std::expm1(log_identity - log_det)));
        row.normalized_det = static_cast<double>(std::exp(log_det - static_cast<LD>(n - r) * log_eps));
        row.scaled_product = static_cast<double>(std::exp(static_cast<LD>(r) * log_eps + log_prod));
        out.rows.push_back(std::move(row));
    }
    const auto& last = out.rows.back();
    const auto& prev = out.rows[out.rows.size() - 2];
    out.pdet_estimate = last.normalized_det;
    out.pdet_product_route = last.scaled_product;
    if (out.pdet_estimate > 0) {
        LD lp = static_cast<LD>(r) * std::log(static_cast<LD>(last.eps));
        for (double f : last.factors) lp += std::log(static_cast<LD>(f));
        out.log_pdet = static_cast<double>(lp);
    }
    const double settle = std::abs(last.normalized_det - prev.normalized_det);
    const double routes = std::abs(last.normalized_det - last.scaled_product);
    out.converged = settle <= kLimitTol * std::abs(last.normalized_det) &&
                    routes <= kLimitTol * std::abs(last.normalized_det);
    return out;
}

}  // namespace detail

/// Regularized product identity per eps and the pseudodeterminant of W as
/// its eps -> 0 limit (normalized determinant and scaled product routes).
inline GramianGrowth gramian_pdet_growth(const GramianBuild& g, const std::vector<double>& schedule,
                                         const OptTolerance& tol = {}) {
    detail::check_schedule(schedule);
    const Tolerance t = resolve(tol, g.n());
    auto out = detail::gramian_growth_unchecked(g.directions, g.W, schedule, t);
    if (!out.converged) {
        std::vector<std::pair<double, double>> table;
        for (const auto& row : out.rows) table.emplace_back(row.eps, row.normalized_det);
        throw NotConverged("normalized Gramian determinant did not settle to 1e-6 relative", std::move(table));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reachable ellipse {x : x^T W^{-1} x <= 1} in the plane

struct Ellipse2D {
    double semi_axis_a = 0;  // major
    double semi_axis_b = 0;  // minor, 0 for a segment
    double rotation_rad = 0; // angle of the major axis, in (-pi/2, pi/2]
    double area = 0;
};

inline Ellipse2D reach_ellipse(const Matrix& w, const OptTolerance& tol = {}) {
    detail::require(w.rows() == 2 && w.cols() == 2, ErrorKind::NotTwoDimensional, "W is " + w.shape());
    const Tolerance t = resolve(tol, 2);
    const double thr = t.threshold(max_abs(w));
    if (!is_symmetric(w, thr)) throw Error(ErrorKind::NotPSD, "W is not symmetric");
    const auto e = symmetric_eigen(w);
    if (e.values[1] < -thr) throw Error(ErrorKind::NotPSD, "W has a negative eigenvalue");
    Ellipse2D out;
    out.semi_axis_a = std::sqrt(std::max(e.values[0], 0.0));
    out.semi_axis_b = std::sqrt(std::max(e.values[1], 0.0));
    double angle = std::atan2(e.vectors(1, 0), e.vectors(0, 0));
    if (angle <= -std::numbers::pi / 2) angle += std::numbers::pi;
    if (angle > std::numbers::pi / 2) angle -= std::numbers::pi;
    out.rotation_rad = angle;
    out.area = std::numbers::pi * out.semi_axis_a * out.semi_axis_b;
    return out;
}

// ---------------------------------------------------------------------------
// Perturbed directions

struct PerturbedTrial {
    std::uint64_t seed = 0;
    std::size_t rank = 0;
    double pdet = 0;
    std::optional<double> log_pdet;
    std::vector<double> factors;  // at the smallest eps
    bool converged = false;
};

struct PerturbedExperiment {
    double noise_scale = 0;
    std::uint64_t seed = 0;
    std::size_t nominal_rank = 0;
    double nominal_pdet = 0;
    std::vector<double> nominal_factors;
    std::vector<PerturbedTrial> trials;
    double mean_pdet = 0;
    std::vector<double> mean_factors;
    std::size_t rank_increases = 0;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Uniform draw from the n-ball of the given radius. Box-Muller is written
/// out so the stream does not depend on the standard library's distributions.
inline Vector uniform_in_ball(std::mt19937_64& gen, std::size_t n, double radius) {
    auto unit = [&] { return static_cast<double>(gen() >> 11) * 0x1p-53; };
    Vector x(n);
    double norm = 0;
    do {
        norm = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double u1 = 1.0 - unit();
            const double u2 = unit();
            x[i] = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
            norm += x[i] * x[i];
        }
        norm = std::sqrt(norm);
    } while (norm == 0);
    const double rho = radius * std::pow(unit(), 1.0 / static_cast<double>(n));
    for (double& xi : x) xi *= rho / norm;
    return x;
}

}  // namespace detail

/// Directions u_l + w_l with w_l uniform in a ball of radius
/// noise_scale ||u_l|| (noise_scale max_j ||u_j|| for zero directions).
inline PerturbedExperiment perturbed_gramian_experiment(const GramianBuild& g, double noise_scale, std::size_t trials,
                                                        std::uint64_t seed, const std::vector<double>& schedule,
                                                        const OptTolerance& tol = {}) {
    detail::require(noise_scale >= 0 && std::isfinite(noise_scale), ErrorKind::InvalidArgument,
                    "noise scale must be nonnegative");
    detail::check_schedule(schedule);
    const std::size_t n = g.n();
    const Tolerance t = resolve(tol, n);
    PerturbedExperiment out;
    out.noise_scale = noise_scale;
    out.seed = seed;
    const auto nominal = detail::gramian_growth_unchecked(g.directions, g.W, schedule, t);
    out.nominal_rank = nominal.rank_r;
    out.nominal_pdet = nominal.pdet_estimate;
    out.nominal_factors = nominal.finest().factors;

    double max_norm = 0;
    for (const auto& u : g.directions) max_norm = std::max(max_norm, norm2(u));
    const std::size_t count = g.directions.size();
    out.mean_factors.assign(count, 0.0);
    for (std::size_t k = 0; k < trials; ++k) {
        PerturbedTrial tr;
        tr.seed = detail::splitmix64(seed + k);
        std::mt19937_64 gen(tr.seed);
        std::vector<Vector> dirs = g.directions;
        for (auto& u : dirs) {
            const double nu = norm2(u);
            const auto w = detail::uniform_in_ball(gen, n, noise_scale * (nu > 0 ? nu : max_norm));
            for (std::size_t i = 0; i < n; ++i) u[i] += w[i];
        }
        const auto res = detail::gramian_growth_unchecked(dirs, gramian_from_directions(n, dirs), schedule, t);
        tr.rank = res.rank_r;
        tr.pdet = res.pdet_estimate;
        tr.log_pdet = res.log_pdet;
        tr.factors = res.finest().factors;
        tr.converged = res.converged;
        out.mean_pdet += tr.pdet;
        for (std::size_t l = 0; l < count; ++l) out.mean_factors[l] += tr.factors[l];
        if (tr.rank > out.nominal_rank) ++out.rank_increases;
        out.trials.push_back(std::move(tr));
    }
    if (trials > 0) {
        out.mean_pdet /= static_cast<double>(trials);
        for (double& f : out.mean_factors) f /= static_cast<double>(trials);
    }
    return out;
}

}  // namespace detdyn
