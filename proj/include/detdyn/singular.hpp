#pragma once

// Group (index-1 Drazin) inverse, spectral projector, pseudodeterminant and
// the pseudodeterminant form of the matrix determinant lemma, together with
// its regularized epsilon-limit.

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"

namespace detdyn {

struct GroupInverseResult {
    Matrix h_drazin;   // H^D
    Matrix projector;  // P0 = I - H H^D
    std::size_t rank_q = 0;
    std::size_t nullity_nu = 0;
    double kappa = 0;  // ||H||_F ||H^D||_F, the rounding scale of P0
};

enum class PdetMethod { Charpoly, EigenProduct };

constexpr const char* to_string(PdetMethod m) noexcept {
    return m == PdetMethod::Charpoly ? "charpoly" : "eigenproduct";
}

struct PdetResult {
    double value = 0;
    std::size_t nullity = 0;
    PdetMethod method = PdetMethod::Charpoly;
};

struct CompatibilityReport {
    double norm_P0U = 0;      // ||P0 U||_F
    double norm_VtP0 = 0;     // ||V^T P0||_F
    double threshold_U = 0;   // tol against max(||P0||_F, kappa) ||U||_F
    double threshold_V = 0;   // tol against max(||P0||_F, kappa) ||V||_F
    bool pass = false;
};

class CompatibilityViolated : public Error {
public:
    explicit CompatibilityViolated(CompatibilityReport report)
        : Error(ErrorKind::CompatibilityViolated,
                "P0 U = 0 and V^T P0 = 0 do not hold at tolerance (||P0 U|| = " + sci(report.norm_P0U) +
                    ", ||V^T P0|| = " + sci(report.norm_VtP0) + ")"),
          report_(report) {}

    const CompatibilityReport& report() const noexcept { return report_; }

private:
    static std::string sci(double x) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3e", x);
        return buf;
    }

    CompatibilityReport report_;
};

/// (epsilon, value) rows of a limit that failed to settle.
class NotConverged : public Error {
public:
    NotConverged(const std::string& what, std::vector<std::pair<double, double>> table)
        : Error(ErrorKind::NotConverged, what), table_(std::move(table)) {}

    const std::vector<std::pair<double, double>>& table() const noexcept { return table_; }

private:
    std::vector<std::pair<double, double>> table_;
};

/// Group inverse via a full-rank factorization H = C F: when F C is
/// nonsingular the index is one and H^D = C (F C)^{-2} F. A singular F C
/// means a nilpotent Jordan block of size > 1, which is rejected.
inline GroupInverseResult group_inverse(const Matrix& h, const OptTolerance& tol = {}) {
    detail::require(h.is_square(), ErrorKind::NonSquare, "group inverse of " + h.shape());
    const std::size_t n = h.rows();
    const Tolerance t = resolve(tol, n);
    const auto frf = full_rank_factorization(h, t);
    const std::size_t r = frf.rank();
    GroupInverseResult out;
    out.rank_q = r;
    out.nullity_nu = n - r;
    if (r == 0) {
        out.h_drazin = Matrix(n, n);
        out.projector = Matrix::identity(n);
        return out;
    }
    if (r == n) {
        out.h_drazin = inverse(h, t);
        out.projector = Matrix(n, n);
        out.kappa = frobenius_norm(h) * frobenius_norm(out.h_drazin);
        return out;
    }
    // F C carries rounding of order ||C|| ||F||, not of its own entries, and
    // pivot growth in the factorization inflates it by a few units more
    constexpr double kFcSafety = 1024;
    const Matrix fc = frf.right * frf.left;
    const double fc_scale = kFcSafety * frobenius_norm(frf.left) * frobenius_norm(frf.right);
    const double fc_max = max_abs(fc);
    const Tolerance fc_tol{fc_max > 0 ? t.rel * fc_scale / fc_max : t.rel, t.abs};
    if (rank(fc, fc_tol) < r)
        throw Error(ErrorKind::IndexGreaterThanOne,
                    "F C is singular: the zero eigenvalue is not semisimple (index > 1)");
    const Matrix fc_inv = inverse(fc, t);
    out.h_drazin = frf.left * (fc_inv * fc_inv) * frf.right;
    out.projector = Matrix::identity(n) - h * out.h_drazin;
    out.kappa = frobenius_norm(h) * frobenius_norm(out.h_drazin);
    return out;
}

inline Matrix spectral_projector(const Matrix& h, const OptTolerance& tol = {}) {
    return group_inverse(h, tol).projector;
}

namespace detail {

inline double binomial(std::size_t n, std::size_t k) {
    double b = 1;
    for (std::size_t i = 1; i <= k; ++i) b = b * static_cast<double>(n - k + i) / static_cast<double>(i);
    return b;
}

inline double inf_norm(const Matrix& m) {
    double s = 0;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double r = 0;
        for (double x : m.row(i)) r += std::abs(x);
        s = std::max(s, r);
    }
    return s;
}

// Cheap upper bound on ||M||_2, hence on the spectral radius.
inline double spectral_bound(const Matrix& m) {
    return std::min(frobenius_norm(m), std::sqrt(inf_norm(m) * inf_norm(m.transpose())));
}

}  // namespace detail

/// Pseudodeterminant from the characteristic polynomial. With
/// det(lambda I - H) = lambda^nu (lambda^q + ... + c_q), pdet = (-1)^q c_q
/// where c_q is the last coefficient not negligible against its natural scale
/// binom(n, q) ||H||^q, with ||H|| an upper bound on the 2-norm.
inline PdetResult pdet(const Matrix& h, const OptTolerance& tol = {}) {
    detail::require(h.is_square(), ErrorKind::NonSquare, "pseudodeterminant of " + h.shape());
    const std::size_t n = h.rows();
    const Tolerance t = resolve(tol, n);
    const auto cp = charpoly(h);
    const double rho = detail::spectral_bound(h);
    std::size_t q = 0;
    for (std::size_t k = n; k >= 1; --k) {
        const double scale = detail::binomial(n, k) * std::pow(rho, static_cast<double>(k));
        if (std::abs(cp.coeffs[k]) > t.threshold(scale)) {
            q = k;
            break;
        }
    }
    if (q == 0)
        throw Error(ErrorKind::AllCoefficientsBelowTolerance,
                    "every non-leading characteristic coefficient is negligible; pdet is undefined");
    PdetResult out;
    out.nullity = n - q;
    out.value = q % 2 == 0 ? cp.coeffs[q] : -cp.coeffs[q];
    out.method = PdetMethod::Charpoly;
    return out;
}

/// Pseudodeterminant as a product of eigenvalues. The nonzero spectrum is
/// isolated by compressing H = C F to F C (same nonzero eigenvalues) until
/// the compressed matrix is nonsingular at tolerance.
inline PdetResult pdet_eigenproduct(const Matrix& h, const OptTolerance& tol = {}) {
    detail::require(h.is_square(), ErrorKind::NonSquare, "pseudodeterminant of " + h.shape());
    const std::size_t n = h.rows();
    const Tolerance t = resolve(tol, n);
    Matrix core_part = h;
    while (core_part.rows() > 0) {
        const auto frf = full_rank_factorization(core_part, t);
        if (frf.rank() == core_part.rows()) break;
        core_part = frf.right * frf.left;
    }
    if (core_part.rows() == 0)
        throw Error(ErrorKind::AllCoefficientsBelowTolerance, "matrix has no nonzero eigenvalues at tolerance");
    const auto spec = eigenvalues(core_part, t);
    PdetResult out;
    out.value = spec.product().real();
    out.nullity = n - core_part.rows();
    out.method = PdetMethod::EigenProduct;
    return out;
}

/// Norms of P0 U and V^T P0 against their natural scales. P0 = I - H H^D
/// is only known to about kappa = ||H|| ||H^D|| times the unit roundoff.
inline CompatibilityReport compatibility_check(const GroupInverseResult& g, const Matrix& u, const Matrix& v,
                                               const Tolerance& tol) {
    const std::size_t n = g.projector.rows();
    detail::require(u.rows() == n && v.rows() == n && u.cols() == v.cols(), ErrorKind::DimensionMismatch,
                    "U and V must both be " + std::to_string(n) + " x r");
    CompatibilityReport rep;
    const double p0 = std::max(frobenius_norm(g.projector), g.kappa);
    rep.norm_P0U = frobenius_norm(g.projector * u);
    rep.norm_VtP0 = frobenius_norm(v.transpose() * g.projector);
    rep.threshold_U = tol.threshold(p0 * frobenius_norm(u));
    rep.threshold_V = tol.threshold(p0 * frobenius_norm(v));
    rep.pass = rep.norm_P0U <= rep.threshold_U && rep.norm_VtP0 <= rep.threshold_V;
    return rep;
}

inline CompatibilityReport compatibility_check(const Matrix& h, const Matrix& u, const Matrix& v,
                                               const OptTolerance& tol = {}) {
    detail::require(h.is_square(), ErrorKind::NonSquare, "base matrix is " + h.shape());
    const Tolerance t = resolve(tol, h.rows());
    return compatibility_check(group_inverse(h, t), u, v, t);
}

namespace detail {

inline PdetResult checked_pdet(const Matrix& h, const GroupInverseResult& g, const Tolerance& t) {
    const auto p = pdet(h, t);
    if (p.nullity != g.nullity_nu)
        throw Error(ErrorKind::NullityMismatch,
                    "rank-based nullity " + std::to_string(g.nullity_nu) + " disagrees with characteristic nullity " +
                        std::to_string(p.nullity));
    return p;
}

}  // namespace detail

/// pdet(H + U V^T) = pdet(H) det(I_r + V^T H^D U) for index-1 H with
/// P0 U = 0 and V^T P0 = 0.
inline double pdet_lemma(const Matrix& h, const Matrix& u, const Matrix& v, const OptTolerance& tol = {}) {
    detail::require(h.is_square(), ErrorKind::NonSquare, "base matrix is " + h.shape());
    const Tolerance t = resolve(tol, h.rows());
    const auto g = group_inverse(h, t);
    const auto rep = compatibility_check(g, u, v, t);
    if (!rep.pass) throw CompatibilityViolated(rep);
    const auto p = detail::checked_pdet(h, g, t);
    const std::size_t r = u.cols();
    Matrix small = Matrix::identity(r) + v.transpose() * g.h_drazin * u;
    return p.value * det(small, Tolerance::standard(r));
}

/// Geometric schedule 1e-1, 1e-2, ... down to eps_min (inclusive).
inline std::vector<double> default_eps_schedule(double eps_min = 1e-8) {
    detail::require(eps_min > 0 && eps_min <= 0.1, ErrorKind::InvalidArgument, "eps_min must lie in (0, 0.1]");
    std::vector<double> s;
    for (int k = 1;; ++k) {
        const double e = std::pow(10.0, -k);
        if (e < eps_min * (1 - 1e-9)) break;
        s.push_back(e);
    }
    return s;
}

struct RegularizedLimit {
    double estimate = 0;
    std::vector<std::pair<double, double>> per_eps;  // (eps, eps^-nu det(H + eps I + U V^T))
    bool converged = false;
    std::size_t nullity = 0;
    double lemma_value = 0;  // pdet(H) det(I + V^T H^D U)
    double lemma_rel_error = 0;
};

namespace detail {

inline void check_schedule(const std::vector<double>& schedule) {
    if (schedule.size() < 3)
        throw Error(ErrorKind::ScheduleTooShort, "epsilon schedule needs at least 3 points");
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        require(schedule[i] > 0 && std::isfinite(schedule[i]), ErrorKind::InvalidArgument,
                "epsilon values must be positive");
        if (i > 0)
            require(schedule[i] < schedule[i - 1], ErrorKind::InvalidArgument,
                    "epsilon schedule must be strictly decreasing");
    }
}

}  // namespace detail

/// eps^-nu det(H + eps I + U V^T) along a decreasing schedule. Evaluated in
/// extended precision; converged when the last two values agree to 1e-6
/// relative and the final value matches pdet_lemma to the same tolerance.
inline RegularizedLimit regularized_limit(const Matrix& h, const Matrix& u, const Matrix& v,
                                          const std::vector<double>& schedule, const OptTolerance& tol = {}) {
    constexpr double kLimitTol = 1e-6;
    detail::check_schedule(schedule);
    detail::require(h.is_square(), ErrorKind::NonSquare, "base matrix is " + h.shape());
    const std::size_t n = h.rows();
    const Tolerance t = resolve(tol, n);
    const auto g = group_inverse(h, t);
    const auto rep = compatibility_check(g, u, v, t);
    if (!rep.pass) throw CompatibilityViolated(rep);
    const auto p = detail::checked_pdet(h, g, t);

    RegularizedLimit out;
    out.nullity = g.nullity_nu;
    using LD = long double;
    const BasicMatrix<LD> base = h.cast<LD>() + u.cast<LD>() * v.cast<LD>().transpose();
    for (double eps : schedule) {
        BasicMatrix<LD> m = base;
        m.add_to_diagonal(static_cast<LD>(eps));
        const LD d = det(m, Tolerance::standard(n));
        const LD val = d / std::pow(static_cast<LD>(eps), static_cast<LD>(out.nullity));
        out.per_eps.emplace_back(eps, static_cast<double>(val));
    }
    const double last = out.per_eps.back().second;
    const double prev = out.per_eps[out.per_eps.size() - 2].second;
    out.estimate = last;
    const std::size_t r = u.cols();
    out.lemma_value = p.value * det(Matrix::identity(r) + v.transpose() * g.h_drazin * u, Tolerance::standard(r));
    out.lemma_rel_error = std::abs(last - out.lemma_value) / std::max(std::abs(out.lemma_value), 1e-300);
    const bool settled = std::abs(last - prev) <= kLimitTol * std::abs(last);
    if (!settled) throw NotConverged("last two regularized values differ by more than 1e-6 relative", out.per_eps);
    if (out.lemma_rel_error > kLimitTol)
        throw NotConverged("regularized limit disagrees with the pseudodeterminant lemma", out.per_eps);
    out.converged = true;
    return out;
}

}  // namespace detdyn
