#pragma once

// Characteristic polynomial of A + U V^T by additive adjugate corrections,
// the secular function of a rank-one eigenvalue shift, and a contour test
// for stability preservation.

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "core.hpp"
#include "dynamics.hpp"

namespace detdyn {

namespace detail {

/// lambda I - A - sum_{i<k} u_i v_i^T in complex arithmetic.
inline ComplexMatrix shifted_resolvent_base(const Matrix& a, const UpdateSequence& seq, std::size_t k,
                                            Complex lambda) {
    ComplexMatrix m = to_complex(seq.applied_to(a, k));
    m *= Complex{-1.0, 0.0};
    m.add_to_diagonal(lambda);
    return m;
}

}  // namespace detail

/// det(lambda I - A - U V^T) as det(lambda I - A) minus one adjugate
/// correction v_i^T adj(lambda I - A - Delta_{i-1}) u_i per update.
inline Complex charpoly_perturbed_eval(const Matrix& a, const UpdateSequence& seq, Complex lambda) {
    seq.require_compatible(a);
    Complex value = charpoly(a)(lambda);
    for (std::size_t i = 0; i < seq.size(); ++i) {
        const ComplexMatrix adj = adjugate(detail::shifted_resolvent_base(a, seq, i, lambda));
        const auto u = cast_vector<Complex>(seq[i].u);
        const auto v = cast_vector<Complex>(seq[i].v);
        value -= dot(v, matvec(adj, u));
    }
    return value;
}

struct SecularEvaluation {
    Complex lambda;
    Complex value;                     // 1 - v^T (lambda I - A - Delta)^{-1} u
    bool resolvent_cond_flag = false;  // pivot ratio below 1e-8
};

/// f(lambda) = 1 - v^T (lambda I - A - Delta_prev)^{-1} u. Its zeros away
/// from the spectrum of A + Delta_prev are eigenvalues of A + Delta_prev + u v^T.
inline SecularEvaluation secular_value(const Matrix& a, const UpdateSequence& prev, const RankOneUpdate& up,
                                       Complex lambda, const OptTolerance& tol = {}) {
    prev.require_compatible(a);
    const std::size_t n = a.rows();
    detail::require(up.u.size() == n && up.v.size() == n, ErrorKind::DimensionMismatch,
                    "update vectors must have length " + std::to_string(n));
    const ComplexMatrix m = detail::shifted_resolvent_base(a, prev, prev.size(), lambda);
    const LuFactorization<Complex> lu(m, resolve(tol, n));
    if (lu.singular())
        throw Error(ErrorKind::ResolventSingular, "lambda is numerically an eigenvalue of A + Delta");
    const auto x = lu.solve(cast_vector<Complex>(up.u));
    SecularEvaluation out;
    out.lambda = lambda;
    out.value = Complex{1.0, 0.0} - dot(cast_vector<Complex>(up.v), x);
    const auto [lo, hi] = lu.pivot_range();
    out.resolvent_cond_flag = lo < 1e-8 * hi;
    return out;
}

/// Newton iteration on the secular function from a starting guess. Uses
/// f'(lambda) = v^T R(lambda)^2 u with R the resolvent.
inline Complex refine_secular_root(const Matrix& a, const UpdateSequence& prev, const RankOneUpdate& up,
                                   Complex lambda, int max_iterations = 60) {
    prev.require_compatible(a);
    const std::size_t n = a.rows();
    const auto u = cast_vector<Complex>(up.u);
    const auto v = cast_vector<Complex>(up.v);
    for (int it = 0; it < max_iterations; ++it) {
        const ComplexMatrix m = detail::shifted_resolvent_base(a, prev, prev.size(), lambda);
        const LuFactorization<Complex> lu(m, Tolerance::standard(n));
        if (lu.singular()) return lambda;
        const auto x = lu.solve(u);
        const auto y = lu.solve(x);
        const Complex f = Complex{1.0, 0.0} - dot(v, x);
        const Complex df = dot(v, y);
        if (df == Complex{}) return lambda;
        const Complex step = f / df;
        lambda -= step;
        if (std::abs(step) <= 1e-15 * (1.0 + std::abs(lambda))) break;
    }
    return lambda;
}

struct StabilityCertificate {
    bool base_hurwitz = false;
    int winding = 0;
    double contour_radius = 0;
    std::size_t samples = 0;
    int rhp_eigs_oracle = 0;

    bool stable() const noexcept { return winding == 0; }
};

struct ContourOptions {
    std::size_t samples = 4096;
    std::size_t max_samples = std::size_t{1} << 20;
};

namespace detail {

/// Point k of n on the D-contour enclosing the closed right half-plane,
/// traversed counterclockwise: the imaginary axis from +iR down to -iR, then
/// the right semicircle back up to +iR. Half the points go on each piece.
inline Complex d_contour_point(std::size_t k, std::size_t n, double r) {
    const std::size_t half = n / 2;
    if (k < half) {
        const double s = static_cast<double>(k) / static_cast<double>(half);
        return {0.0, r * (1.0 - 2.0 * s)};
    }
    const double s = static_cast<double>(k - half) / static_cast<double>(n - half);
    const double theta = -std::numbers::pi / 2 + std::numbers::pi * s;
    return std::polar(r, theta);
}

}  // namespace detail

/// Winding number of f(lambda) = 1 - v^T (lambda I - A)^{-1} u around the
/// D-contour. A is Hurwitz, so f has no poles inside and the winding counts
/// the closed right-half-plane eigenvalues of A + u v^T.
inline StabilityCertificate stability_preserved(const Matrix& a, const Vector& u, const Vector& v,
                                                const ContourOptions& opt = {}, const OptTolerance& tol = {}) {
    detail::require(a.is_square(), ErrorKind::NonSquare, "A is " + a.shape());
    const std::size_t n = a.rows();
    detail::require(u.size() == n && v.size() == n, ErrorKind::DimensionMismatch,
                    "u and v must have length " + std::to_string(n));
    detail::require(opt.samples >= 8 && opt.samples <= opt.max_samples, ErrorKind::InvalidArgument,
                    "sample count must lie in [8, max_samples]");
    const Tolerance t = resolve(tol, n);

    StabilityCertificate cert;
    const auto base = eigenvalues(a, t);
    const double hurwitz_margin = t.threshold(max_abs(a));
    for (const auto& z : base.eigenvalues)
        if (z.real() >= -hurwitz_margin)
            throw Error(ErrorKind::BaseNotHurwitz, "A has an eigenvalue with nonnegative real part");
    cert.base_hurwitz = true;
    cert.contour_radius = 2.0 * (frobenius_norm(a) + norm2(u) * norm2(v)) + 1.0;

    Matrix perturbed = a;
    perturbed.add_outer(u, v);
    const auto spec = eigenvalues(perturbed, t);
    for (const auto& z : spec.eigenvalues) {
        if (std::abs(z.real()) <= 1e-9 * cert.contour_radius)
            throw Error(ErrorKind::EigenvalueOnContour, "A + u v^T has an eigenvalue on the imaginary axis");
        if (z.real() > 0) ++cert.rhp_eigs_oracle;
    }

    const ComplexMatrix neg_a = to_complex(a) * Complex{-1.0, 0.0};
    const auto uc = cast_vector<Complex>(u);
    const auto vc = cast_vector<Complex>(v);
    auto f = [&](Complex lambda) {
        ComplexMatrix m = neg_a;
        m.add_to_diagonal(lambda);
        const LuFactorization<Complex> lu(m, t);
        if (lu.singular())
            throw Error(ErrorKind::EigenvalueOnContour, "A has an eigenvalue on the contour");
        const Complex q = dot(vc, lu.solve(uc));
        const Complex val = Complex{1.0, 0.0} - q;
        if (std::abs(val) <= t.threshold(std::max(1.0, std::abs(q))))
            throw Error(ErrorKind::EigenvalueOnContour, "secular function vanishes on the contour");
        return val;
    };

    for (std::size_t samples = opt.samples;; samples *= 2) {
        std::vector<Complex> vals(samples);
        for (std::size_t k = 0; k < samples; ++k) vals[k] = f(detail::d_contour_point(k, samples, cert.contour_radius));
        double total = 0;
        bool coarse = false;
        for (std::size_t k = 0; k < samples; ++k) {
            const double step = std::arg(vals[(k + 1) % samples] / vals[k]);
            if (std::abs(step) > std::numbers::pi / 2) {
                coarse = true;
                break;
            }
            total += step;
        }
        if (coarse) {
            if (samples * 2 > opt.max_samples)
                throw Error(ErrorKind::ContourTooCoarse,
                            "phase step exceeds pi/2 at " + std::to_string(samples) + " samples");
            continue;
        }
        cert.samples = samples;
        cert.winding = static_cast<int>(std::lround(total / (2 * std::numbers::pi)));
        break;
    }
    if (cert.winding != cert.rhp_eigs_oracle)
        throw Error(ErrorKind::WindingMismatch, "winding " + std::to_string(cert.winding) +
                                                    " disagrees with eigenvalue count " +
                                                    std::to_string(cert.rhp_eigs_oracle));
    return cert;
}

}  // namespace detdyn
