#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <vector>

#include "errors.hpp"
#include "faddeev_leverrier.hpp"
#include "matrix.hpp"
#include "tolerance.hpp"

namespace detdyn {

enum class SpectrumSource { GeneralRootfind, SymmetricJacobi };

constexpr const char* to_string(SpectrumSource s) noexcept {
    return s == SpectrumSource::GeneralRootfind ? "general-rootfind" : "symmetric-jacobi";
}

/// Eigenvalues with algebraic multiplicity, ordered by decreasing real part
/// (ties by decreasing imaginary part). Nonreal values come in exact
/// conjugate pairs.
struct Spectrum {
    std::vector<Complex> eigenvalues;
    SpectrumSource source = SpectrumSource::GeneralRootfind;

    std::size_t size() const noexcept { return eigenvalues.size(); }

    Complex product() const {
        Complex p{1.0, 0.0};
        for (const auto& z : eigenvalues) p *= z;
        return p;
    }
};

struct RootFindOptions {
    int max_iterations = 500;
    double convergence = 1e-12;
};

namespace detail {

inline void sort_spectrum(std::vector<Complex>& z) {
    std::sort(z.begin(), z.end(), [](const Complex& a, const Complex& b) {
        if (a.real() != b.real()) return a.real() > b.real();
        return a.imag() > b.imag();
    });
}

/// Snaps near-real roots onto the real axis and symmetrizes the remaining
/// roots into exact conjugate pairs.
inline void enforce_conjugate_pairs(std::vector<Complex>& roots) {
    std::vector<Complex> upper, lower, out;
    for (const auto& z : roots) {
        const double tau = 1e-8 * (1.0 + std::abs(z));
        if (std::abs(z.imag()) <= tau)
            out.emplace_back(z.real(), 0.0);
        else if (z.imag() > 0)
            upper.push_back(z);
        else
            lower.push_back(z);
    }
    std::vector<bool> used(lower.size(), false);
    for (const auto& z : upper) {
        std::size_t best = lower.size();
        double dist = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < lower.size(); ++k) {
            if (used[k]) continue;
            const double d = std::abs(std::conj(lower[k]) - z);
            if (d < dist) {
                dist = d;
                best = k;
            }
        }
        if (best == lower.size()) {
            out.emplace_back(z.real(), 0.0);
            continue;
        }
        used[best] = true;
        const Complex avg = 0.5 * (z + std::conj(lower[best]));
        out.push_back(avg);
        out.push_back(std::conj(avg));
    }
    for (std::size_t k = 0; k < lower.size(); ++k)
        if (!used[k]) out.emplace_back(lower[k].real(), 0.0);
    roots = std::move(out);
}

}  // namespace detail

/// Roots of a real monic polynomial by simultaneous Weierstrass
/// (Durand-Kerner) iteration. Exact zero trailing coefficients are deflated
/// as exact zero roots.
inline std::vector<Complex> polynomial_roots(std::vector<double> coeffs, const RootFindOptions& opt = {}) {
    detail::require(!coeffs.empty() && coeffs[0] == 1.0, ErrorKind::InvalidArgument, "polynomial must be monic");
    std::vector<Complex> roots;
    while (coeffs.size() > 1 && coeffs.back() == 0.0) {
        coeffs.pop_back();
        roots.emplace_back(0.0, 0.0);
    }
    const std::size_t n = coeffs.size() - 1;
    if (n == 0) return roots;
    if (n == 1) {
        roots.emplace_back(-coeffs[1], 0.0);
        return roots;
    }

    auto eval = [&](const Complex& x) {
        Complex acc{};
        for (double c : coeffs) acc = acc * x + c;
        return acc;
    };
    // Horner rounding bound for |p(x)|.
    auto eval_bound = [&](const Complex& x) {
        double acc = 0, ax = std::abs(x);
        for (double c : coeffs) acc = acc * ax + std::abs(c);
        return 4.0 * static_cast<double>(n) * std::numeric_limits<double>::epsilon() * acc;
    };

    double radius = 0;
    for (std::size_t k = 1; k <= n; ++k)
        radius = std::max(radius, std::pow(std::abs(coeffs[k]), 1.0 / static_cast<double>(k)));
    if (radius == 0) radius = 1;
    const Complex center(-coeffs[1] / static_cast<double>(n), 0.0);
    std::vector<Complex> z(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n) + 0.4;
        z[k] = center + std::polar(radius, angle);
    }

    bool converged = false;
    for (int it = 0; it < opt.max_iterations && !converged; ++it) {
        bool small_steps = true, at_noise = true;
        for (std::size_t i = 0; i < n; ++i) {
            Complex denom{1.0, 0.0};
            for (std::size_t j = 0; j < n; ++j)
                if (j != i) denom *= z[i] - z[j];
            const Complex pz = eval(z[i]);
            if (std::abs(pz) > eval_bound(z[i])) at_noise = false;
            if (denom == Complex{}) denom = Complex(std::numeric_limits<double>::epsilon(), 0.0);
            const Complex step = pz / denom;
            z[i] -= step;
            if (std::abs(step) > opt.convergence * std::max(1.0, std::abs(z[i]))) small_steps = false;
        }
        converged = small_steps || at_noise;
    }
    if (!converged)
        throw Error(ErrorKind::RootFindDivergence,
                    "simultaneous iteration exceeded " + std::to_string(opt.max_iterations) + " iterations");
    detail::enforce_conjugate_pairs(z);
    roots.insert(roots.end(), z.begin(), z.end());
    return roots;
}

/// Eigen-decomposition of a symmetric matrix, values in decreasing order and
/// matching orthonormal eigenvectors stored as columns.
template <std::floating_point T>
struct SymmetricEigen {
    std::vector<T> values;
    BasicMatrix<T> vectors;
};

/// Cyclic Jacobi rotations, at most `max_sweeps` sweeps.
template <std::floating_point T>
SymmetricEigen<T> symmetric_eigen(const BasicMatrix<T>& a, int max_sweeps = 50) {
    detail::require(a.is_square(), ErrorKind::NonSquare, "eigen-decomposition of " + a.shape());
    const std::size_t n = a.rows();
    BasicMatrix<T> m = a;
    // symmetrize the input
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) m(i, j) = m(j, i) = (a(i, j) + a(j, i)) / 2;
    BasicMatrix<T> v = BasicMatrix<T>::identity(n);
    const T scale = frobenius_norm(m);
    const T target = std::numeric_limits<T>::epsilon() * scale;

    auto off_norm = [&] {
        T s = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) s += m(i, j) * m(i, j);
        return std::sqrt(2 * s);
    };

    bool converged = off_norm() <= target;
    for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                const T apq = m(p, q);
                if (apq == 0) continue;
                const T theta = (m(q, q) - m(p, p)) / (2 * apq);
                const T t = (theta >= 0 ? T{1} : T{-1}) / (std::abs(theta) + std::sqrt(theta * theta + 1));
                const T c = 1 / std::sqrt(t * t + 1);
                const T s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const T mkp = m(k, p), mkq = m(k, q);
                    m(k, p) = c * mkp - s * mkq;
                    m(k, q) = s * mkp + c * mkq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const T mpk = m(p, k), mqk = m(q, k);
                    m(p, k) = c * mpk - s * mqk;
                    m(q, k) = s * mpk + c * mqk;
                }
                m(p, q) = m(q, p) = 0;
                for (std::size_t k = 0; k < n; ++k) {
                    const T vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        converged = off_norm() <= target;
    }
    if (!converged)
        throw Error(ErrorKind::RootFindDivergence,
                    "Jacobi iteration exceeded " + std::to_string(max_sweeps) + " sweeps");

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return m(x, x) > m(y, y); });
    SymmetricEigen<T> out{std::vector<T>(n), BasicMatrix<T>(n, n)};
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = m(order[k], order[k]);
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
    }
    return out;
}

/// Eigenvalues of a real square matrix. Symmetric inputs (at tolerance) use
/// cyclic Jacobi; everything else is solved as the roots of the
/// Faddeev-LeVerrier characteristic polynomial.
inline Spectrum eigenvalues(const Matrix& a, const OptTolerance& tol = {}, const RootFindOptions& opt = {}) {
    detail::require(a.is_square(), ErrorKind::NonSquare, "eigenvalues of " + a.shape());
    const Tolerance t = resolve(tol, a.rows());
    Spectrum s;
    if (is_symmetric(a, t.threshold(max_abs(a)))) {
        const auto e = symmetric_eigen(a);
        for (double x : e.values) s.eigenvalues.emplace_back(x, 0.0);
        s.source = SpectrumSource::SymmetricJacobi;
    } else {
        s.eigenvalues = polynomial_roots(charpoly(a).coeffs, opt);
        s.source = SpectrumSource::GeneralRootfind;
    }
    detail::sort_spectrum(s.eigenvalues);
    return s;
}

}  // namespace detdyn
