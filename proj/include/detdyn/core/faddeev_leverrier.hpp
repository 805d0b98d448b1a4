#pragma once

#include <cstddef>
#include <vector>

#include "errors.hpp"
#include "matrix.hpp"

namespace detdyn {

/// Monic characteristic polynomial det(lambda I - M) = sum_k coeffs[k] lambda^(n-k).
template <Scalar T>
struct BasicCharPoly {
    std::vector<T> coeffs;  // coeffs[0] == 1

    std::size_t degree() const noexcept { return coeffs.empty() ? 0 : coeffs.size() - 1; }

    /// Horner evaluation.
    template <Scalar U>
    U operator()(const U& lambda) const {
        U acc{};
        for (const auto& c : coeffs) acc = acc * lambda + static_cast<U>(c);
        return acc;
    }
};

using CharPoly = BasicCharPoly<double>;

namespace detail {

/// Faddeev-LeVerrier recursion. Produces the characteristic coefficients and
/// the last auxiliary matrix M_n, with adj(A) = (-1)^(n-1) M_n. Inversion-free,
/// so it is defined for singular A. Accuracy degrades with n; intended for
/// n <= 16.
template <Scalar T>
struct FaddeevLeVerrier {
    std::vector<T> coeffs;
    BasicMatrix<T> last_aux;

    explicit FaddeevLeVerrier(const BasicMatrix<T>& a) {
        require(a.is_square(), ErrorKind::NonSquare, "characteristic polynomial of " + a.shape());
        const std::size_t n = a.rows();
        coeffs.assign(n + 1, T{});
        coeffs[0] = T{1};
        if (n == 0) return;
        // M_1 = I, c_1 = -tr(A)
        BasicMatrix<T> m = BasicMatrix<T>::identity(n);
        for (std::size_t k = 1; k <= n; ++k) {
            BasicMatrix<T> am = a * m;
            coeffs[k] = -trace(am) / static_cast<T>(static_cast<real_of_t<T>>(k));
            if (k == n) {
                last_aux = std::move(m);
            } else {
                // M_{k+1} = A M_k + c_k I
                m = std::move(am);
                m.add_to_diagonal(coeffs[k]);
            }
        }
    }
};

}  // namespace detail

template <Scalar T>
BasicCharPoly<T> charpoly(const BasicMatrix<T>& a) {
    return BasicCharPoly<T>{detail::FaddeevLeVerrier<T>(a).coeffs};
}

/// Adjugate (transposed cofactor matrix). Satisfies A adj(A) = det(A) I for
/// singular A as well. The 1x1 adjugate is [1].
template <Scalar T>
BasicMatrix<T> adjugate(const BasicMatrix<T>& a) {
    detail::require(a.is_square(), ErrorKind::NonSquare, "adjugate of " + a.shape());
    detail::require(a.rows() >= 1, ErrorKind::InvalidArgument, "adjugate of an empty matrix");
    detail::FaddeevLeVerrier<T> fl(a);
    BasicMatrix<T> adj = std::move(fl.last_aux);
    if ((a.rows() - 1) % 2 == 1) adj *= T{-1};
    return adj;
}

/// det(M) = (-1)^n c_n as a by-product of the recursion.
template <Scalar T>
T det_from_charpoly(const BasicCharPoly<T>& p) {
    const std::size_t n = p.degree();
    return n % 2 == 0 ? p.coeffs[n] : -p.coeffs[n];
}

}  // namespace detdyn
