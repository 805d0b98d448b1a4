#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>

#include "errors.hpp"

namespace detdyn {

/// Threshold pair for every rank, nullity and singularity decision.
///
/// `rel` is a dimensionless factor applied to the scale of the quantity under
/// test (usually the largest absolute entry of the input); `abs` is a floor.
/// A magnitude is treated as zero when it does not exceed threshold(scale).
struct Tolerance {
    double rel = 0x1p-52;
    double abs = 1e-300;

    /// n * 2^-52 relative, 1e-300 absolute.
    static Tolerance standard(std::size_t n) {
        return Tolerance{static_cast<double>(std::max<std::size_t>(n, 1)) * 0x1p-52, 1e-300};
    }

    static Tolerance relative(double rel) { return Tolerance{rel, 1e-300}.validated(); }

    template <typename R>
    R threshold(R scale) const {
        return std::max(static_cast<R>(rel) * scale, static_cast<R>(abs));
    }

    Tolerance validated() const {
        detail::require(rel > 0.0 && std::isfinite(rel), ErrorKind::InvalidArgument,
                        "relative tolerance must be positive");
        detail::require(abs >= 0.0 && std::isfinite(abs), ErrorKind::InvalidArgument,
                        "absolute tolerance must be nonnegative");
        return *this;
    }
};

using OptTolerance = std::optional<Tolerance>;

inline Tolerance resolve(const OptTolerance& tol, std::size_t n) {
    return tol ? tol->validated() : Tolerance::standard(n);
}

}  // namespace detdyn
