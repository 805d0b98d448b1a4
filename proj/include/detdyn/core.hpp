#pragma once

// Dense real linear-algebra kernel: determinants, inverses, adjugates,
// characteristic polynomials, eigenvalues and rank.

#include "core/eigen.hpp"
#include "core/errors.hpp"
#include "core/faddeev_leverrier.hpp"
#include "core/lu.hpp"
#include "core/matrix.hpp"
#include "core/rank.hpp"
#include "core/tolerance.hpp"
