#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "detdyn/core.hpp"
#include "support/oracles.hpp"

using namespace detdyn;

namespace {

void expect_matrix_near(const Matrix& got, const Matrix& want, double tol) {
    ASSERT_EQ(got.rows(), want.rows());
    ASSERT_EQ(got.cols(), want.cols());
    for (std::size_t i = 0; i < got.rows(); ++i)
        for (std::size_t j = 0; j < got.cols(); ++j) EXPECT_NEAR(got(i, j), want(i, j), tol) << "at " << i << "," << j;
}

const Matrix kExampleA{{-1, 0, 0}, {0, -2, 0}, {0, 0, 0}};

}  // namespace

TEST(Matrix, RejectsRaggedAndNonFinite) {
    EXPECT_THROW((Matrix{{1, 2}, {3}}), Error);
    try {
        Matrix m{{1, 2}, {3}};
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::RaggedRows);
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    try {
        Matrix m(1, 2, std::vector<double>{1.0, nan});
        FAIL() << "NaN accepted";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NonFinite);
    }
}

TEST(Matrix, ArithmeticAndShape) {
    const Matrix a{{1, 2}, {3, 4}};
    const Matrix b = a * Matrix::identity(2);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.transpose()(0, 1), 3);
    EXPECT_EQ(trace(a), 5);
    Matrix c = a;
    c.add_outer(Vector{1, 0}, Vector{0, 1});
    EXPECT_EQ(c(0, 1), 3);
    EXPECT_THROW(a * Matrix(3, 3), Error);
}

TEST(Det, Examples) {
    EXPECT_EQ(det(Matrix::identity(3)), 1.0);
    EXPECT_EQ(det(kExampleA), 0.0);
    EXPECT_THROW(det(Matrix(2, 3)), Error);
}

TEST(Det, MatchesCofactorOracle) {
    oracle::Rng rng(11);
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = rng.index(1, 6);
        const Matrix m = rng.matrix(n, n);
        const double want = oracle::cofactor_det(m);
        EXPECT_LE(std::abs(det(m) - want), 1e-12 * std::max(std::abs(want), 1e-3)) << "n=" << n;
    }
    const Matrix m5 = rng.matrix(5, 5);
    EXPECT_LE(oracle::pure_rel_err(det(m5), oracle::cofactor_det(m5)), 1e-12);
}

TEST(Det, ZeroPivotPolicyReportsExactZero) {
    const Vector u{1, 2, 3}, v{4, -1, 0.5};
    Matrix m(3, 3);
    m.add_outer(u, v);
    EXPECT_EQ(det(m), 0.0);
}

TEST(Inverse, Examples) {
    expect_matrix_near(inverse(Matrix::identity(2) * 2.0), Matrix::identity(2) * 0.5, 0);
    expect_matrix_near(inverse(Matrix{{-1, 0}, {0, -2}}), Matrix{{-1, 0}, {0, -0.5}}, 0);
    try {
        inverse(kExampleA);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Singular);
    }
}

TEST(Inverse, ResidualOnWellConditioned) {
    oracle::Rng rng(12);
    for (int t = 0; t < 50; ++t) {
        Matrix m = rng.matrix(6, 6);
        m.add_to_diagonal(4.0);
        const Matrix r = m * inverse(m) - Matrix::identity(6);
        EXPECT_LE(max_abs(r), 1e-10);
    }
}

TEST(Adjugate, Examples) {
    for (std::size_t n = 1; n <= 5; ++n) expect_matrix_near(adjugate(Matrix::identity(n)), Matrix::identity(n), 1e-15);
    expect_matrix_near(adjugate(kExampleA), Matrix{{0, 0, 0}, {0, 0, 0}, {0, 0, 2}}, 1e-15);
    expect_matrix_near(adjugate(Matrix{{7.5}}), Matrix{{1}}, 0);
}

TEST(Adjugate, MatchesCofactorOracleIncludingRankDeficient) {
    oracle::Rng rng(13);
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 5;
        Matrix m = rng.matrix(n, n);
        if (t % 3 == 1) {
            m = Matrix(n, n);
            m.add_outer(rng.vector(n), rng.vector(n));
        } else if (t % 3 == 2) {
            m = rng.matrix(n, 4) * rng.matrix(4, n);  // rank 4: adjugate is rank one
        }
        const Matrix want = oracle::cofactor_adjugate(m);
        const double scale = std::max(max_abs(want), 1e-300);
        EXPECT_LE(max_abs_diff(adjugate(m), want), 1e-10 * std::max(scale, 1.0)) << "t=" << t;
    }
}

TEST(Adjugate, AdjugateIdentityHoldsForSingular) {
    oracle::Rng rng(14);
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = rng.index(1, 7);
        const std::size_t k = rng.index(0, n);
        const Matrix m = rng.matrix(n, k) * rng.matrix(k, n) + (k == n ? rng.matrix(n, n) : Matrix(n, n));
        const Matrix adj = adjugate(m);
        const double d = oracle::cofactor_det(m);
        const Matrix want = Matrix::identity(n) * d;
        const double scale = std::max(1.0, max_abs(m) * max_abs(adj));
        EXPECT_LE(max_abs_diff(m * adj, want), 1e-9 * scale);
        EXPECT_LE(max_abs_diff(adj * m, want), 1e-9 * scale);
    }
}

TEST(Charpoly, Examples) {
    const auto p = charpoly(kExampleA);
    ASSERT_EQ(p.coeffs.size(), 4u);
    EXPECT_EQ(p.coeffs[0], 1);
    EXPECT_EQ(p.coeffs[1], 3);
    EXPECT_EQ(p.coeffs[2], 2);
    EXPECT_EQ(p.coeffs[3], 0);
    const auto z = charpoly(Matrix(2, 2));
    EXPECT_EQ(z.coeffs, (std::vector<double>{1, 0, 0}));
}

TEST(Charpoly, TraceAndDeterminantIdentities) {
    oracle::Rng rng(15);
    for (int t = 0; t < 500; ++t) {
        const std::size_t n = rng.index(1, 10);
        const Matrix m = rng.matrix(n, n);
        const auto p = charpoly(m);
        EXPECT_EQ(p.coeffs[0], 1.0);
        EXPECT_NEAR(p.coeffs[1], -trace(m), 1e-12 * std::max(1.0, std::abs(trace(m))));
        if (n <= 8) {
            const double d = det(m);
            EXPECT_LE(oracle::rel_err(det_from_charpoly(p), d), 1e-9);
        }
    }
}

TEST(Eigenvalues, Examples) {
    const auto s = eigenvalues(kExampleA);
    ASSERT_EQ(s.size(), 3u);
    EXPECT_EQ(s.source, SpectrumSource::SymmetricJacobi);
    EXPECT_NEAR(s.eigenvalues[0].real(), 0, 1e-15);
    EXPECT_NEAR(s.eigenvalues[1].real(), -1, 1e-15);
    EXPECT_NEAR(s.eigenvalues[2].real(), -2, 1e-15);

    const auto rot = eigenvalues(Matrix{{0, -1}, {1, 0}});
    EXPECT_EQ(rot.source, SpectrumSource::GeneralRootfind);
    ASSERT_EQ(rot.size(), 2u);
    EXPECT_NEAR(rot.eigenvalues[0].imag(), 1, 1e-12);
    EXPECT_NEAR(rot.eigenvalues[1].imag(), -1, 1e-12);
    EXPECT_EQ(rot.eigenvalues[0], std::conj(rot.eigenvalues[1]));
}

TEST(Eigenvalues, ConstructThenRecoverSymmetric) {
    oracle::Rng rng(16);
    for (int t = 0; t < 50; ++t) {
        const Matrix q = rng.orthogonal(3);
        const Matrix m = q * Matrix::diagonal({3, 1, 0.5}) * q.transpose();
        const auto s = eigenvalues(m);
        EXPECT_NEAR(s.eigenvalues[0].real(), 3, 1e-8);
        EXPECT_NEAR(s.eigenvalues[1].real(), 1, 1e-8);
        EXPECT_NEAR(s.eigenvalues[2].real(), 0.5, 1e-8);
    }
}

TEST(Eigenvalues, ProductEqualsDeterminantAndPairsConjugate) {
    oracle::Rng rng(17);
    for (int t = 0; t < 300; ++t) {
        const std::size_t n = rng.index(1, 10);
        const Matrix m = rng.matrix(n, n);
        const auto s = eigenvalues(m);
        ASSERT_EQ(s.size(), n);
        const double d = det(m);
        EXPECT_LE(std::abs(s.product().real() - d), 1e-7 * std::max(1.0, std::abs(d))) << "n=" << n;
        for (const auto& z : s.eigenvalues) {
            if (z.imag() == 0) continue;
            const auto hit = std::count(s.eigenvalues.begin(), s.eigenvalues.end(), std::conj(z));
            EXPECT_GE(hit, 1);
        }
    }
}

TEST(Eigenvalues, NonsymmetricConstructThenRecover) {
    oracle::Rng rng(18);
    for (int t = 0; t < 50; ++t) {
        const auto u = oracle::random_unimodular(rng, 4);
        const Matrix m = u.s * Matrix::diagonal({2.5, -1, 0.75, -3}) * u.s_inv;
        const auto s = eigenvalues(m);
        const double want[] = {2.5, 0.75, -1, -3};
        for (int k = 0; k < 4; ++k) EXPECT_NEAR(s.eigenvalues[k].real(), want[k], 1e-8);
    }
}

TEST(Rank, Examples) {
    EXPECT_EQ(rank(Matrix(3, 3)), 0u);
    Matrix uu(3, 3);
    uu.add_outer(Vector{1, -2, 0.5}, Vector{1, -2, 0.5});
    EXPECT_EQ(rank(uu), 1u);
    const Matrix a{{0.72, 0.55}, {-0.18, 0.78}};
    const Vector b{1.0, 0.15};
    Matrix w(2, 2);
    Vector x = b;
    for (int i = 0; i < 4; ++i) {
        w.add_outer(x, x);
        x = matvec(a, x);
    }
    EXPECT_EQ(rank(w), 2u);
}

TEST(Rank, InvariantUnderPermutation) {
    oracle::Rng rng(19);
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = rng.index(2, 7);
        const std::size_t k = rng.index(0, n);
        const Matrix m = rng.matrix(n, k) * rng.matrix(k, n);
        std::vector<std::size_t> p(n), q(n);
        for (std::size_t i = 0; i < n; ++i) p[i] = q[i] = i;
        std::shuffle(p.begin(), p.end(), rng.engine());
        std::shuffle(q.begin(), q.end(), rng.engine());
        Matrix pm(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) pm(i, j) = m(p[i], q[j]);
        const Tolerance tol = Tolerance::relative(1e-10);
        EXPECT_EQ(rank(m, tol), k);
        EXPECT_EQ(rank(pm, tol), k);
    }
}

TEST(FullRankFactorization, Examples) {
    const Vector u{1, 2, -1}, v{0.5, 0, 3};
    Matrix m(3, 3);
    m.add_outer(u, v);
    auto f = full_rank_factorization(m);
    ASSERT_EQ(f.rank(), 1u);
    EXPECT_LE(max_abs_diff(f.left * f.right, m), 1e-15);
    // C is proportional to u
    const double ratio = f.left(0, 0) / u[0];
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(f.left(i, 0), ratio * u[i], 1e-14);

    const Matrix ns{{2, 1}, {1, 3}};
    f = full_rank_factorization(ns);
    EXPECT_EQ(f.rank(), 2u);
    EXPECT_LE(max_abs_diff(f.left * f.right, ns), 1e-15);

    f = full_rank_factorization(Matrix(3, 3));
    EXPECT_EQ(f.rank(), 0u);
    EXPECT_EQ(f.left.cols(), 0u);
}

TEST(FullRankFactorization, ReconstructsMixedRank) {
    oracle::Rng rng(20);
    const Matrix x = rng.matrix(7, 3), y = rng.matrix(3, 7);
    const auto f = full_rank_factorization(x * y, Tolerance::relative(1e-10));
    EXPECT_EQ(f.rank(), 3u);
    EXPECT_LE(max_abs_diff(f.left * f.right, x * y), 1e-10);
    for (int t = 0; t < 500; ++t) {
        const std::size_t n = rng.index(1, 8);
        const std::size_t k = rng.index(0, n);
        const Matrix m = rng.matrix(n, k) * rng.matrix(k, n);
        const Tolerance tol = Tolerance::relative(1e-10);
        const auto g = full_rank_factorization(m, tol);
        EXPECT_EQ(g.rank(), k);
        EXPECT_LE(max_abs_diff(g.left * g.right, m), tol.threshold(std::max(1.0, max_abs(m))) * 10);
    }
}

TEST(Tolerance, ThresholdAndValidation) {
    const auto t = Tolerance::standard(4);
    EXPECT_DOUBLE_EQ(t.rel, 4 * 0x1p-52);
    EXPECT_EQ(t.threshold(0.0), 1e-300);
    EXPECT_THROW(Tolerance::relative(0.0), Error);
    EXPECT_THROW(Tolerance::relative(-1.0), Error);
}

TEST(PolynomialRoots, MultipleRootsAndDeflation) {
    // (x - 1)^2 (x + 2) x
    const auto r = polynomial_roots({1, 0, -3, 2, 0});
    ASSERT_EQ(r.size(), 4u);
    int near_one = 0, near_zero = 0, near_m2 = 0;
    for (const auto& z : r) {
        if (std::abs(z - Complex(1, 0)) < 1e-6) ++near_one;
        if (std::abs(z) < 1e-12) ++near_zero;
        if (std::abs(z - Complex(-2, 0)) < 1e-10) ++near_m2;
    }
    EXPECT_EQ(near_one, 2);
    EXPECT_EQ(near_zero, 1);
    EXPECT_EQ(near_m2, 1);
    EXPECT_THROW(polynomial_roots({2, 1}), Error);
}
