#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "detdyn/control.hpp"
#include "detdyn/singular.hpp"
#include "support/eigen_oracle.hpp"
#include "support/oracles.hpp"

using namespace detdyn;

namespace {

const Matrix kFigA{{0.72, 0.55}, {-0.18, 0.78}};
const Matrix kFigB{{1.0}, {0.15}};

Vector e(std::size_t n, std::size_t i) {
    Vector v(n, 0.0);
    v[i] = 1;
    return v;
}

template <typename F>
ErrorKind kind_of(F&& f) {
    try {
        f();
    } catch (const Error& err) {
        return err.kind();
    }
    return ErrorKind::InvalidArgument;  // sentinel: nothing thrown
}

Matrix with_outer_sum(Matrix m, const std::vector<Vector>& vs) {
    for (const auto& v : vs) m.add_outer(v, v);
    return m;
}

// smallest eigenvalue above a relative floor; the eps -> 0 limit converges
// like eps / lambda_min, so tiny values make 1e-8 too coarse a schedule end
double min_nonzero_eig(const Matrix& w) {
    const auto ev = oracle::qr_eigenvalues(w);
    double top = 0, low = 1e300;
    for (const auto& z : ev) top = std::max(top, std::abs(z));
    for (const auto& z : ev)
        if (std::abs(z) > 1e-9 * top) low = std::min(low, std::abs(z));
    return low;
}

// product of the eigenvalues of a symmetric PSD matrix above a relative floor
double eigenproduct(const Matrix& w) {
    const auto ev = oracle::qr_eigenvalues(w);
    double top = 0;
    for (const auto& z : ev) top = std::max(top, std::abs(z));
    double p = 1;
    for (const auto& z : ev)
        if (std::abs(z) > 1e-9 * top) p *= z.real();
    return p;
}

}  // namespace

TEST(CovarianceTrace, Examples) {
    const auto one = covariance_trace(Matrix::identity(2), {e(2, 0)});
    EXPECT_NEAR(one.increments[0], std::log(2.0), 1e-15);
    EXPECT_NEAR(one.lower_bound, 0.5, 1e-15);
    EXPECT_NEAR(one.upper_bound, 1.0, 1e-15);

    const auto rep = covariance_trace(Matrix::identity(3), std::vector<Vector>(6, e(3, 0)));
    for (std::size_t i = 0; i < rep.increments.size(); ++i) {
        EXPECT_NEAR(rep.increments[i], std::log(1.0 + 1.0 / static_cast<double>(i + 1)), 1e-14);
        if (i > 0) {
            EXPECT_LT(rep.increments[i], rep.increments[i - 1]);
        }
    }

    EXPECT_EQ(kind_of([] { covariance_trace(Matrix{{1, 0}, {0, -1}}, {}); }), ErrorKind::NotPositiveDefinite);
}

TEST(CovarianceTrace, SandwichAndIdentityOnRandomInstances) {
    oracle::Rng rng(401);
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = rng.index(1, 6), k = rng.index(0, 10);
        const Matrix p = rng.spd(n);
        std::vector<Vector> us;
        for (std::size_t i = 0; i < k; ++i) us.push_back(rng.vector(n));
        const auto tr = covariance_trace(p, us);
        const double direct = std::log(static_cast<double>(oracle::elimination_det(with_outer_sum(p, us)))) -
                              std::log(static_cast<double>(oracle::elimination_det(p)));
        EXPECT_NEAR(tr.logdet_change(), direct, 1e-8);
        EXPECT_NEAR(tr.total_increment(), direct, 1e-8);
        EXPECT_LE(tr.lower_bound, tr.logdet_change() + 1e-12);
        EXPECT_GE(tr.upper_bound, tr.logdet_change() - 1e-12);
        for (double inc : tr.increments) EXPECT_GE(inc, 0);
    }
}

TEST(InfoFilter, Examples) {
    const auto one = info_filter_trace(Matrix::identity(2), {e(2, 0)});
    EXPECT_NEAR(one.dets.back(), 0.5, 1e-15);

    const auto zero = info_filter_trace(Matrix::identity(2), {e(2, 0), Vector(2, 0.0), e(2, 1)});
    EXPECT_EQ(zero.factors[1], 1.0);
    EXPECT_EQ(zero.dets[2], zero.dets[1]);
    EXPECT_NEAR(zero.dets.back(), 0.25, 1e-15);
    EXPECT_FALSE(zero.geometric_bound.has_value());  // beta = 0

    EXPECT_EQ(kind_of([] { info_filter_trace(Matrix{{1, 2}, {2, 1}}, {}); }), ErrorKind::NotPositiveDefinite);
}

TEST(InfoFilter, MonotoneAndGeometricBound) {
    oracle::Rng rng(402);
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = rng.index(1, 6), k = 8;
        const Matrix p = rng.spd(n);
        std::vector<Vector> vs;
        for (std::size_t i = 0; i < k; ++i) vs.push_back(rng.vector(n));
        const auto tr = info_filter_trace(p, vs);
        for (std::size_t i = 1; i < tr.dets.size(); ++i) EXPECT_LT(tr.dets[i], tr.dets[i - 1]);
        ASSERT_TRUE(tr.beta.has_value());
        ASSERT_TRUE(tr.geometric_bound.has_value());
        EXPECT_NEAR(*tr.geometric_bound,
                    static_cast<double>(oracle::elimination_det(p)) * std::pow(1 + *tr.beta, -static_cast<double>(k)),
                    1e-12 * *tr.geometric_bound);
        EXPECT_LE(tr.dets.back(), *tr.geometric_bound);
        const Matrix info = with_outer_sum(oracle::elimination_inverse(p), vs);
        const double direct = 1.0 / static_cast<double>(oracle::elimination_det(info));
        EXPECT_LE(oracle::pure_rel_err(tr.dets.back(), direct), 1e-8);
    }
}

TEST(BuildGramian, FigureSystem) {
    const auto g = build_gramian(kFigA, kFigB, 4);
    ASSERT_EQ(g.directions.size(), 4u);
    EXPECT_EQ(g.directions[0], kFigB.col(0));
    EXPECT_NEAR(g.directions[1][0], 0.8025, 1e-15);
    EXPECT_NEAR(g.directions[1][1], -0.063, 1e-15);
    Vector u = kFigB.col(0);
    for (std::size_t l = 0; l < 4; ++l) {
        for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(g.directions[l][i], u[i], 1e-15);
        u = matvec(kFigA, u);
    }
    EXPECT_LE(oracle::frob(g.W - g.W.transpose()), 1e-10 * oracle::frob(g.W));
}

TEST(BuildGramian, OrderingAndErrors) {
    // m = 2: i-major, so u = b1, b2, A b1, A b2, ...
    const Matrix a{{0, 1}, {-1, 0}};
    const Matrix b{{1, 0}, {0, 2}};
    const auto g = build_gramian(a, b, 2);
    ASSERT_EQ(g.directions.size(), 4u);
    EXPECT_EQ(g.directions[1], (Vector{0, 2}));
    EXPECT_EQ(g.directions[2], (Vector{0, -1}));
    EXPECT_EQ(g.directions[3], (Vector{2, 0}));

    const auto zero = build_gramian(Matrix(2, 2), Matrix{{1}, {0}}, 3);
    EXPECT_EQ(zero.W, (Matrix{{1, 0}, {0, 0}}));
    EXPECT_EQ(rank(zero.W), 1u);

    EXPECT_EQ(kind_of([] { build_gramian(Matrix(2, 2), Matrix(3, 1), 2); }), ErrorKind::DimensionMismatch);
    EXPECT_EQ(kind_of([] { build_gramian(Matrix(2, 2), Matrix(2, 1), 0); }), ErrorKind::InvalidArgument);
}

TEST(GramianGrowth, FigureSystemAgreesWithDirectAndEigenproduct) {
    const auto g = build_gramian(kFigA, kFigB, 4);
    const auto gr = gramian_pdet_growth(g, default_eps_schedule());
    EXPECT_EQ(gr.rank_r, 2u);
    // controllability matrix [B, AB] is nonsingular, so r = n
    EXPECT_NE(oracle::cofactor_det(Matrix{{g.directions[0][0], g.directions[1][0]},
                                          {g.directions[0][1], g.directions[1][1]}}),
              0.0);
    for (const auto& row : gr.rows) EXPECT_LE(row.identity_residual, 1e-10) << "eps=" << row.eps;
    const double direct = oracle::cofactor_det(g.W);
    EXPECT_LE(oracle::pure_rel_err(gr.pdet_estimate, direct), 1e-6);
    EXPECT_LE(oracle::pure_rel_err(gr.pdet_product_route, direct), 1e-6);
    EXPECT_LE(oracle::pure_rel_err(gr.pdet_estimate, eigenproduct(g.W)), 1e-6);
    ASSERT_TRUE(gr.log_pdet.has_value());
    EXPECT_NEAR(*gr.log_pdet, std::log(direct), 1e-6);
    EXPECT_TRUE(gr.converged);
}

TEST(GramianGrowth, RankDeficientExample) {
    const auto g = build_gramian(Matrix(2, 2), Matrix{{1}, {0}}, 3);
    const auto gr = gramian_pdet_growth(g, default_eps_schedule());
    EXPECT_EQ(gr.rank_r, 1u);
    EXPECT_NEAR(gr.pdet_estimate, 1, 1e-6);
    EXPECT_NEAR(gr.pdet_product_route, 1, 1e-6);
    EXPECT_EQ(g.n() - gr.rank_r, 1u);
    EXPECT_NEAR(*gr.log_pdet, 0, 1e-6);
}

TEST(GramianGrowth, IdentityAndLimitsOnRandomSystems) {
    oracle::Rng rng(403);
    for (int t = 0; t < 60;) {
        const std::size_t n = rng.index(2, 5), m = rng.index(1, 2), N = rng.index(1, 4);
        const auto g = build_gramian(rng.matrix(n, n) * 0.8, rng.matrix(n, m), N);
        if (min_nonzero_eig(g.W) < 0.2) continue;
        ++t;
        const auto gr = gramian_pdet_growth(g, default_eps_schedule());
        EXPECT_EQ(gr.rank_r, std::min(n, N * m)) << "t=" << t;
        for (const auto& row : gr.rows) EXPECT_LE(row.identity_residual, 1e-10);
        const double want = eigenproduct(g.W);
        EXPECT_LE(oracle::pure_rel_err(gr.pdet_estimate, want), 1e-6) << "t=" << t;
        EXPECT_LE(oracle::pure_rel_err(gr.pdet_product_route, want), 1e-6) << "t=" << t;
        EXPECT_LE(oracle::pure_rel_err(gr.pdet_estimate, pdet(g.W).value), 1e-6) << "t=" << t;
    }
}

TEST(GramianGrowth, ScheduleAndConvergence) {
    const auto g = build_gramian(kFigA, kFigB, 4);
    EXPECT_EQ(kind_of([&] { gramian_pdet_growth(g, {1e-1, 1e-2}); }), ErrorKind::ScheduleTooShort);
    // stopping at 1e-1 is far from the limit for the small eigenvalue
    try {
        gramian_pdet_growth(g, {1.0, 0.5, 0.25});
        FAIL() << "expected NotConverged";
    } catch (const NotConverged& err) {
        EXPECT_EQ(err.table().size(), 3u);
    }
}

TEST(GramianGrowth, ReindexingInvariance) {
    oracle::Rng rng(404);
    for (int t = 0; t < 50;) {
        const std::size_t n = rng.index(2, 4), m = rng.index(1, 2);
        auto g = build_gramian(rng.matrix(n, n) * 0.8, rng.matrix(n, m), rng.index(1, 4));
        if (min_nonzero_eig(g.W) < 0.2) continue;
        ++t;
        auto perm = g;
        std::rotate(perm.directions.begin(), perm.directions.begin() + 1, perm.directions.end());
        std::reverse(perm.directions.begin() + 1, perm.directions.end());
        perm.W = gramian_from_directions(n, perm.directions);
        EXPECT_LE(oracle::frob(perm.W - g.W), 1e-10 * oracle::frob(g.W));
        const auto a = gramian_pdet_growth(g, default_eps_schedule());
        const auto b = gramian_pdet_growth(perm, default_eps_schedule());
        EXPECT_EQ(a.rank_r, b.rank_r);
        EXPECT_LE(oracle::pure_rel_err(b.pdet_estimate, a.pdet_estimate), 1e-10);
        if (g.directions.size() > 1 && t % 5 == 0) {
            EXPECT_NE(a.finest().factors, b.finest().factors);
        }
    }
}

TEST(ReachEllipse, Examples) {
    for (double eps : {1e-3, 0.05, 1.0}) {
        const auto c = reach_ellipse(Matrix::identity(2) * eps);
        EXPECT_NEAR(c.semi_axis_a, std::sqrt(eps), 1e-15);
        EXPECT_NEAR(c.semi_axis_b, std::sqrt(eps), 1e-15);
        EXPECT_NEAR(c.area, std::numbers::pi * eps, 1e-15);
    }
    const auto d = reach_ellipse(Matrix{{4, 0}, {0, 1}});
    EXPECT_NEAR(d.semi_axis_a, 2, 1e-15);
    EXPECT_NEAR(d.semi_axis_b, 1, 1e-15);
    EXPECT_NEAR(d.rotation_rad, 0, 1e-15);

    const auto seg = reach_ellipse(Matrix{{9, 0}, {0, 0}});
    EXPECT_NEAR(seg.semi_axis_a, 3, 1e-15);
    EXPECT_EQ(seg.semi_axis_b, 0);
    EXPECT_EQ(seg.area, 0);

    const auto tilt = reach_ellipse(Matrix{{1, 1}, {1, 1}});
    EXPECT_NEAR(tilt.rotation_rad, std::numbers::pi / 4, 1e-12);
    EXPECT_NEAR(tilt.semi_axis_a, std::sqrt(2.0), 1e-12);

    EXPECT_EQ(kind_of([] { reach_ellipse(Matrix{{1, 0}, {0, -1}}); }), ErrorKind::NotPSD);
    EXPECT_EQ(kind_of([] { reach_ellipse(Matrix{{1, 0.5}, {0, 1}}); }), ErrorKind::NotPSD);
    EXPECT_EQ(kind_of([] { reach_ellipse(Matrix::identity(3)); }), ErrorKind::NotTwoDimensional);
}

TEST(ReachEllipse, AreaTracksDeterminantAndGrowsAlongPartialSums) {
    oracle::Rng rng(405);
    for (int t = 0; t < 50; ++t) {
        std::vector<Vector> dirs;
        for (std::size_t l = 0, k = rng.index(1, 8); l < k; ++l) dirs.push_back(rng.vector(2));
        const double eps = rng.uniform(1e-3, 0.5);
        const auto sums = regularized_partial_sums(dirs, 2, eps);
        ASSERT_EQ(sums.size(), dirs.size() + 1);
        double prev = 0;
        for (const auto& w : sums) {
            const auto el = reach_ellipse(w);
            EXPECT_GE(el.semi_axis_a, el.semi_axis_b);
            EXPECT_NEAR(el.area, std::numbers::pi * std::sqrt(oracle::cofactor_det(w)), 1e-10 * el.area);
            EXPECT_GE(el.area, prev);
            prev = el.area;
        }
    }
}

TEST(PerturbedExperiment, ZeroNoiseIsExact) {
    const auto g = build_gramian(kFigA, kFigB, 4);
    const auto ex = perturbed_gramian_experiment(g, 0.0, 5, 7, default_eps_schedule());
    ASSERT_EQ(ex.trials.size(), 5u);
    for (const auto& tr : ex.trials) {
        EXPECT_EQ(tr.pdet, ex.nominal_pdet);
        EXPECT_EQ(tr.factors, ex.nominal_factors);
    }
    EXPECT_EQ(ex.rank_increases, 0u);
}

TEST(PerturbedExperiment, NoiseLiftsRankOfDeficientGramian) {
    const auto g = build_gramian(Matrix(2, 2), Matrix{{1}, {0}}, 3);
    const auto ex = perturbed_gramian_experiment(g, 0.1, 20, 11, default_eps_schedule());
    EXPECT_EQ(ex.nominal_rank, 1u);
    EXPECT_EQ(ex.rank_increases, 20u);
    for (const auto& tr : ex.trials) EXPECT_EQ(tr.rank, 2u);
}

TEST(PerturbedExperiment, DeterministicForFixedSeed) {
    const auto g = build_gramian(kFigA, kFigB, 4);
    const auto a = perturbed_gramian_experiment(g, 0.1, 100, 42, default_eps_schedule());
    const auto b = perturbed_gramian_experiment(g, 0.1, 100, 42, default_eps_schedule());
    const auto c = perturbed_gramian_experiment(g, 0.1, 100, 43, default_eps_schedule());
    ASSERT_EQ(a.trials.size(), 100u);
    for (std::size_t k = 0; k < a.trials.size(); ++k) {
        EXPECT_EQ(a.trials[k].seed, b.trials[k].seed);
        EXPECT_EQ(a.trials[k].pdet, b.trials[k].pdet);
        EXPECT_EQ(a.trials[k].factors, b.trials[k].factors);
    }
    EXPECT_EQ(a.mean_pdet, b.mean_pdet);
    EXPECT_NE(a.mean_pdet, c.mean_pdet);
    EXPECT_EQ(kind_of([&] { perturbed_gramian_experiment(g, -1.0, 1, 0, default_eps_schedule()); }),
              ErrorKind::InvalidArgument);
}

TEST(PerturbedExperiment, BallSamplesStayInsideRadius) {
    std::mt19937_64 gen(5);
    for (int k = 0; k < 2000; ++k) {
        const auto w = detail::uniform_in_ball(gen, 3, 0.25);
        EXPECT_LE(norm2(w), 0.25 * (1 + 1e-15));
    }
    EXPECT_NE(detail::splitmix64(1), detail::splitmix64(2));
}
