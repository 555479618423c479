#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include <cggm/lasso_kernel.hpp>

#include "oracles.hpp"
#include "test_util.hpp"

using namespace cggm;

TEST(SoftThreshold, Definition)
{
    EXPECT_DOUBLE_EQ(soft_threshold(2.0, 0.5), 1.5);
    EXPECT_DOUBLE_EQ(soft_threshold(-0.3, 0.5), 0.0);
    EXPECT_DOUBLE_EQ(soft_threshold(0.0, 0.0), 0.0);
    EXPECT_DOUBLE_EQ(soft_threshold(-2.0, 0.5), -1.5);
}

TEST(QuadLasso, IdentityIsCoordinatewiseSoftThreshold)
{
    QuadLassoProblem prob{Matrix::Identity(2, 2), Vector{{2.0, 0.3}}, 1.0, std::nullopt, std::nullopt};
    const Vector b = solve_quad_lasso(prob);
    EXPECT_NEAR(b(0), 1.0, 1e-12);
    EXPECT_EQ(b(1), 0.0);
}

TEST(QuadLasso, ZeroPenaltyIsLinearSolve)
{
    std::mt19937_64 rng(1);
    const Matrix q = testutil::random_spd(rng, 4);
    const Vector lin = testutil::random_matrix(rng, 4, 1);
    QuadLassoProblem prob{q, lin, 0.0, std::nullopt, std::nullopt};
    LassoOptions o;
    o.tol = 1e-12;
    o.max_iter = 100000;
    const Vector b = solve_quad_lasso(prob, o);
    EXPECT_LT((b - q.ldlt().solve(lin)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(QuadLasso, FullShrinkage)
{
    std::mt19937_64 rng(2);
    const Matrix q = testutil::random_spd(rng, 5);
    const Vector lin = testutil::random_matrix(rng, 5, 1);
    QuadLassoProblem prob{q, lin, lin.cwiseAbs().maxCoeff(), std::nullopt, std::nullopt};
    EXPECT_EQ(solve_quad_lasso(prob), Vector::Zero(5));
}

TEST(QuadLasso, KktAndMonotoneSweeps)
{
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 30; ++rep) {
        const Eigen::Index d = 2 + rep % 7;
        QuadLassoProblem prob{testutil::random_spd(rng, d, 0.1), testutil::random_matrix(rng, d, 1), 0.2,
                              Vector(testutil::random_matrix(rng, d, 1).cwiseAbs()), std::nullopt};
        std::vector<double> objs;
        LassoOptions o;
        o.tol = 1e-10;
        o.sweep_objectives = &objs;
        const Vector b = solve_quad_lasso(prob, o);
        for (std::size_t k = 1; k < objs.size(); ++k)
            EXPECT_LE(objs[k], objs[k - 1] + 1e-12);
        const Vector grad = prob.q * b - prob.linear;
        for (Eigen::Index j = 0; j < d; ++j) {
            const double pen = prob.penalty * (*prob.weights)(j);
            if (b(j) == 0.0)
                EXPECT_LE(std::abs(grad(j)), pen + 1e-8);
            else
                EXPECT_NEAR(grad(j) + pen * (b(j) > 0 ? 1.0 : -1.0), 0.0, 1e-8);
        }
    }
}

TEST(QuadLasso, OrderInvariantWhenStrictlyConvex)
{
    std::mt19937_64 rng(4);
    for (int rep = 0; rep < 10; ++rep) {
        const Eigen::Index d = 6;
        QuadLassoProblem prob{testutil::random_spd(rng, d), testutil::random_matrix(rng, d, 1), 0.15, std::nullopt,
                              std::nullopt};
        LassoOptions fwd;
        fwd.tol = 1e-9;
        LassoOptions rev = fwd;
        for (Eigen::Index j = d - 1; j >= 0; --j)
            rev.order.push_back(j);
        EXPECT_LT((solve_quad_lasso(prob, fwd) - solve_quad_lasso(prob, rev)).cwiseAbs().maxCoeff(), 2e-9 * 10);
    }
}

TEST(QuadLasso, BeatsBruteForceProbe)
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int rep = 0; rep < 12; ++rep) {
        const Eigen::Index d = 2 + rep % 3;
        QuadLassoProblem prob{testutil::random_spd(rng, d, 0.2), testutil::random_matrix(rng, d, 1), 0.3,
                              std::nullopt, std::nullopt};
        LassoOptions o;
        o.tol = 1e-10;
        const double best = quad_lasso_objective(prob, solve_quad_lasso(prob, o));
        for (int k = 0; k < 10000; ++k) {
            Vector x(d);
            for (Eigen::Index j = 0; j < d; ++j)
                x(j) = (k % 4 == 0) ? 0.0 : u(rng);
            EXPECT_GE(quad_lasso_objective(prob, x), best - 1e-10);
        }
    }
}

TEST(QuadLasso, WarmStartConvergesInOneSweep)
{
    std::mt19937_64 rng(6);
    QuadLassoProblem prob{testutil::random_spd(rng, 8), testutil::random_matrix(rng, 8, 1), 0.1, std::nullopt,
                          std::nullopt};
    LassoOptions o;
    o.tol = 1e-10;
    const Vector b = solve_quad_lasso(prob, o);
    prob.start = b;
    std::size_t sweeps = 0;
    LassoOptions w;
    w.tol = 1e-6;
    w.sweeps = &sweeps;
    const Vector again = solve_quad_lasso(prob, w);
    EXPECT_EQ(sweeps, 1u);
    EXPECT_LT((again - b).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(QuadLasso, ConvergenceErrorCarriesIterate)
{
    std::mt19937_64 rng(7);
    QuadLassoProblem prob{testutil::random_spd(rng, 10, 0.01), testutil::random_matrix(rng, 10, 1), 0.0,
                          std::nullopt, std::nullopt};
    LassoOptions o;
    o.tol = 1e-15;
    o.max_iter = 2;
    try {
        solve_quad_lasso(prob, o);
        FAIL() << "expected a convergence error";
    } catch (const LassoConvergenceError& e) {
        EXPECT_EQ(e.last_iterate.size(), 10);
    }
}

TEST(QuadLasso, RejectsInvalidProblems)
{
    QuadLassoProblem bad{Matrix::Identity(2, 2), Vector::Ones(3), 0.1, std::nullopt, std::nullopt};
    EXPECT_THROW(solve_quad_lasso(bad), InputError);
    QuadLassoProblem neg{Matrix::Identity(2, 2), Vector::Ones(2), -1.0, std::nullopt, std::nullopt};
    EXPECT_THROW(solve_quad_lasso(neg), InputError);
    QuadLassoProblem asym{Matrix{{1.0, 0.5}, {0.0, 1.0}}, Vector::Ones(2), 0.1, std::nullopt, std::nullopt};
    EXPECT_THROW(solve_quad_lasso(asym), InputError);
}

TEST(LassoRegression, ScalarSoftThreshold)
{
    // x'x / n = 1, x'y / n = 0.8
    Matrix x(4, 1);
    x << 1, -1, 1, -1;
    Vector y(4);
    y << 0.8, -0.8, 0.8, -0.8;
    const Vector b = lasso_regression(x, y, 0.3, 1e-12);
    EXPECT_NEAR(b(0), 0.5, 1e-12);
}

TEST(LassoRegression, NullThresholdAndOls)
{
    std::mt19937_64 rng(9);
    const Matrix x = testutil::random_matrix(rng, 50, 4);
    const Vector y = x * Vector{{1.0, -2.0, 0.0, 0.5}} + 0.1 * Vector(testutil::random_matrix(rng, 50, 1));
    const double thr = (x.transpose() * y / 50.0).cwiseAbs().maxCoeff();
    EXPECT_EQ(lasso_regression(x, y, thr), Vector::Zero(4));
    const Vector ols = (x.transpose() * x).ldlt().solve(x.transpose() * y);
    EXPECT_LT((lasso_regression(x, y, 0.0, 1e-12, 100000) - ols).cwiseAbs().maxCoeff(), 1e-8);
}
