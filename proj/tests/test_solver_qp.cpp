#include "support/fixtures.hpp"
#include "support/oracles.hpp"

#include <osnr/solver_direct.hpp>
#include <osnr/solver_qp.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace osnr;

namespace {

Matrix row(std::initializer_list<double> values) {
    Matrix m(1, static_cast<Eigen::Index>(values.size()));
    Eigen::Index k = 0;
    for (double v : values) m(0, k++) = v;
    return m;
}

}  // namespace

TEST(BuildQp, QuadraticEqualsSquaredResidual) {
    const auto st = fixtures::fixture_b();
    const auto qp = build_qp(st);
    Matrix h(2, 2);
    h << 2.0, 2.0, 2.0, 2.0;
    EXPECT_LE((qp.H - h).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_NEAR(qp.d(0), -2.0, 1e-15);
    EXPECT_NEAR(qp.d(1), -2.0, 1e-15);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> normal;
    for (int k = 0; k < 20; ++k) {
        Vector u(2);
        u << normal(rng), normal(rng);
        const double residual = (st.gamma_tilde * u - st.b_tilde).squaredNorm();
        EXPECT_NEAR(primal_objective(qp, u), residual, 1e-12 * (1.0 + residual));
    }
}

TEST(BuildQp, RankDeficientPlayerBlock) {
    const auto st = stack_from_blocks(row({1.0, 0.0}), Vector::Ones(1), row({0.0, 1.0}), Vector::Ones(1));
    const auto qp = build_qp(st);
    Matrix h = Matrix::Zero(2, 2);
    h(0, 0) = 2.0;
    EXPECT_LE((qp.H - h).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_NEAR(qp.H_pinv(0, 0), 0.5, 1e-15);
    EXPECT_NEAR(qp.H_pinv(1, 1), 0.0, 1e-15);
    EXPECT_FALSE(qp.constraints_in_range);
}

TEST(BuildQp, FullRankPseudoinverseIsInverse) {
    const Matrix h = 2.0 * Matrix::Identity(3, 3);
    const auto qp = make_qp(h, Vector::Zero(3), 0.0, Matrix::Identity(1, 3), Vector::Zero(1));
    EXPECT_LE((qp.H_pinv - 0.5 * Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_TRUE(qp.constraints_in_range);
}

TEST(BuildQp, FixtureBDual) {
    const auto qp = build_qp(fixtures::fixture_b());
    // H+ = ones / 8 for H = 2 ones(2)
    EXPECT_LE((qp.H_pinv - Matrix::Constant(2, 2, 0.125)).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_NEAR(qp.D(0, 0), -0.5, 1e-14);
    EXPECT_NEAR(qp.c(0), 1.0, 1e-14);
    EXPECT_TRUE(qp.constraints_in_range);
}

TEST(BuildQp, NeedsBothRoles) {
    const auto st = assemble(fixtures::fixture_a_system(),
                             ServicePartition::all_players(2, PlayerParams{1.0, 2.0, 0.01}));
    EXPECT_THROW((void)build_qp(st), Error);
}

TEST(SolveDual, InactiveConstraints) {
    Matrix h = Matrix::Identity(2, 2);
    // c = b + A H+ d <= 0
    const auto qp = make_qp(h, Vector::Zero(2), 0.0, Matrix::Identity(2, 2), Vector::Constant(2, -1.0));
    const auto dual = solve_dual(qp);
    EXPECT_EQ(dual.mu, Vector::Zero(2));
}

TEST(SolveDual, SeparableDiagonal) {
    // D = -A H+ A' = -I and c = b for d = 0.
    Vector b(2);
    b << 1.0, -1.0;
    const auto qp = make_qp(Matrix::Identity(2, 2), Vector::Zero(2), 0.0, Matrix::Identity(2, 2), b);
    const auto dual = solve_dual(qp, {1e-12, 10000, false, std::nullopt});
    EXPECT_NEAR(dual.mu(0), 1.0, 1e-10);
    EXPECT_NEAR(dual.mu(1), 0.0, 1e-12);
}

TEST(SolveDual, FixtureBOneDimensional) {
    const auto qp = build_qp(fixtures::fixture_b());
    DualOptions opt;
    opt.tol = 1e-12;
    opt.record_objective = true;
    const auto dual = solve_dual(qp, opt);
    // maximize -mu^2 / 4 + mu
    EXPECT_NEAR(dual.mu(0), 2.0, 1e-10);
    for (std::size_t k = 1; k < dual.objective_history.size(); ++k)
        EXPECT_GE(dual.objective_history[k], dual.objective_history[k - 1] - 1e-15);
}

TEST(SolveDual, NonConvergenceCarriesIterate) {
    Vector b(2);
    b << 1.0, 0.5;
    Matrix a(2, 2);
    a << 1.0, 0.999, 0.999, 1.0;
    const auto qp = make_qp(Matrix::Identity(2, 2), Vector::Zero(2), 0.0, a, b);
    try {
        (void)solve_dual(qp, {1e-15, 2, false, std::nullopt});
        FAIL();
    } catch (const DualNonConvergence& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NonConvergence);
        EXPECT_EQ(e.last_iterate().size(), 2);
    }
}

TEST(SolveDs2, FixtureB) {
    const auto r = solve_ds2(fixtures::fixture_b());
    EXPECT_NEAR(r.objective, 1.0, 1e-9);
    EXPECT_NEAR(r.u(0), 1.0, 1e-9);
    EXPECT_NEAR(r.u(1), 1.0, 1e-9);
    EXPECT_NEAR(r.mu(0), 2.0, 1e-9);
    EXPECT_LE(r.kkt.complementary_slackness, 1e-9);
    EXPECT_LE(r.kkt.primal_feasibility_violation, 1e-9);
    EXPECT_LE(r.kkt.stationarity_residual, 1e-9);
    EXPECT_FALSE(r.proximal);
}

TEST(SolveDs2, FeasibleSystemHasZeroObjective) {
    const auto st = fixtures::fixture_a();
    const auto r = solve_ds2(st);
    const auto direct = solve_dsnp(st);
    EXPECT_LE(r.objective, 1e-8);
    EXPECT_LE((st.gamma_hat * r.u - st.b_hat).minCoeff(), 1e-8);
    EXPECT_LE((r.u - direct.u).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LE(r.mu.cwiseAbs().maxCoeff(), 1e-8);
}

TEST(SolveDs2, UnconstrainedLeastSquaresWithZeroMultiplier) {
    // mu = 0, square nonsingular player block: u = Gt^{-1} bt.
    Matrix gt(2, 2);
    gt << 2.0, 1.0, 0.5, 3.0;
    Vector bt(2);
    bt << 1.0, 2.0;
    const auto qp = make_qp(2.0 * gt.transpose() * gt, -2.0 * gt.transpose() * bt, bt.squaredNorm(),
                            Matrix::Zero(0, 2), Vector::Zero(0));
    const Vector u = -qp.H_pinv * qp.d;
    EXPECT_LE((gt * u - bt).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(primal_objective(qp, u), 0.0, 1e-12);
}

TEST(SolveDs2, ProximalPathForOffRangeConstraints) {
    Matrix gt(1, 3);
    gt << 1.0, 1.0, 0.0;
    Matrix gh(2, 3);
    gh << 1.0, 1.0, 0.0, 0.0, 0.0, 1.0;
    Vector bh(2);
    bh << 2.0, 1.0;
    const auto st = stack_from_blocks(gt, Vector::Ones(1), gh, bh);
    const auto r = solve_ds2(st);
    EXPECT_TRUE(r.proximal);
    EXPECT_NEAR(r.objective, 1.0, 1e-8);
    EXPECT_GE(r.u(2), 1.0 - 1e-8);
    EXPECT_NEAR(r.u(0) + r.u(1), 2.0, 1e-8);
    EXPECT_LE(r.kkt.complementary_slackness, 1e-6);
}

TEST(Properties, WeakDuality) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto qp = build_qp(fixtures::fixture_b());
    for (int k = 0; k < 100; ++k) {
        const Vector mu = Vector::Constant(1, 5.0 * unit(rng));
        Vector u(2);
        u << 4.0 * unit(rng) - 1.0, 4.0 * unit(rng) - 1.0;
        if (u.sum() < 2.0) continue;
        EXPECT_LE(dual_objective(qp, mu), primal_objective(qp, u) + 1e-12);
    }
}

TEST(Properties, GridOracle) {
    std::mt19937_64 rng(22);
    int done = 0;
    while (done < 10) {
        const auto q = oracle::random_qp_instance(rng);
        const auto st = stack_from_blocks(q.gamma_tilde, q.b_tilde, q.gamma_hat, q.b_hat);
        QpResult r;
        try {
            r = solve_ds2(st);
        } catch (const Error&) {
            continue;
        }
        if (r.u.cwiseAbs().maxCoeff() > 4.0) continue;
        ++done;
        const double grid = oracle::grid_qp(q.gamma_tilde, q.b_tilde, q.gamma_hat, q.b_hat, 6.0, 41, 5);
        EXPECT_NEAR(r.objective, grid, 5e-3);
        EXPECT_LE(r.kkt.complementary_slackness, 1e-6);
        EXPECT_LE(r.kkt.primal_feasibility_violation, 1e-6);
    }
}
