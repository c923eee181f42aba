#include <cmath>
#include <gtest/gtest.h>
#include <limits>
#include <vector>

#include "ctrlsense/dp.hpp"
#include "test_support.hpp"

using namespace ctrlsense;
namespace ct = ctrlsense::testing;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

// Error covariance of the linear MMSE estimate: Sigma - Sigma M^T S^{-1} M Sigma.
double oracle_expected_error(const ObservationModel& model, const Vector& p, std::size_t u) {
    const auto n = static_cast<Eigen::Index>(model.states());
    const auto d = static_cast<Eigen::Index>(model.dim(u));
    Matrix M(d, n);
    Matrix Qbar = Matrix::Zero(d, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        M.col(i) = model.mean(static_cast<std::size_t>(i), u);
        Qbar += p[i] * model.cov(static_cast<std::size_t>(i), u);
    }
    const Matrix Sigma = Matrix(p.asDiagonal()) - p * p.transpose();
    const Matrix S = M * Sigma * M.transpose() + Qbar;
    return (Sigma - Sigma * M.transpose() * S.inverse() * M * Sigma).trace();
}

// Two states, two controls: u=1 separates the states, u=2 does not.
ObservationModel informative_and_useless() {
    ControlSet cs({ControlInput{{1, 0}}, ControlInput{{0, 1}}});
    std::vector<std::vector<GaussianComponent>> comps(2);
    comps[0].emplace_back(Vector::Constant(1, -1.0), Matrix::Identity(1, 1));
    comps[0].emplace_back(Vector::Constant(1, 1.0), Matrix::Identity(1, 1));
    comps[1].emplace_back(Vector::Constant(1, 0.0), Matrix::Identity(1, 1));
    comps[1].emplace_back(Vector::Constant(1, 0.0), Matrix::Identity(1, 1));
    return ObservationModel(cs, std::move(comps));
}

Matrix sticky2() {
    Matrix P(2, 2);
    P << 0.9, 0.2,
         0.1, 0.8;
    return P;
}

} // namespace

// =============================================================================
// Belief grid
// =============================================================================

TEST(BeliefGrid, SizeOrderAndLookup) {
    const BeliefGrid g(3, 4);
    EXPECT_EQ(g.size(), 15u);
    EXPECT_EQ(simplex_lattice_size(3, 4), 15u);
    EXPECT_EQ(simplex_lattice_size(4, 10), 286u);
    EXPECT_EQ(g.coords(0), (std::vector<int>{4, 0, 0}));
    EXPECT_EQ(g.coords(1), (std::vector<int>{3, 1, 0}));
    EXPECT_EQ(g.coords(g.size() - 1), (std::vector<int>{0, 0, 4}));
    for (std::size_t k = 0; k < g.size(); ++k) {
        EXPECT_EQ(g.index_of(g.coords(k)), k);
        EXPECT_NEAR(g.point(k).sum(), 1.0, 1e-15);
    }
    EXPECT_THROW(g.index_of({1, 1, 1}), ConfigError);
}

TEST(BeliefGrid, NearestMatchesBruteForce) {
    Rng gen(1);
    const BeliefGrid g(4, 7);
    for (int trial = 0; trial < 2000; ++trial) {
        const Vector p = trial % 4 ? ct::random_belief(4, gen) : Vector(ct::random_vector(4, gen, 0.6));
        const Vector q = project_to_simplex(p);
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < g.size(); ++k) best = std::min(best, (g.point(k) - q).squaredNorm());
        EXPECT_NEAR((g.point(g.nearest(p)) - q).squaredNorm(), best, 1e-12);
    }
}

TEST(BeliefGrid, GridPointsMapToThemselves) {
    const BeliefGrid g(3, 10);
    for (std::size_t k = 0; k < g.size(); ++k) EXPECT_EQ(g.nearest(g.point(k)), k);
}

// =============================================================================
// Stage cost
// =============================================================================

TEST(StageCost, ZeroAtVertices) {
    Rng gen(2);
    const auto model = ct::random_model(4, {2, 3}, gen);
    for (Eigen::Index i = 0; i < 4; ++i)
        for (std::size_t u = 0; u < 2; ++u) {
            const Vector h = dp_stage_cost_vector(model, Vector::Unit(4, i), u);
            EXPECT_NEAR(h[i], 0.0, 1e-15);
            EXPECT_NEAR(dp_stage_cost(model, Vector::Unit(4, i), u), 0.0, 1e-15);
        }
}

TEST(StageCost, EqualsLinearEstimatorErrorTrace) {
    Rng gen(3);
    for (int trial = 0; trial < 100; ++trial) {
        const auto model = ct::random_model(4, {1, 3}, gen);
        const Vector p = ct::random_belief(4, gen);
        for (std::size_t u = 0; u < 2; ++u)
            EXPECT_NEAR(dp_stage_cost(model, p, u), oracle_expected_error(model, p, u), 1e-10);
    }
}

TEST(StageCost, UninformativeControlCostsThePriorSpread) {
    const auto model = informative_and_useless();
    const Vector p = vec({0.3, 0.7});
    EXPECT_NEAR(dp_stage_cost(model, p, 1), 1.0 - p.squaredNorm(), 1e-14);
    EXPECT_LT(dp_stage_cost(model, p, 0), dp_stage_cost(model, p, 1));
}

TEST(StageCost, MirrorSymmetry) {
    const auto model = ct::scalar_pair_model(-1.0, 1.0, 0.8, 0.8);
    for (double q : {0.1, 0.25, 0.4, 0.5}) {
        EXPECT_NEAR(dp_stage_cost(model, vec({q, 1 - q}), 0), dp_stage_cost(model, vec({1 - q, q}), 0), 1e-14);
    }
}

TEST(StageCost, MonteCarloSquaredError) {
    Rng gen(4);
    const auto model = ct::random_model(3, {2}, gen);
    const Vector p = vec({0.2, 0.5, 0.3});
    const auto t = compute_gain(model, p, 0);
    ct::MomentAccumulator acc;
    for (int k = 0; k < 100000; ++k) {
        const std::size_t x = sample_categorical(p, gen);
        const Vector post = p + t.gain * (sample_observation(model, x, 0, gen) - t.y_pred);
        acc.add((Vector::Unit(3, static_cast<Eigen::Index>(x)) - post).squaredNorm());
    }
    EXPECT_LE(std::abs(acc.mean - dp_stage_cost(model, p, 0)), 3 * acc.mean_se());
}

// =============================================================================
// Bayes map and backups
// =============================================================================

TEST(BayesPosterior, MatchesDirectFormula) {
    Rng gen(5);
    const auto model = ct::random_model(3, {2}, gen);
    Vector logw, post, scratch;
    for (int trial = 0; trial < 50; ++trial) {
        const Vector p = ct::random_belief(3, gen);
        const Vector y = ct::random_vector(2, gen);
        bayes_posterior(model, p, y, 0, logw, post, scratch);
        Vector direct(3);
        for (Eigen::Index i = 0; i < 3; ++i)
            direct[i] = p[i] * std::exp(ct::oracle_log_pdf(y, model.mean(static_cast<std::size_t>(i), 0),
                                                                model.cov(static_cast<std::size_t>(i), 0)));
        direct /= direct.sum();
        EXPECT_TRUE(post.isApprox(direct, 1e-10));
    }
}

TEST(BayesPosterior, FarObservationDoesNotUnderflow) {
    const auto model = ct::scalar_pair_model(0.0, 1.0, 1.0, 1.0);
    Vector logw, post, scratch;
    bayes_posterior(model, vec({0.5, 0.5}), Vector::Constant(1, 80.0), 0, logw, post, scratch);
    EXPECT_NEAR(post[1], 1.0, 1e-15);
    EXPECT_TRUE(std::isfinite(post[0]));
}

TEST(Backup, ZeroContinuationLeavesStageCost) {
    Rng gen(6);
    const auto model = ct::random_model(3, {1, 2}, gen);
    const TransitionMatrix P = TransitionMatrix::identity(3);
    const BeliefGrid grid(3, 5);
    StageTable zero;
    zero.value.assign(grid.size(), 0.0);
    const StageTable t = dp_backup(model, P, grid, zero, 64, 1);
    for (std::size_t k = 0; k < grid.size(); ++k)
        for (std::size_t u = 0; u < 2; ++u) {
            EXPECT_NEAR(t.bracket(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(u)),
                        dp_stage_cost(model, grid.point(k), u), 1e-15);
            EXPECT_EQ(t.bracket_se(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(u)), 0.0);
        }
}

TEST(Backup, ConstantContinuationAddsExactly) {
    const auto model = informative_and_useless();
    const BeliefGrid grid(2, 8);
    StageTable c;
    c.value.assign(grid.size(), 0.25);
    const StageTable t = dp_backup(model, TransitionMatrix(sticky2()), grid, c, 100, 3);
    for (std::size_t k = 0; k < grid.size(); ++k)
        EXPECT_NEAR(t.value[k], dp_terminal(model, grid).value[k] + 0.25, 1e-14);
}

TEST(Backup, StandardErrorShrinksWithSamples) {
    const auto model = informative_and_useless();
    const TransitionMatrix P(sticky2());
    const BeliefGrid grid(2, 20);
    const StageTable term = dp_terminal(model, grid);
    const StageTable a = dp_backup(model, P, grid, term, 500, 7);
    const StageTable b = dp_backup(model, P, grid, term, 8000, 7);
    for (std::size_t k = 1; k + 1 < grid.size(); ++k) {
        const auto r = static_cast<Eigen::Index>(k);
        const double sa = a.bracket_se(r, 0), sb = b.bracket_se(r, 0);
        ASSERT_GT(sb, 0.0);
        EXPECT_NEAR(sa / sb, 4.0, 1.0);
        EXPECT_LE(std::abs(a.bracket(r, 0) - b.bracket(r, 0)), 4 * std::hypot(sa, sb) + 1e-12);
    }
}

TEST(Solve, DeterministicAndThreadIndependent) {
    Rng gen(8);
    const auto model = ct::random_model(3, {1, 2}, gen);
    Matrix Pm(3, 3);
    Pm << 0.8, 0.1, 0.3,
          0.1, 0.7, 0.3,
          0.1, 0.2, 0.4;
    const TransitionMatrix P(Pm);
    const auto a = dp_solve(model, P, 3, 6, 200, 11, 1);
    const auto b = dp_solve(model, P, 3, 6, 200, 11, 3);
    const auto c = dp_solve(model, P, 3, 6, 200, 12, 1);
    for (std::size_t k = 1; k <= 3; ++k) {
        EXPECT_EQ(a.stage(k).bracket, b.stage(k).bracket);
        EXPECT_EQ(a.stage(k).best_control, b.stage(k).best_control);
    }
    EXPECT_NE(a.stage(1).bracket, c.stage(1).bracket);
    EXPECT_EQ(a.stage(3).bracket, c.stage(3).bracket); // terminal has no sampling
}

TEST(Solve, PrefersTheInformativeControlAwayFromVertices) {
    const auto model = informative_and_useless();
    const auto pol = dp_solve(model, TransitionMatrix(sticky2()), 4, 10, 500, 1);
    for (std::size_t k = 1; k <= 4; ++k)
        for (std::size_t g = 1; g + 1 < pol.grid.size(); ++g) EXPECT_EQ(pol.stage(k).best_control[g], 0u);
}

TEST(Solve, ValueIsMinimumBracket) {
    Rng gen(9);
    const auto model = ct::random_model(2, {1, 1, 2}, gen);
    const auto pol = dp_solve(model, TransitionMatrix(sticky2()), 3, 10, 300, 2);
    for (std::size_t k = 1; k <= 3; ++k)
        for (std::size_t g = 0; g < pol.grid.size(); ++g) {
            const auto row = pol.stage(k).bracket.row(static_cast<Eigen::Index>(g));
            EXPECT_EQ(pol.stage(k).value[g], row.minCoeff());
            EXPECT_EQ(row[static_cast<Eigen::Index>(pol.stage(k).best_control[g])], row.minCoeff());
        }
}

TEST(Solve, StageForRemaining) {
    DpPolicy p;
    p.stages.resize(4);
    EXPECT_EQ(p.stage_for_remaining(100), 1u);
    EXPECT_EQ(p.stage_for_remaining(4), 1u);
    EXPECT_EQ(p.stage_for_remaining(3), 2u);
    EXPECT_EQ(p.stage_for_remaining(1), 4u);
}

TEST(Solve, RejectsBadArguments) {
    const auto model = informative_and_useless();
    EXPECT_THROW(dp_solve(model, TransitionMatrix(sticky2()), 0, 5, 10, 1), ConfigError);
    EXPECT_THROW(dp_solve(model, TransitionMatrix::identity(3), 2, 5, 10, 1), DimensionMismatch);
}
