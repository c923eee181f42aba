#include <cmath>
#include <gtest/gtest.h>
#include <vector>

#include "ctrlsense/sensing.hpp"
#include "test_support.hpp"

using namespace ctrlsense;
namespace ct = ctrlsense::testing;

namespace {

SensorSpec sensor(double mean, double ar_var, double phi, double noise, std::size_t max_samples = 2) {
    return SensorSpec{"s", {mean, mean + 1.0}, {ar_var, ar_var}, phi, noise, max_samples};
}

} // namespace

// =============================================================================
// Sensor covariance
// =============================================================================

TEST(SensorCovariance, HandEvaluatedTwoSampleBlock) {
    const Matrix Q = build_sensor_covariance(sensor(0, 1.0, 0.5, 0.1), 0, 2);
    // 1/0.75 + 0.1 on the diagonal, 0.5/0.75 off it
    EXPECT_NEAR(Q(0, 0), 1.43333, 1e-5);
    EXPECT_NEAR(Q(1, 1), 1.43333, 1e-5);
    EXPECT_NEAR(Q(0, 1), 0.66667, 1e-5);
    EXPECT_NEAR(Q(1, 0), 0.66667, 1e-5);
}

TEST(SensorCovariance, ZeroSignalIsPureNoise) {
    for (double phi : {-0.9, 0.0, 0.7}) {
        const Matrix Q = build_sensor_covariance(sensor(0, 0.0, phi, 1.0, 3), 0, 3);
        EXPECT_TRUE(Q.isApprox(Matrix::Identity(3, 3), 1e-15));
    }
}

TEST(SensorCovariance, ZeroCorrelationIsDiagonal) {
    const Matrix Q = build_sensor_covariance(sensor(0, 1.0, 0.0, 0.1), 0, 2);
    EXPECT_NEAR(Q(0, 0), 1.1, 1e-15);
    EXPECT_EQ(Q(0, 1), 0.0);
}

TEST(SensorCovariance, ToeplitzPowers) {
    const Matrix Q = build_sensor_covariance(sensor(0, 0.75, 0.5, 0.0 + 1e-9, 4), 0, 4);
    // scale = 0.75 / 0.75 = 1, so off-diagonals are phi^|r-c|
    EXPECT_NEAR(Q(0, 3), 0.125, 1e-12);
    EXPECT_NEAR(Q(1, 3), 0.25, 1e-12);
    EXPECT_NEAR(Q(3, 0), 0.125, 1e-12);
}

TEST(SensorCovariance, InvalidARParameter) {
    EXPECT_THROW(build_sensor_covariance(sensor(0, 1.0, 1.0, 0.1), 0, 2), InvalidARParameter);
    EXPECT_THROW(build_sensor_covariance(sensor(0, 1.0, -1.5, 0.1), 0, 2), InvalidARParameter);
}

// =============================================================================
// Control sets
// =============================================================================

TEST(ControlSet, BudgetEnumerationOrder) {
    const auto cs = ControlSet::all_within_budget({2, 2, 2}, 2);
    const std::vector<std::vector<std::size_t>> expected{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {2, 0, 0}, {0, 2, 0},
                                                         {0, 0, 2}, {1, 1, 0}, {1, 0, 1}, {0, 1, 1}};
    ASSERT_EQ(cs.size(), expected.size());
    for (std::size_t a = 0; a < cs.size(); ++a) EXPECT_EQ(cs[a].allocation, expected[a]) << "control " << a + 1;
}

TEST(ControlSet, BudgetEnumerationRespectsPerSensorMax) {
    const auto cs = ControlSet::all_within_budget({1, 3}, 3);
    for (const auto& u : cs) {
        EXPECT_LE(u.allocation[0], 1u);
        EXPECT_LE(u.total(), 3u);
        EXPECT_GT(u.total(), 0u);
    }
    EXPECT_EQ(cs.size(), 6u); // (1,0) (0,1) (1,1) (0,2) (1,2) (0,3)
}

TEST(ControlSet, RejectsEmptyAndDuplicateControls) {
    EXPECT_THROW(ControlSet({ControlInput{{0, 0}}}), EmptyControl);
    EXPECT_THROW(ControlSet({ControlInput{{1, 0}}, ControlInput{{1, 0}}}), ConfigError);
    EXPECT_THROW(ControlSet(std::vector<ControlInput>{}), ConfigError);
}

// =============================================================================
// Model assembly
// =============================================================================

TEST(AssembleModel, StacksMeansAndBuildsBlocks) {
    std::vector<SensorSpec> specs{
        {"a", {1.0, 2.0}, {1.0, 1.0}, 0.5, 0.1, 2},
        {"b", {3.0, 4.0}, {0.5, 0.5}, 0.5, 0.2, 2},
        {"c", {5.0, 6.0}, {0.5, 0.5}, 0.5, 0.2, 2},
    };
    const ControlSet cs({ControlInput{{1, 1, 0}}, ControlInput{{2, 0, 0}}});
    const auto model = assemble_observation_model(specs, cs, 2);
    // u = (1,1,0), state 2
    EXPECT_EQ(model.dim(0), 2u);
    EXPECT_NEAR(model.mean(1, 0)[0], 2.0, 0.0);
    EXPECT_NEAR(model.mean(1, 0)[1], 4.0, 0.0);
    EXPECT_EQ(model.cov(1, 0)(0, 1), 0.0); // cross-sensor entries exactly zero
    EXPECT_NEAR(model.cov(1, 0)(0, 0), 1.0 / 0.75 + 0.1, 1e-12);
    EXPECT_NEAR(model.cov(1, 0)(1, 1), 0.5 / 0.75 + 0.2, 1e-12);
    // u = (2,0,0) reproduces the two-sample block
    EXPECT_TRUE(model.cov(0, 1).isApprox(build_sensor_covariance(specs[0], 0, 2), 1e-15));
    EXPECT_EQ(model.mean(0, 1), Vector::Constant(2, 1.0));
}

TEST(AssembleModel, StandardNormalChannel) {
    const std::vector<SensorSpec> specs{{"z", {0.0, 0.0}, {0.0, 0.0}, 0.0, 1.0, 1}};
    const auto model = assemble_observation_model(specs, ControlSet({ControlInput{{1}}}));
    EXPECT_EQ(model.mean(0, 0), Vector::Zero(1));
    EXPECT_EQ(model.cov(0, 0), Matrix::Identity(1, 1));
}

TEST(AssembleModel, BudgetAndPerSensorLimits) {
    std::vector<SensorSpec> specs{{"a", {0, 1}, {1, 1}, 0.5, 0.1, 1}, {"b", {0, 1}, {1, 1}, 0.5, 0.1, 3}};
    EXPECT_THROW(assemble_observation_model(specs, ControlSet({ControlInput{{2, 0}}})), BudgetExceeded);
    EXPECT_THROW(assemble_observation_model(specs, ControlSet({ControlInput{{0, 3}}}), 2), BudgetExceeded);
    EXPECT_NO_THROW(assemble_observation_model(specs, ControlSet({ControlInput{{1, 1}}}), 2));
}

TEST(AssembleModel, AllCovariancesSymmetricWithCholesky) {
    std::vector<SensorSpec> specs{{"a", {0, 1, 2}, {0.3, 0.6, 1.0}, 0.8, 0.05, 4},
                                  {"b", {1, 1, 0}, {1.0, 0.0, 2.0}, -0.4, 0.2, 4}};
    const auto model = assemble_observation_model(specs, ControlSet::all_within_budget({4, 4}, 4), 4);
    for (std::size_t u = 0; u < model.num_controls(); ++u)
        for (std::size_t i = 0; i < model.states(); ++i) {
            const Matrix& Q = model.cov(i, u);
            EXPECT_LE((Q - Q.transpose()).cwiseAbs().maxCoeff(), 1e-12);
            EXPECT_EQ(Eigen::LLT<Matrix>(Q).info(), Eigen::Success);
            const auto n0 = static_cast<Eigen::Index>(model.controls()[u].allocation[0]);
            if (n0 > 0 && n0 < Q.rows()) EXPECT_EQ(Q.block(0, n0, n0, Q.rows() - n0).cwiseAbs().maxCoeff(), 0.0);
        }
}

// =============================================================================
// Sampling and density
// =============================================================================

TEST(LogPdf, StandardNormalAtMode) {
    const auto model = ct::scalar_pair_model(0.0, 1.0, 1.0, 1.0);
    EXPECT_NEAR(log_pdf(model, Vector::Zero(1), 0, 0), -0.918938533204673, 1e-12);
}

TEST(LogPdf, IsotropicTwoDimensional) {
    ControlSet cs({ControlInput{{2}}});
    std::vector<std::vector<GaussianComponent>> comps(1);
    comps[0].emplace_back(Vector::Zero(2), Matrix::Identity(2, 2));
    comps[0].emplace_back(Vector::Ones(2), Matrix::Identity(2, 2));
    const ObservationModel model(cs, std::move(comps));
    EXPECT_NEAR(log_pdf(model, Vector::Ones(2), 0, 0), -std::log(2 * M_PI) - 1.0, 1e-12);
    EXPECT_NEAR(log_pdf(model, Vector::Ones(2), 0, 0), -2.837877, 1e-6);
}

TEST(LogPdf, MatchesExplicitInverseAndDeterminant) {
    Rng gen(3);
    const auto model = ct::random_model(3, {3}, gen);
    for (int t = 0; t < 50; ++t) {
        const Vector y = ct::random_vector(3, gen, 2.0);
        for (std::size_t i = 0; i < 3; ++i)
            EXPECT_NEAR(log_pdf(model, y, i, 0), ct::oracle_log_pdf(y, model.mean(i, 0), model.cov(i, 0)), 1e-10);
    }
}

TEST(LogPdf, DimensionMismatch) {
    const auto model = ct::scalar_pair_model(0.0, 1.0, 1.0, 1.0);
    EXPECT_THROW(log_pdf(model, Vector::Zero(2), 0, 0), DimensionMismatch);
}

TEST(SampleObservation, StandardNormalMoments) {
    ControlSet cs({ControlInput{{3}}});
    std::vector<std::vector<GaussianComponent>> comps(1);
    comps[0].emplace_back(Vector::Zero(3), Matrix::Identity(3, 3));
    comps[0].emplace_back(Vector::Ones(3), Matrix::Identity(3, 3));
    const ObservationModel model(cs, std::move(comps));
    Rng gen(17);
    const int N = 100000;
    Vector mean = Vector::Zero(3);
    Matrix second = Matrix::Zero(3, 3);
    for (int k = 0; k < N; ++k) {
        const Vector y = sample_observation(model, 0, 0, gen);
        mean += y;
        second += y * y.transpose();
    }
    mean /= N;
    const Matrix cov = second / N - mean * mean.transpose();
    for (int i = 0; i < 3; ++i) EXPECT_LE(std::abs(mean[i]), 3.0 * 3 / std::sqrt(double(N)));
    // Var of a sample variance of N(0,1) is 2/N; of a sample covariance, 1/N.
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            EXPECT_LE(std::abs(cov(i, j) - (i == j)), 3.0 * std::sqrt((i == j ? 2.0 : 1.0) / N));
}

TEST(SampleObservation, NoiseVarianceScalesSampleVariance) {
    auto variance_for = [](double noise) {
        const std::vector<SensorSpec> specs{{"z", {0.0, 0.0}, {0.0, 0.0}, 0.0, noise, 1}};
        const auto model = assemble_observation_model(specs, ControlSet({ControlInput{{1}}}));
        Rng gen(5);
        ct::MomentAccumulator acc;
        for (int k = 0; k < 100000; ++k) acc.add(sample_observation(model, 0, 0, gen)[0]);
        return acc;
    };
    const auto a = variance_for(1.0), b = variance_for(2.0);
    const double ratio = b.variance() / a.variance();
    // identical seeds make the two draws perfectly coupled; ratio is exact up to rounding
    EXPECT_NEAR(ratio, 2.0, 1e-9);
}

TEST(SampleObservation, NearDeterministicSensor) {
    const std::vector<SensorSpec> specs{{"z", {5.0, 5.0}, {0.0, 0.0}, 0.0, 1e-12, 1}};
    const auto model = assemble_observation_model(specs, ControlSet({ControlInput{{1}}}));
    Rng gen(8);
    for (int k = 0; k < 1000; ++k) EXPECT_NEAR(sample_observation(model, 0, 0, gen)[0], 5.0, 1e-5);
}

TEST(SampleObservation, SameSeedSameDraw) {
    Rng gen(1);
    const auto model = ct::random_model(2, {2}, gen);
    Rng a(9), b(9);
    EXPECT_EQ(sample_observation(model, 1, 0, a), sample_observation(model, 1, 0, b));
}

TEST(SampleObservation, DifferentialEntropyIdentity) {
    Rng gen(21);
    const auto model = ct::random_model(2, {3}, gen);
    const auto& g = model.component(1, 0);
    ct::MomentAccumulator acc;
    for (int k = 0; k < 100000; ++k) acc.add(log_pdf(model, sample_observation(model, 1, 0, gen), 1, 0));
    const double expected = -0.5 * 3 * (1.0 + std::log(2 * M_PI)) - 0.5 * g.log_det;
    EXPECT_LE(std::abs(acc.mean - expected), 3 * acc.mean_se());
}

TEST(LogPdf, DensityIntegratesToOne) {
    // importance check: E_q[f(y)/q(y)] = 1 with q a wider Gaussian
    Rng gen(31);
    const auto model = ct::random_model(2, {2}, gen);
    const auto& g = model.component(0, 0);
    const Matrix proposal_cov = 4.0 * g.cov;
    const Matrix L = proposal_cov.llt().matrixL();
    ct::MomentAccumulator acc;
    for (int k = 0; k < 200000; ++k) {
        const Vector y = ct::draw_gaussian(g.mean, L, gen);
        acc.add(std::exp(log_pdf(model, y, 0, 0) - ct::oracle_log_pdf(y, g.mean, proposal_cov)));
    }
    EXPECT_NEAR(acc.mean, 1.0, 0.01);
}

TEST(GaussianComponent, RejectsIndefiniteCovariance) {
    Matrix Q(2, 2);
    Q << 1.0, 2.0,
         2.0, 1.0;
    EXPECT_THROW(GaussianComponent(Vector::Zero(2), Q), CholeskyFailure);
}
