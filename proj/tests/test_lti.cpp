#include <cmath>

#include <gtest/gtest.h>

#include "grssnn/lti.hpp"
#include "grssnn/lti_estimate.hpp"
#include "grssnn/random.hpp"

using namespace grssnn;

namespace {

LtiStateSpace scalar_system(double a, double b, double c, double d) {
    return {Eigen::MatrixXd::Constant(1, 1, a), Eigen::MatrixXd::Constant(1, 1, b), Eigen::MatrixXd::Constant(1, 1, c),
            Eigen::MatrixXd::Constant(1, 1, d)};
}

// third-order stable system with complex poles, two inputs, one output
LtiStateSpace third_order() {
    Eigen::MatrixXd a(3, 3), b(3, 2), c(1, 3), d(1, 2);
    a << 0.7, 0.4, 0.0, -0.4, 0.7, 0.1, 0.0, 0.0, 0.5;
    b << 1.0, 0.0, 0.5, -0.3, 0.2, 1.0;
    c << 1.0, -0.5, 0.8;
    d << 0.1, 0.0;
    return {a, b, c, d};
}

double markov_error(const LtiStateSpace& a, const LtiStateSpace& b, int lags) {
    const auto ha = markov_parameters(a, lags), hb = markov_parameters(b, lags);
    double e = 0.0;
    for (int k = 0; k <= lags; ++k) e = std::max(e, (ha[k] - hb[k]).cwiseAbs().maxCoeff());
    return e;
}

}  // namespace

TEST(SimulateLti, HandRecursion) {
    const auto m = scalar_system(0.5, 1.0, 1.0, 0.0);
    const auto t = simulate_lti(m, Eigen::MatrixXd::Ones(5, 1));
    Eigen::VectorXd expect(5);
    expect << 0.0, 1.0, 1.5, 1.75, 1.875;
    EXPECT_LE((t.y.col(0) - expect).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_EQ(t.x.rows(), 6);
    EXPECT_DOUBLE_EQ(t.x(5, 0), 1.9375);
}

TEST(SimulateLti, FeedthroughOnly) {
    const auto m = scalar_system(0.0, 0.0, 0.0, 2.0);
    Eigen::MatrixXd u(4, 1);
    u << 1, -2, 3.5, 0;
    EXPECT_TRUE(simulate_lti(m, u).y.isApprox(2.0 * u));
}

TEST(SimulateLti, FixedPointHolds) {
    // with u = 0 and A x0 = x0 the state stays put
    Eigen::MatrixXd a(2, 2);
    a << 1, 0, 0, 0.3;
    LtiStateSpace m{a, Eigen::MatrixXd::Zero(2, 1), Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Zero(2, 1)};
    Eigen::VectorXd x0(2);
    x0 << 4.0, 0.0;
    const auto t = simulate_lti(m, Eigen::MatrixXd::Zero(10, 1), x0);
    for (Eigen::Index k = 0; k <= 10; ++k) EXPECT_EQ(t.x.row(k), x0.transpose());
}

TEST(SimulateLti, ShapeErrors) {
    const auto m = third_order();
    EXPECT_THROW(simulate_lti(m, Eigen::MatrixXd::Zero(4, 1)), std::invalid_argument);
    EXPECT_THROW(simulate_lti(m, Eigen::MatrixXd::Zero(4, 2), Eigen::VectorXd::Zero(2)), std::invalid_argument);
    EXPECT_THROW(LtiStateSpace(Eigen::MatrixXd::Zero(2, 3), Eigen::MatrixXd::Zero(2, 1), Eigen::MatrixXd::Zero(1, 2),
                               Eigen::MatrixXd::Zero(1, 1)),
                 std::invalid_argument);
}

TEST(Lti, StabilityAndMarkov) {
    const auto m = third_order();
    EXPECT_TRUE(m.is_stable());
    EXPECT_NEAR(m.spectral_radius(), std::hypot(0.7, 0.4), 1e-12);
    EXPECT_FALSE(scalar_system(1.0, 1, 1, 0).is_stable());
    const auto h = markov_parameters(scalar_system(0.5, 2.0, 3.0, 0.25), 3);
    EXPECT_DOUBLE_EQ(h[0](0, 0), 0.25);
    EXPECT_DOUBLE_EQ(h[1](0, 0), 6.0);
    EXPECT_DOUBLE_EQ(h[3](0, 0), 1.5);
}

TEST(Lti, SimilarityKeepsMarkov) {
    const auto m = third_order();
    Eigen::MatrixXd t(3, 3);
    t << 2, 1, 0, 0, 1, 0, 1, 0, 3;
    EXPECT_LE(markov_error(m, similarity_transform(m, t), 30), 1e-12);
}

TEST(Lti, SeriesMatchesCascadeSimulation) {
    const auto first = third_order();
    const auto second = scalar_system(0.9, 0.5, 1.0, 0.2);
    RandomStream rng(3, "series");
    const Eigen::MatrixXd u = rng.uniform_matrix(50, 2);
    const Eigen::MatrixXd y1 = simulate_lti(first, u).y;
    const Eigen::MatrixXd y2 = simulate_lti(second, y1).y;
    EXPECT_LE((simulate_lti(series(first, second), u).y - y2).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(NormalizeStates, UnitStdAndSameOutput) {
    const auto m = third_order();
    RandomStream rng(5, "normalize-states");
    const Eigen::MatrixXd u = 30.0 * rng.uniform_matrix(400, 2);
    Eigen::VectorXd x0(3);
    x0 << 1, -2, 0.5;
    const auto ns = normalize_states(m, u, x0);
    const auto t = simulate_lti(m, u, x0);
    const Eigen::VectorXd xn0 = ns.scale.cwiseInverse().cwiseProduct(x0);
    const auto tn = simulate_lti(ns.model, u, xn0);
    EXPECT_LE((t.y - tn.y).cwiseAbs().maxCoeff(), 1e-12 * t.y.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < 3; ++i) EXPECT_NEAR(population_std(tn.x.topRows(400).col(i)), 1.0, 1e-12);
    EXPECT_LE(markov_error(m, ns.model, 20), 1e-12 * 30);
}

TEST(NormalizeStates, UnexcitedStateRejected) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(2, 2) * 0.5, b(2, 1);
    b << 1, 0;
    LtiStateSpace m{a, b, Eigen::MatrixXd::Ones(1, 2), Eigen::MatrixXd::Zero(1, 1)};
    try {
        normalize_states(m, Eigen::MatrixXd::Ones(20, 1));
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("state 2"), std::string::npos);
    }
}

namespace {

Dataset noise_driven(const LtiStateSpace& m, std::uint64_t seed, Eigen::Index n,
                     const Eigen::VectorXd& x0) {
    RandomStream rng(seed, "lti-estimate-input");
    Eigen::MatrixXd u(n, m.n_u());
    for (Eigen::Index k = 0; k < n; ++k)
        for (Eigen::Index j = 0; j < m.n_u(); ++j) u(k, j) = rng.gaussian();
    return Dataset(u, simulate_lti(m, u, x0).y, 1.0);
}

}  // namespace

TEST(EstimateLti, RecoversFirstOrder) {
    const auto truth = scalar_system(0.8, 1.0, 1.0, 0.0);
    const auto d = noise_driven(truth, 1, 1000, Eigen::VectorXd::Zero(1));
    const auto est = estimate_lti(d, 1);
    EXPECT_EQ(est.order, 1);
    EXPECT_TRUE(est.stable);
    EXPECT_LE(markov_error(truth, est.model, 20), 1e-6);
    EXPECT_NEAR(est.model.A(0, 0), 0.8, 1e-6);
}

TEST(EstimateLti, RecoversThirdOrderWithInitialState) {
    const auto truth = third_order();
    Eigen::VectorXd x0(3);
    x0 << 2.0, -1.0, 0.5;
    const auto d = noise_driven(truth, 2, 2000, x0);
    const auto est = estimate_lti(d, 3);
    EXPECT_LE(markov_error(truth, est.model, 20), 1e-6);
    EXPECT_LE(std::min(est.subspace_rmse, est.refined_rmse), 1e-6);
    // the fitted x0 reproduces the data
    const auto sim = simulate_lti(est.model, d.u, est.x0);
    EXPECT_LE(rmse(d.y, sim.y), 1e-6);
    ASSERT_EQ(est.hankel_singular_values.size(), 10);  // default horizon max(2n+2, 10), one output
    // a clear gap after the true order
    EXPECT_LT(est.hankel_singular_values(3), 1e-8 * est.hankel_singular_values(2));
}

TEST(EstimateLti, Errors) {
    const auto truth = scalar_system(0.8, 1.0, 1.0, 0.0);
    const auto d = noise_driven(truth, 1, 100, Eigen::VectorXd::Zero(1));
    EXPECT_THROW(estimate_lti(d, 0), std::invalid_argument);
    EXPECT_THROW(estimate_lti(d, 10), DataError);  // fewer than 20 (order + 1) samples
}

TEST(EstimateLti, WarnsOnPoorExcitation) {
    const auto truth = third_order();
    Eigen::MatrixXd u(600, 2);
    for (Eigen::Index k = 0; k < 600; ++k) u.row(k) << std::sin(0.3 * k), 0.0;
    const Dataset d(u, simulate_lti(truth, u).y, 1.0);
    const auto est = estimate_lti(d, 3);
    EXPECT_FALSE(est.warnings.empty());
}
