#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>

#include "doctest.h"
#include "farma/trainer.hpp"

using namespace farma;

namespace {

Vec v1(double x) { return Vec::Constant(1, x); }

/// u_k = k, y_k = 0, r_k = 100 + k so that z_k = r_k - y_k = 100 + k.
TrainingDataset ramp_dataset(std::size_t n, Eigen::Index window) {
    TrainingDataset d;
    for (std::size_t k = 0; k < n; ++k) {
        d.u.push_back(v1(static_cast<double>(k)));
        d.y.push_back(v1(0));
        d.r.push_back(v1(100.0 + static_cast<double>(k)));
    }
    d.performance = tracking_error_map();
    d.window = window;
    return d;
}

/// Data generated by a known ARMA law driven by a random excitation in r.
TrainingDataset synthetic(const Vec& theta, Eigen::Index window, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    TrainingDataset d;
    d.performance = tracking_error_map();
    d.window = window;
    std::deque<Vec> uh(static_cast<std::size_t>(window), v1(0)), zh(static_cast<std::size_t>(window), v1(0));
    for (std::size_t k = 0; k < n; ++k) {
        const double r = normal(rng);
        const Vec u = k < static_cast<std::size_t>(window) ? v1(normal(rng))
                                                           : Vec(build_regressor(uh, zh, window, 1, 1) * theta);
        d.u.push_back(u);
        d.y.push_back(v1(0));
        d.r.push_back(v1(r));
        uh.push_front(u);
        uh.pop_back();
        zh.push_front(v1(r));
        zh.pop_back();
    }
    return d;
}

}  // namespace

TEST_CASE("row construction") {
    const auto m = build_training_matrices(ramp_dataset(12, 10));
    REQUIRE(m.Phi.rows() == 2);
    CHECK(m.Phi.cols() == 20);
    CHECK(m.U == Eigen::Vector2d(10, 11));
    // Row for k = 10: u_9 ... u_0, then z_9 ... z_0.
    for (int j = 0; j < 10; ++j) {
        CHECK(m.Phi(0, j) == 9 - j);
        CHECK(m.Phi(0, 10 + j) == 109 - j);
        CHECK(m.Phi(1, j) == 10 - j);
    }
    CHECK(m.R_theta.isZero());
}

TEST_CASE("dataset guards") {
    CHECK_THROWS_AS(build_training_matrices(ramp_dataset(10, 10)), DatasetTooShort);
    auto d = ramp_dataset(20, 2);
    d.y.pop_back();
    CHECK_THROWS_AS(build_training_matrices(d), std::invalid_argument);
    CHECK_THROWS_AS(build_training_matrices(ramp_dataset(20, 2), Mat::Identity(3, 3)), std::invalid_argument);
}

TEST_CASE("normal equations agree with an orthogonal factorization") {
    const Vec theta = (Vec(6) << 0.3, -0.1, 0.05, 1.0, -0.5, 0.2).finished();
    const auto m = build_training_matrices(synthetic(theta, 3, 200, 5));
    Vec noisy = m.U;
    std::mt19937_64 rng(9);
    std::normal_distribution<double> normal(0, 0.1);
    for (Eigen::Index i = 0; i < noisy.size(); ++i) noisy(i) += normal(rng);
    const TrainingMatrices mn{m.Phi, noisy, m.R_theta};
    const Vec ls = train_arma(mn);
    const Vec qr = m.Phi.colPivHouseholderQr().solve(noisy);
    CHECK((ls - qr).norm() <= 1e-8 * (1 + qr.norm()));
}

TEST_CASE("exact data identifies the generating law") {
    const Vec theta = (Vec(6) << 0.3, -0.1, 0.05, 1.0, -0.5, 0.2).finished();
    const auto m = build_training_matrices(synthetic(theta, 3, 500, 1));
    CHECK((train_arma(m) - theta).cwiseAbs().maxCoeff() <= 1e-6);
    // Limits that never bind leave the solution unchanged.
    const Vec c = train_arma(m, SaturationLimits::symmetric(1e3));
    CHECK((c - theta).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("constrained fit keeps training predictions inside the limits") {
    const Vec theta = (Vec(6) << 0.3, -0.1, 0.05, 4.0, -2.0, 1.0).finished();
    const auto m = build_training_matrices(synthetic(theta, 3, 300, 3));
    const double bound = 0.5 * m.U.cwiseAbs().maxCoeff();
    const Vec c = train_arma(m, SaturationLimits::symmetric(bound));
    CHECK((m.Phi * c).cwiseAbs().maxCoeff() <= bound + 1e-6);
    CHECK((m.Phi * train_arma(m)).cwiseAbs().maxCoeff() > bound);
}

TEST_CASE("regularization shrinks the coefficients") {
    const Vec theta = (Vec(6) << 0.3, -0.1, 0.05, 1.0, -0.5, 0.2).finished();
    const auto d = synthetic(theta, 3, 200, 4);
    double previous = std::numeric_limits<double>::infinity();
    for (double lambda : {0.0, 1e-2, 1.0, 1e2, 1e4}) {
        const auto m = build_training_matrices(d, lambda * Mat::Identity(6, 6));
        const double norm = train_arma(m).norm();
        CHECK(norm <= previous + 1e-12);
        previous = norm;
    }
}

TEST_CASE("collinear regressors are reported") {
    // u is constant and z is constant: every column in a block is identical.
    TrainingDataset d;
    for (int k = 0; k < 30; ++k) {
        d.u.push_back(v1(1));
        d.y.push_back(v1(0));
        d.r.push_back(v1(2));
    }
    d.performance = tracking_error_map();
    d.window = 3;
    CHECK_THROWS_AS(train_arma(build_training_matrices(d)), RankDeficient);
}
