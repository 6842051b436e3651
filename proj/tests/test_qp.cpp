#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "oracles.hpp"

using namespace farma;

namespace {

Mat m1(double v) { return Mat::Constant(1, 1, v); }
Vec v1(double v) { return Vec::Constant(1, v); }

}  // namespace

TEST_CASE("unconstrained scalar minimizer") {
    const auto sol = solve_qp(QpProblem(m1(2), v1(-2)));
    CHECK(sol.status == QpStatus::Optimal);
    CHECK(sol.u_star(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sol.lambda.size() == 0);
}

TEST_CASE("bound cuts the unconstrained optimum") {
    const auto sol = solve_qp(QpProblem(m1(2), v1(-4), m1(1), v1(1)));
    REQUIRE(sol.status == QpStatus::Optimal);
    CHECK(sol.u_star(0) == doctest::Approx(1.0));
    CHECK(sol.lambda(0) == doctest::Approx(2.0));
    CHECK(sol.working_set == std::vector<Eigen::Index>{0});
}

TEST_CASE("single coupling constraint is symmetric") {
    Mat G(1, 2);
    G << 1, 1;
    const auto sol = solve_qp(QpProblem(2 * Mat::Identity(2, 2), Vec::Constant(2, -2), G, v1(1)));
    REQUIRE(sol.status == QpStatus::Optimal);
    CHECK(sol.u_star(0) == doctest::Approx(0.5));
    CHECK(sol.u_star(1) == doctest::Approx(0.5));
    CHECK(sol.kkt_residual <= 1e-10);
}

TEST_CASE("origin infeasible needs phase one") {
    // u >= 3 and u <= 5 written as -u <= -3, u <= 5.
    Mat G(2, 1);
    G << -1, 1;
    Vec nu(2);
    nu << -3, 5;
    const auto sol = solve_qp(QpProblem(m1(2), v1(0), G, nu));
    REQUIRE(sol.status == QpStatus::Optimal);
    CHECK(sol.u_star(0) == doctest::Approx(3.0));
    CHECK(sol.lambda(0) == doctest::Approx(6.0));
}

TEST_CASE("contradictory bounds are reported infeasible") {
    Mat G(2, 1);
    G << 1, -1;
    Vec nu(2);
    nu << 1, -2;  // u <= 1 and u >= 2
    const auto sol = solve_qp(QpProblem(m1(1), v1(0), G, nu));
    CHECK(sol.status == QpStatus::Infeasible);
}

TEST_CASE("semidefinite Hessian is regularized") {
    Mat H = Mat::Zero(2, 2);
    H(0, 0) = 2;
    Vec q(2);
    q << -2, 1;
    Mat G(2, 2);
    G << 0, 1, 0, -1;
    Vec nu(2);
    nu << 1, 1;  // |u2| <= 1, objective pushes u2 down
    const auto sol = solve_qp(QpProblem(H, q, G, nu));
    REQUIRE(sol.status == QpStatus::Optimal);
    CHECK(sol.u_star(0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(sol.u_star(1) == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("warm start at the solution terminates immediately") {
    std::mt19937_64 rng(7);
    const QpProblem p = testing::random_qp(rng, 6, 12);
    const auto cold = solve_qp(p);
    REQUIRE(cold.status == QpStatus::Optimal);
    QpWarmStart warm{cold.u_star, cold.working_set};
    const auto hot = solve_qp(p, {}, warm);
    CHECK(hot.status == QpStatus::Optimal);
    CHECK(hot.iterations <= 2);
    CHECK((hot.u_star - cold.u_star).norm() <= 1e-9);
}

TEST_CASE("iteration cap is honoured") {
    std::mt19937_64 rng(11);
    const QpProblem p = testing::random_qp(rng, 8, 16);
    const auto sol = solve_qp(p, QpOptions{1e-8, 1});
    CHECK((sol.status == QpStatus::MaxIterations || sol.status == QpStatus::Optimal));
    CHECK(sol.iterations <= 1);
}

TEST_CASE("random problems agree with active-set enumeration") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> dn(1, 8), dm(0, 14);
    for (int trial = 0; trial < 60; ++trial) {
        const QpProblem p = testing::random_qp(rng, dn(rng), dm(rng));
        const auto sol = solve_qp(p);
        REQUIRE(sol.status == QpStatus::Optimal);
        const auto ref = testing::brute_force_qp(p);
        REQUIRE(ref.has_value());
        CHECK(std::abs(p.objective(sol.u_star) - p.objective(*ref)) <= 1e-6 * (1.0 + std::abs(p.objective(*ref))));
        CHECK(sol.kkt_residual <= 1e-6);
    }
}

TEST_CASE("dimension mismatches are rejected") {
    CHECK_THROWS_AS(QpProblem(Mat::Identity(2, 2), Vec::Zero(3)), std::invalid_argument);
    CHECK_THROWS_AS(QpProblem(Mat::Identity(2, 2), Vec::Zero(2), Mat::Zero(3, 2), Vec::Zero(2)), std::invalid_argument);
}
