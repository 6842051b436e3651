#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <numbers>

#include "doctest.h"
#include "farma/fuzzy.hpp"

using namespace farma;
using std::numbers::pi;

namespace {

Vec vec(std::initializer_list<double> xs) {
    Vec v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

ArmaController scalar_arma(Vec theta, Eigen::Index window, double limit = 10) {
    return ArmaController(std::move(theta), window, 1, 1, SaturationLimits::symmetric(limit), tracking_error_map());
}

}  // namespace

TEST_CASE("regressor layout") {
    SUBCASE("single input, single output") {
        const std::deque<Vec> u{vec({1}), vec({2})};
        const std::deque<Vec> z{vec({3}), vec({4})};
        const Mat phi = build_regressor(u, z, 2, 1, 1);
        CHECK(phi.rows() == 1);
        CHECK(phi.row(0).transpose() == vec({1, 2, 3, 4}));
    }
    SUBCASE("two inputs use a Kronecker block") {
        const std::deque<Vec> u{vec({1, 2})};
        const std::deque<Vec> z{vec({3})};
        const Mat phi = build_regressor(u, z, 1, 2, 1);
        Mat expected = Mat::Zero(2, 6);
        expected.row(0).head(3) << 1, 2, 3;
        expected.row(1).tail(3) << 1, 2, 3;
        CHECK(phi == expected);
    }
    CHECK(theta_length(10, 1, 1) == 20);
    CHECK(theta_length(30, 1, 2) == 90);
    CHECK_THROWS(build_regressor({vec({1})}, {vec({1})}, 2, 1, 1));
}

TEST_CASE("performance maps") {
    CHECK(tracking_error_map()(vec({2}), vec({0.5})) == vec({1.5}));
    const Vec sw = pendulum_swingup_map()(vec({0, 0}), vec({0.3, pi}));
    CHECK(sw(0) == doctest::Approx(-0.3));
    CHECK(std::abs(sw(1)) <= 1e-15);
    const Vec up = pendulum_upright_map()(vec({0, 0}), vec({0, 2 * pi - 0.1}));
    CHECK(up(1) == doctest::Approx(0.1));
    CHECK_THROWS(performance_map_by_name("nope"));
}

TEST_CASE("ARMA gating and recursion") {
    // theta picks u_{k-1}: output is the previous (saturated) request.
    Vec theta = Vec::Zero(4);
    theta(0) = 1;
    auto arma = scalar_arma(theta, 2);
    CHECK(arma.step(vec({0}), vec({0}))(0) == 0.0);  // k = 0 gated
    CHECK(arma.step(vec({0}), vec({0}))(0) == 0.0);  // k = 1 gated
    CHECK(arma.step(vec({0}), vec({0}))(0) == 0.0);

    // theta picks z_{k-1} = r - y of the previous sample.
    Vec tz = Vec::Zero(4);
    tz(2) = 1;
    auto pz = scalar_arma(tz, 2);
    pz.step(vec({5}), vec({0}));
    CHECK(pz.peek()(0) == 0.0);  // still inside the gate
    CHECK(pz.step(vec({2}), vec({1}))(0) == 0.0);
    CHECK(pz.steps() == 2);
    CHECK(pz.peek()(0) == doctest::Approx(1.0));
    CHECK(pz.step(vec({0}), vec({0}))(0) == doctest::Approx(1.0));

    // A request beyond the limits is returned raw but stored saturated.
    Vec amp = Vec::Zero(4);
    amp(2) = 100;
    amp(0) = 1;
    auto big = scalar_arma(amp, 2);
    big.step(vec({1}), vec({0}));
    big.step(vec({1}), vec({0}));
    CHECK(big.step(vec({0}), vec({0}))(0) == doctest::Approx(100.0));
    CHECK(big.regressor_row()(0) == doctest::Approx(10.0));

    big.reset();
    CHECK(big.steps() == 0);
    CHECK(big.regressor_row().isZero());
    CHECK_THROWS(scalar_arma(Vec::Zero(3), 2));
}

TEST_CASE("membership functions") {
    const auto up = MembershipFunction::ramp_up(0.4, 0.6);
    const auto down = MembershipFunction::ramp_down(0.4, 0.6);
    CHECK(up(0.5) == doctest::Approx(0.5));
    CHECK(up(0.3) == 0.0);
    CHECK(up(0.7) == 1.0);
    CHECK(down(0.45) == doctest::Approx(0.75));
    CHECK(up(0.55) + down(0.55) == doctest::Approx(1.0));

    const auto a = MembershipFunction::ramp_up(pi / 3 - pi / 30, pi / 3 + pi / 30);
    CHECK(a(pi / 3) == doctest::Approx(0.5));
    CHECK_THROWS(MembershipFunction::ramp_up(1, 1));
}

TEST_CASE("rule weights and blending") {
    std::vector<FuzzyRule> rules{{{MembershipFunction::ramp_up(0.4, 0.6)}, 0},
                                 {{MembershipFunction::ramp_down(0.4, 0.6)}, 1}};
    CHECK(rule_weights(rules, vec({0.5})).isApprox(vec({0.5, 0.5})));
    CHECK(rule_weights(rules, vec({0.9})).isApprox(vec({1, 0})));

    std::vector<FuzzyRule> product{{{MembershipFunction::ramp_up(0, 1), MembershipFunction::ramp_up(0, 2)}, 0}};
    CHECK(rule_weights(product, vec({0.5, 1}))(0) == doctest::Approx(0.25));

    const std::vector<Vec> outs{vec({2}), vec({6})};
    CHECK(blend(outs, vec({1, 0}))(0) == doctest::Approx(2));
    CHECK(blend(outs, vec({0.25, 0.75}))(0) == doctest::Approx(5));
    CHECK(blend(outs, vec({0, 0}))(0) == doctest::Approx(4));
}

TEST_CASE("F-ARMA saturates members before blending") {
    Vec t1 = Vec::Zero(2);
    t1(1) = 50;  // 50 * z_{k-1}
    Vec t2 = Vec::Zero(2);
    t2(1) = 1;
    std::vector<ArmaController> members{scalar_arma(t1, 1), scalar_arma(t2, 1)};
    std::vector<FuzzyRule> rules{{{MembershipFunction::ramp_up(0.4, 0.6)}, 0},
                                 {{MembershipFunction::ramp_down(0.4, 0.6)}, 1}};
    FarmaController f(std::move(members), std::move(rules), abs_tracking_error_decision(),
                      SaturationLimits::symmetric(10));
    CHECK(f.step(vec({1}), vec({0}))(0) == 0.0);
    // z_{k-1} = 1; members give 50 -> 10 and 1; gamma = |0.5 - 0| = 0.5.
    const Vec u = f.step(vec({0.5}), vec({0}));
    CHECK(u(0) == doctest::Approx(5.5));
    CHECK(f.last_weights().isApprox(vec({0.5, 0.5})));
}

TEST_CASE("decision maps") {
    CHECK(abs_tracking_error_decision()(vec({2}), vec({2.5}))(0) == doctest::Approx(0.5));
    CHECK(abs_wrapped_angle_decision(1)(vec({0, 0}), vec({0, 2 * pi - 0.2}))(0) == doctest::Approx(0.2));
}
