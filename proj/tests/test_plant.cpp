#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <numbers>

#include "doctest.h"
#include "farma/plant.hpp"

using namespace farma;
using std::numbers::pi;

namespace {

Vec vec(std::initializer_list<double> xs) {
    Vec v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

}  // namespace

TEST_CASE("saturate clamps componentwise") {
    const auto lim = SaturationLimits::symmetric(10);
    CHECK(saturate(vec({15}), lim)(0) == 10);
    CHECK(saturate(vec({-12}), lim)(0) == -10);
    CHECK(saturate(vec({3}), lim)(0) == 3);
    CHECK_THROWS(SaturationLimits(vec({1}), vec({0})));
}

TEST_CASE("wrap_pi lands in (-pi, pi]") {
    CHECK(wrap_pi(1.5 * pi) == doctest::Approx(-0.5 * pi));
    CHECK(wrap_pi(pi) == doctest::Approx(pi));
    CHECK(wrap_pi(-pi) == doctest::Approx(pi));
    CHECK(wrap_pi(0.0) == 0.0);
}

TEST_CASE("rk4 is exact on the double integrator") {
    const auto m = double_integrator_model();
    const Vec a = rk4_step(m, vec({0, 0}), vec({1}), 1.0);
    CHECK(a(0) == doctest::Approx(0.5));
    CHECK(a(1) == doctest::Approx(1.0));
    const Vec b = rk4_step(m, vec({1, 2}), vec({0}), 0.5);
    CHECK(b(0) == doctest::Approx(2.0));
    CHECK(b(1) == doctest::Approx(2.0));
}

TEST_CASE("double integrator model") {
    const auto m = double_integrator_model();
    CHECK(m.f(vec({0, 0}), vec({1})).isApprox(vec({0, 1})));
    CHECK(m.f(vec({1, 2}), vec({-3})).isApprox(vec({2, -3})));
    CHECK(m.h(vec({3, 4}))(0) == 3);
}

TEST_CASE("cart pendulum equilibria and gravity sign") {
    const auto m = cart_pendulum_model({});
    CHECK(m.f(vec({0, 0, 0, 0}), vec({0})).norm() == 0.0);
    CHECK(m.f(vec({0, 0, pi, 0}), vec({0})).norm() <= 1e-14);
    CHECK(m.f(vec({0, 0, 0.1, 0}), vec({0}))(3) > 0.0);
    const Vec hang = rk4_step(m, vec({0, 0, pi, 0}), vec({0}), 0.3);
    CHECK((hang - vec({0, 0, pi, 0})).norm() <= 1e-12);
    CHECK(m.h(vec({1, 2, 3, 4})).isApprox(vec({1, 3})));
}

TEST_CASE("closed loop bookkeeping") {
    const auto m = double_integrator_model();
    const auto lim = SaturationLimits::symmetric(10);
    const auto ref = constant_reference(vec({0}), vec({0, 0}));

    SUBCASE("zero controller keeps the equilibrium") {
        const StepController zero = [](std::size_t, const Vec&, const Vec&, const Vec&, const Vec&) { return vec({0}); };
        const auto tr = simulate_closed_loop(m, zero, lim, vec({0, 0}), ref, {0.01, 1.0, 10});
        CHECK(tr.size() == 101);
        for (const auto& r : tr.records) CHECK(r.y(0) == 0.0);
    }
    SUBCASE("requests beyond the limits are clamped before the plant") {
        const StepController push = [](std::size_t, const Vec&, const Vec&, const Vec&, const Vec&) { return vec({20}); };
        const auto tr = simulate_closed_loop(m, push, lim, vec({0, 0}), ref, {0.1, 1.0, 10});
        for (const auto& r : tr.records) {
            CHECK(r.u(0) == 10);
            CHECK(r.u_requested(0) == 20);
        }
        // x2(t) = 10 t under the clamped input.
        CHECK(tr.records.back().x(1) == doctest::Approx(10.0));
        CHECK(tr.records[3].t == doctest::Approx(0.3));
    }
    SUBCASE("controller failure keeps the partial log") {
        const StepController fail = [](std::size_t k, const Vec&, const Vec&, const Vec&, const Vec&) -> Vec {
            if (k == 5) throw std::runtime_error("boom");
            return vec({0});
        };
        try {
            simulate_closed_loop(m, fail, lim, vec({0, 0}), ref, {0.01, 1.0, 10});
            FAIL("expected SimulationAborted");
        } catch (const SimulationAborted& e) {
            CHECK(e.step() == 5);
            CHECK(e.partial().size() == 5);
        }
    }
}
