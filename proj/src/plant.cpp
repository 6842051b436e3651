#include "farma/plant.hpp"

#include <chrono>
#include <cmath>
#include <numbers>

namespace farma {

SaturationLimits::SaturationLimits(Vec lo, Vec hi) : u_min(std::move(lo)), u_max(std::move(hi)) {
    if (u_min.size() != u_max.size()) throw std::invalid_argument("SaturationLimits: dimension mismatch");
    if ((u_min.array() >= u_max.array()).any()) throw std::invalid_argument("SaturationLimits: need u_min < u_max");
}

SaturationLimits SaturationLimits::symmetric(double bound, Eigen::Index dim) {
    return {Vec::Constant(dim, -bound), Vec::Constant(dim, bound)};
}

Vec saturate(const Vec& u, const SaturationLimits& limits) {
    if (u.size() != limits.dim()) throw std::invalid_argument("saturate: dimension mismatch");
    return u.cwiseMax(limits.u_min).cwiseMin(limits.u_max);
}

double wrap_pi(double angle) {
    if (std::isnan(angle)) return angle;
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double w = std::remainder(angle, two_pi);  // [-pi, pi]
    if (w <= -std::numbers::pi) w += two_pi;
    return w;
}

Vec rk4_step(const PlantModel& model, const Vec& x, const Vec& u, double dt) {
    const Vec k1 = model.f(x, u);
    const Vec k2 = model.f(x + 0.5 * dt * k1, u);
    const Vec k3 = model.f(x + 0.5 * dt * k2, u);
    const Vec k4 = model.f(x + dt * k3, u);
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

PlantModel double_integrator_model() {
    PlantModel m;
    m.nx = 2;
    m.nu = 1;
    m.ny = 1;
    m.f = [](const Vec& x, const Vec& u) {
        Vec dx(2);
        dx << x(1), u(0);
        return dx;
    };
    m.h = [](const Vec& x) { return Vec::Constant(1, x(0)); };
    return m;
}

PlantModel cart_pendulum_model(const CartPendulumParams& params) {
    if (params.cart_mass <= 0 || params.pendulum_mass <= 0 || params.length <= 0 || params.gravity <= 0)
        throw std::invalid_argument("cart_pendulum_model: parameters must be positive");
    PlantModel model;
    model.nx = 4;
    model.nu = 1;
    model.ny = 2;
    model.f = [p = params](const Vec& x, const Vec& u) {
        const double M = p.cart_mass, m = p.pendulum_mass, l = p.length, g = p.gravity;
        const double phi = x(2), dphi = x(3), F = u(0);
        const double s = std::sin(phi), c = std::cos(phi), s2 = std::sin(2.0 * phi);
        const double ml = m * l;
        const double den = m * l * l * (m + M) / 3.0 - 0.25 * (ml * c) * (ml * c);
        Vec dx(4);
        dx(0) = x(1);
        dx(1) = (m * m * l * l * l * dphi * dphi * s / 6.0 - ml * ml * g * s2 / 8.0 + m * l * l * F / 3.0) / den;
        dx(2) = dphi;
        dx(3) = (0.5 * m * g * l * (m + M) * s - ml * ml * dphi * dphi * s2 / 8.0 - 0.5 * ml * c * F) / den;
        return dx;
    };
    model.h = [](const Vec& x) {
        Vec y(2);
        y << x(0), x(2);
        return y;
    };
    return model;
}

ReferenceProvider constant_reference(Vec r, Vec x_ref) {
    return [r = std::move(r), x_ref = std::move(x_ref)](std::size_t) { return ReferenceSample{r, x_ref}; };
}

ClosedLoopTrajectory simulate_closed_loop(const PlantModel& model, const StepController& controller,
                                          const SaturationLimits& limits, const Vec& x0,
                                          const ReferenceProvider& reference, const SimulationOptions& opts) {
    if (!(opts.Ts > 0.0)) throw std::invalid_argument("simulate_closed_loop: Ts must be positive");
    if (opts.substeps < 1) throw std::invalid_argument("simulate_closed_loop: substeps must be >= 1");
    if (x0.size() != model.nx) throw std::invalid_argument("simulate_closed_loop: x0 has wrong dimension");

    const auto steps = static_cast<std::size_t>(std::floor(opts.duration / opts.Ts + 0.5));
    const double dt = opts.Ts / opts.substeps;

    ClosedLoopTrajectory traj;
    traj.Ts = opts.Ts;
    traj.records.reserve(steps + 1);

    using Clock = std::chrono::steady_clock;
    Vec x = x0;
    for (std::size_t k = 0; k <= steps; ++k) {
        StepRecord rec;
        rec.t = static_cast<double>(k) * opts.Ts;
        const ReferenceSample ref = reference(k);
        rec.r = ref.r;
        rec.y = model.h(x);
        rec.x = x;

        const auto start = Clock::now();
        try {
            rec.u_requested = controller(k, rec.r, rec.y, x, ref.x_ref);
        } catch (const std::exception& e) {
            throw SimulationAborted(k, e.what(), std::move(traj));
        }
        rec.controller_seconds = std::chrono::duration<double>(Clock::now() - start).count();
        rec.u = saturate(rec.u_requested, limits);

        if (k < steps) {
            for (int s = 0; s < opts.substeps; ++s) x = rk4_step(model, x, rec.u, dt);
        }
        traj.records.push_back(std::move(rec));
    }
    return traj;
}

}  // namespace farma
