#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "farma/qp.hpp"

namespace farma {

/// Continuous-time plant x' = f(x, u), y = h(x).
struct PlantModel {
    std::function<Vec(const Vec& x, const Vec& u)> f;
    std::function<Vec(const Vec& x)> h;
    Eigen::Index nx = 0;
    Eigen::Index nu = 0;
    Eigen::Index ny = 0;
};

struct CartPendulumParams {
    double cart_mass = 1.0;       // M [kg]
    double pendulum_mass = 0.2;   // m [kg]
    double length = 0.4;          // ell [m]
    double gravity = 9.81;        // g [m/s^2]
};

struct SaturationLimits {
    Vec u_min;
    Vec u_max;

    SaturationLimits() = default;
    SaturationLimits(Vec lo, Vec hi);
    /// Symmetric scalar limits [-bound, bound].
    static SaturationLimits symmetric(double bound, Eigen::Index dim = 1);

    Eigen::Index dim() const { return u_min.size(); }
};

/// Componentwise clamp into [u_min, u_max].
Vec saturate(const Vec& u, const SaturationLimits& limits);

/// Wraps an angle into (-pi, pi].
double wrap_pi(double angle);

/// Classical RK4 step with u held constant.
Vec rk4_step(const PlantModel& model, const Vec& x, const Vec& u, double dt);

/// x = [x1, x2], x' = [x2, u], y = x1.
PlantModel double_integrator_model();

/// State [p, p', phi, phi'] with phi measured from upright; y = [p, phi].
PlantModel cart_pendulum_model(const CartPendulumParams& params);

struct StepRecord {
    double t = 0.0;
    Vec r;
    Vec y;
    Vec x;
    Vec u_requested;
    Vec u;
    double controller_seconds = 0.0;
};

struct ClosedLoopTrajectory {
    double Ts = 0.0;
    std::vector<StepRecord> records;

    std::size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }
};

struct ReferenceSample {
    Vec r;
    Vec x_ref;
};

/// Controller callback: (k, r_k, y_k, x_k, x_ref_k) -> requested input.
/// Output-feedback controllers simply ignore x_k and x_ref_k.
using StepController =
    std::function<Vec(std::size_t k, const Vec& r, const Vec& y, const Vec& x, const Vec& x_ref)>;
using ReferenceProvider = std::function<ReferenceSample(std::size_t k)>;

ReferenceProvider constant_reference(Vec r, Vec x_ref);

struct SimulationOptions {
    double Ts = 0.01;
    double duration = 1.0;
    int substeps = 10;
};

/// Raised when the controller throws mid-run; carries the records logged
/// before the failing step.
class SimulationAborted : public std::runtime_error {
public:
    SimulationAborted(std::size_t step, const std::string& what, ClosedLoopTrajectory partial)
        : std::runtime_error("closed-loop simulation aborted at step " + std::to_string(step) + ": " + what),
          step_(step),
          partial_(std::move(partial)) {}

    std::size_t step() const { return step_; }
    const ClosedLoopTrajectory& partial() const { return partial_; }

private:
    std::size_t step_;
    ClosedLoopTrajectory partial_;
};

/**
 * Sampled-data loop: y_k = h(x(k Ts)), u_k = sat(controller(...)), then
 * `substeps` RK4 steps of size Ts/substeps with u_k held. Produces
 * floor(duration/Ts + 1/2) + 1 records covering t = 0 ... duration.
 */
ClosedLoopTrajectory simulate_closed_loop(const PlantModel& model, const StepController& controller,
                                          const SaturationLimits& limits, const Vec& x0,
                                          const ReferenceProvider& reference, const SimulationOptions& opts);

}  // namespace farma
