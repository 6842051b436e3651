#pragma once

#include <deque>
#include <functional>
#include <string>

#include "farma/plant.hpp"

namespace farma {

/// Performance variable z = Z(r, y), same dimension as y.
using PerformanceMap = std::function<Vec(const Vec& r, const Vec& y)>;

/// z = r - y
PerformanceMap tracking_error_map();
/// z = [-p; wrap_pi(pi - phi)] for y = [p, phi]
PerformanceMap pendulum_swingup_map();
/// z = [-p; wrap_pi(-phi)] for y = [p, phi]
PerformanceMap pendulum_upright_map();

/// Resolve a performance map by name ("tracking_error", "pendulum_swingup",
/// "pendulum_upright").
PerformanceMap performance_map_by_name(const std::string& name);

inline Eigen::Index theta_length(Eigen::Index window, Eigen::Index nu, Eigen::Index ny) {
    return window * nu * (ny + nu);
}

/**
 * Regressor I_nu (x) [u_{k-1}' ... u_{k-w}' z_{k-1}' ... z_{k-w}'].
 * Both histories are newest-first and must hold at least `window` entries.
 */
Mat build_regressor(const std::deque<Vec>& u_hist, const std::deque<Vec>& z_hist, Eigen::Index window,
                    Eigen::Index nu, Eigen::Index ny);

/**
 * Fixed-window ARMA control law
 *
 *     u_r,k = 0                 for k < window
 *     u_r,k = phi_k theta       otherwise
 *
 * The input history holds sat(u_r) of this controller's own requests, not
 * the input that ends up being applied to the plant.
 */
class ArmaController {
public:
    ArmaController(Vec theta, Eigen::Index window, Eigen::Index nu, Eigen::Index ny, SaturationLimits limits,
                   PerformanceMap performance);

    /// One call per plant sample. Returns the unsaturated request.
    Vec step(const Vec& r, const Vec& y);

    /// phi_k theta from the current histories, gated to zero before `window`
    /// steps; does not advance the controller.
    Vec peek() const;

    void reset();

    const Vec& theta() const { return theta_; }
    Eigen::Index window() const { return window_; }
    Eigen::Index nu() const { return nu_; }
    Eigen::Index ny() const { return ny_; }
    std::size_t steps() const { return k_; }
    const SaturationLimits& limits() const { return limits_; }
    /// Regressor row [u_{k-1} ... u_{k-w}, z_{k-1} ... z_{k-w}].
    const Vec& regressor_row() const { return row_; }

private:
    Vec theta_;
    Eigen::Index window_;
    Eigen::Index nu_;
    Eigen::Index ny_;
    SaturationLimits limits_;
    PerformanceMap performance_;
    Vec row_;
    std::size_t k_ = 0;
};

inline Vec compute_performance(const PerformanceMap& Z, const Vec& r, const Vec& y) { return Z(r, y); }

}  // namespace farma
