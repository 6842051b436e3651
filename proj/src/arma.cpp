#include "farma/arma.hpp"

#include <cstring>
#include <numbers>
#include <stdexcept>

namespace farma {

PerformanceMap tracking_error_map() {
    return [](const Vec& r, const Vec& y) -> Vec { return r - y; };
}

PerformanceMap pendulum_swingup_map() {
    return [](const Vec&, const Vec& y) -> Vec {
        Vec z(2);
        z << -y(0), wrap_pi(std::numbers::pi - y(1));
        return z;
    };
}

PerformanceMap pendulum_upright_map() {
    return [](const Vec&, const Vec& y) -> Vec {
        Vec z(2);
        z << -y(0), wrap_pi(-y(1));
        return z;
    };
}

PerformanceMap performance_map_by_name(const std::string& name) {
    if (name == "tracking_error") return tracking_error_map();
    if (name == "pendulum_swingup") return pendulum_swingup_map();
    if (name == "pendulum_upright") return pendulum_upright_map();
    throw std::invalid_argument("unknown performance map '" + name + "'");
}

Mat build_regressor(const std::deque<Vec>& u_hist, const std::deque<Vec>& z_hist, Eigen::Index window,
                    Eigen::Index nu, Eigen::Index ny) {
    const auto w = static_cast<std::size_t>(window);
    if (u_hist.size() < w || z_hist.size() < w) throw std::invalid_argument("build_regressor: history shorter than window");

    const Eigen::Index row_len = window * (nu + ny);
    Vec row(row_len);
    for (Eigen::Index j = 0; j < window; ++j) {
        row.segment(j * nu, nu) = u_hist[static_cast<std::size_t>(j)];
        row.segment(window * nu + j * ny, ny) = z_hist[static_cast<std::size_t>(j)];
    }
    Mat phi = Mat::Zero(nu, nu * row_len);
    for (Eigen::Index i = 0; i < nu; ++i) phi.block(i, i * row_len, 1, row_len) = row.transpose();
    return phi;
}

ArmaController::ArmaController(Vec theta, Eigen::Index window, Eigen::Index nu, Eigen::Index ny,
                               SaturationLimits limits, PerformanceMap performance)
    : theta_(std::move(theta)),
      window_(window),
      nu_(nu),
      ny_(ny),
      limits_(std::move(limits)),
      performance_(std::move(performance)) {
    if (window_ < 1) throw std::invalid_argument("ArmaController: window must be >= 1");
    if (theta_.size() != theta_length(window_, nu_, ny_))
        throw std::invalid_argument("ArmaController: theta length must be window*nu*(ny+nu)");
    if (limits_.dim() != nu_) throw std::invalid_argument("ArmaController: limits dimension mismatch");
    reset();
}

void ArmaController::reset() {
    row_ = Vec::Zero(window_ * (nu_ + ny_));
    k_ = 0;
}

Vec ArmaController::peek() const {
    Vec u = Vec::Zero(nu_);
    if (k_ < static_cast<std::size_t>(window_)) return u;
    const Eigen::Index len = row_.size();
    for (Eigen::Index i = 0; i < nu_; ++i) u(i) = row_.dot(theta_.segment(i * len, len));
    return u;
}

Vec ArmaController::step(const Vec& r, const Vec& y) {
    const Vec u_r = peek();
    const Eigen::Index nu_block = window_ * nu_;
    const Eigen::Index nz_block = window_ * ny_;
    // Age both histories by one sample (newest first) and insert the new entries.
    double* data = row_.data();
    std::memmove(data + nu_, data, sizeof(double) * static_cast<std::size_t>(nu_block - nu_));
    std::memmove(data + nu_block + ny_, data + nu_block, sizeof(double) * static_cast<std::size_t>(nz_block - ny_));
    row_.head(nu_) = saturate(u_r, limits_);
    row_.segment(nu_block, ny_) = performance_(r, y);
    ++k_;
    return u_r;
}

}  // namespace farma
