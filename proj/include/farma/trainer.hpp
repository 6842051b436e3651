#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "farma/arma.hpp"
#include "farma/qp.hpp"

namespace farma {

/// Logged closed-loop samples used to fit one ARMA controller.
struct TrainingDataset {
    std::vector<Vec> u;
    std::vector<Vec> y;
    std::vector<Vec> r;
    PerformanceMap performance;
    Eigen::Index window = 1;

    std::size_t size() const { return u.size(); }
};

struct TrainingMatrices {
    Mat Phi;
    Vec U;
    Mat R_theta;
};

class DatasetTooShort : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class RankDeficient : public std::runtime_error {
public:
    RankDeficient(Eigen::Index rank, Eigen::Index dim);
    Eigen::Index rank() const { return rank_; }
    Eigen::Index dim() const { return dim_; }

private:
    Eigen::Index rank_;
    Eigen::Index dim_;
};

/**
 * Stacks one regressor row block per k = window ... n-1 together with the
 * logged input u_k. Inputs are used exactly as logged (already saturated);
 * z_k = Z(r_k, y_k). R_theta defaults to zero.
 */
TrainingMatrices build_training_matrices(const TrainingDataset& data, std::optional<Mat> R_theta = std::nullopt);

/**
 * Minimizes |Phi theta - U|^2 + theta' R theta. Without limits the
 * regularized normal equations are solved by Cholesky; with limits the
 * QP with H = 2 Phi'Phi + 2R, q = -2 Phi'U and rows [Phi; -Phi] theta <=
 * [1 (x) u_max; -1 (x) u_min] goes to solve_qp.
 */
Vec train_arma(const TrainingMatrices& mats, const std::optional<SaturationLimits>& limits = std::nullopt,
               const QpOptions& qp_options = {});

}  // namespace farma
