#include "farma/trainer.hpp"

#include <cmath>
#include <string>

#include "farma/linear_mpc.hpp"

namespace farma {

RankDeficient::RankDeficient(Eigen::Index rank, Eigen::Index dim)
    : std::runtime_error("train_arma: normal equations are singular (regressor rank " + std::to_string(rank) +
                         " < " + std::to_string(dim) + " coefficients)"),
      rank_(rank),
      dim_(dim) {}

TrainingMatrices build_training_matrices(const TrainingDataset& data, std::optional<Mat> R_theta) {
    const std::size_t n = data.size();
    if (data.y.size() != n || data.r.size() != n) throw std::invalid_argument("build_training_matrices: sequence lengths differ");
    if (data.window < 1) throw std::invalid_argument("build_training_matrices: window must be >= 1");
    const auto w = static_cast<std::size_t>(data.window);
    if (n <= w)
        throw DatasetTooShort("build_training_matrices: " + std::to_string(n) + " samples do not exceed window " +
                              std::to_string(w));

    const Eigen::Index nu = data.u.front().size();
    const Eigen::Index ny = data.y.front().size();
    const Eigen::Index ntheta = theta_length(data.window, nu, ny);
    const auto rows = static_cast<Eigen::Index>(n - w);

    std::vector<Vec> z(n);
    for (std::size_t k = 0; k < n; ++k) z[k] = data.performance(data.r[k], data.y[k]);

    TrainingMatrices m;
    m.Phi.resize(rows * nu, ntheta);
    m.U.resize(rows * nu);
    std::deque<Vec> u_hist, z_hist;  // newest first
    for (std::size_t j = 1; j <= w; ++j) {
        u_hist.push_back(data.u[w - j]);
        z_hist.push_back(z[w - j]);
    }
    for (std::size_t k = w; k < n; ++k) {
        const auto row = static_cast<Eigen::Index>(k - w);
        m.Phi.middleRows(row * nu, nu) = build_regressor(u_hist, z_hist, data.window, nu, ny);
        m.U.segment(row * nu, nu) = data.u[k];
        u_hist.push_front(data.u[k]);
        u_hist.pop_back();
        z_hist.push_front(z[k]);
        z_hist.pop_back();
    }

    if (R_theta) {
        if (R_theta->rows() != ntheta || R_theta->cols() != ntheta)
            throw std::invalid_argument("build_training_matrices: R_theta must be l_theta x l_theta");
        m.R_theta = 0.5 * (*R_theta + R_theta->transpose());
    } else {
        m.R_theta = Mat::Zero(ntheta, ntheta);
    }
    return m;
}

Vec train_arma(const TrainingMatrices& mats, const std::optional<SaturationLimits>& limits, const QpOptions& qp_options) {
    const Eigen::Index ntheta = mats.Phi.cols();
    if (mats.Phi.rows() == 0 || mats.Phi.isZero(0.0)) throw std::invalid_argument("train_arma: empty regressor matrix");

    const Mat normal = mats.Phi.transpose() * mats.Phi + mats.R_theta;
    const Vec rhs = mats.Phi.transpose() * mats.U;

    if (!limits) {
        Eigen::LLT<Mat> llt(normal);
        const bool singular_pivot = llt.info() != Eigen::Success ||
                                    llt.matrixLLT().diagonal().minCoeff() <= 1e-14 * std::sqrt(normal.diagonal().maxCoeff());
        if (singular_pivot) {
            Eigen::ColPivHouseholderQR<Mat> qr(mats.Phi);
            throw RankDeficient(qr.rank(), ntheta);
        }
        return llt.solve(rhs);
    }

    const Eigen::Index nu = limits->dim();
    const Eigen::Index blocks = mats.Phi.rows() / nu;
    Mat Gamma(2 * mats.Phi.rows(), ntheta);
    Gamma << mats.Phi, -mats.Phi;
    Vec bounds(2 * mats.Phi.rows());
    bounds << limits->u_max.replicate(blocks, 1), -limits->u_min.replicate(blocks, 1);

    const QpProblem qp(2.0 * normal, -2.0 * rhs, std::move(Gamma), std::move(bounds));
    QpSolution sol = solve_qp(qp, qp_options);
    if (sol.status != QpStatus::Optimal) throw QpFailure("train_arma", std::move(sol));
    return sol.u_star;
}

}  // namespace farma
