#include "farma/linear_mpc.hpp"

#include <chrono>

namespace farma {

namespace {

bool is_symmetric(const Mat& M) { return (M - M.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, M.cwiseAbs().maxCoeff()); }

bool is_psd(const Mat& M) {
    Eigen::SelfAdjointEigenSolver<Mat> es(M, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() >= -1e-12 * std::max(1.0, M.cwiseAbs().maxCoeff());
}

}  // namespace

void LinearMpcConfig::validate() const {
    const auto nx = A.rows();
    const auto nu = B.cols();
    if (A.cols() != nx || B.rows() != nx) throw std::invalid_argument("LinearMpcConfig: A/B dimension mismatch");
    if (C.size() != 0 && C.cols() != nx) throw std::invalid_argument("LinearMpcConfig: C dimension mismatch");
    if (horizon < 1) throw std::invalid_argument("LinearMpcConfig: horizon must be >= 1");
    if (Q.rows() != nx || Q.cols() != nx || Qf.rows() != nx || Qf.cols() != nx)
        throw std::invalid_argument("LinearMpcConfig: Q/Qf must be nx x nx");
    if (R.rows() != nu || R.cols() != nu) throw std::invalid_argument("LinearMpcConfig: R must be nu x nu");
    if (limits.dim() != nu) throw std::invalid_argument("LinearMpcConfig: limits dimension mismatch");
    if (!is_symmetric(Q) || !is_psd(Q)) throw std::invalid_argument("LinearMpcConfig: Q must be symmetric PSD");
    if (!is_symmetric(Qf) || !is_psd(Qf)) throw std::invalid_argument("LinearMpcConfig: Qf must be symmetric PSD");
    if (!is_symmetric(R) || Eigen::LLT<Mat>(R).info() != Eigen::Success)
        throw std::invalid_argument("LinearMpcConfig: R must be symmetric positive definite");
}

PredictionMatrices build_prediction_matrices(const Mat& A, const Mat& B, int horizon) {
    if (horizon < 1) throw std::invalid_argument("build_prediction_matrices: horizon must be >= 1");
    const auto nx = A.rows();
    const auto nu = B.cols();
    const Eigen::Index h = horizon;
    PredictionMatrices pm;
    pm.Gamma_u = Mat::Zero(h * nx, h * nu);
    pm.Gamma_x.resize(h * nx, nx);

    // powers[i] = A^i B, i = 0 ... h-1
    std::vector<Mat> powers(static_cast<std::size_t>(h));
    powers[0] = B;
    for (Eigen::Index i = 1; i < h; ++i) powers[static_cast<std::size_t>(i)] = A * powers[static_cast<std::size_t>(i - 1)];

    Mat Ap = A;
    for (Eigen::Index i = 0; i < h; ++i) {
        pm.Gamma_x.middleRows(i * nx, nx) = Ap;
        Ap = A * Ap;
        for (Eigen::Index j = 0; j <= i; ++j)
            pm.Gamma_u.block(i * nx, j * nu, nx, nu) = powers[static_cast<std::size_t>(i - j)];
    }
    return pm;
}

QpProblem build_condensed_qp(const LinearMpcConfig& config, const Vec& x_k, const Vec& x_ref) {
    const auto nx = config.A.rows();
    const auto nu = config.B.cols();
    const Eigen::Index h = config.horizon;
    const PredictionMatrices pm = build_prediction_matrices(config.A, config.B, config.horizon);

    // Q_mpc = blkdiag(Q, ..., Q, Qf); applied blockwise rather than formed.
    Mat QGu(h * nx, h * nu);
    for (Eigen::Index i = 0; i < h; ++i) {
        const Mat& W = (i == h - 1) ? config.Qf : config.Q;
        QGu.middleRows(i * nx, nx) = W * pm.Gamma_u.middleRows(i * nx, nx);
    }
    Mat H = 2.0 * pm.Gamma_u.transpose() * QGu;
    for (Eigen::Index i = 0; i < h; ++i) H.block(i * nu, i * nu, nu, nu) += config.R;

    const Vec tracking = x_ref.replicate(h, 1) - pm.Gamma_x * x_k;
    const Vec q = -2.0 * QGu.transpose() * tracking;

    Mat Gamma(2 * h * nu, h * nu);
    Gamma << Mat::Identity(h * nu, h * nu), -Mat::Identity(h * nu, h * nu);
    Vec nu_vec(2 * h * nu);
    nu_vec << config.limits.u_max.replicate(h, 1), -config.limits.u_min.replicate(h, 1);
    return {std::move(H), q, std::move(Gamma), std::move(nu_vec)};
}

Vec shift_blocks(const Vec& stacked, Eigen::Index block) {
    const auto n = stacked.size();
    if (n < block || block <= 0) return stacked;
    Vec out(n);
    out.head(n - block) = stacked.tail(n - block);
    out.tail(block) = stacked.tail(block);
    return out;
}

MpcStepResult lmpc_step(const LinearMpcConfig& config, const Vec& x_k, const Vec& x_ref, const QpSolution* warm,
                        const QpOptions& qp_options) {
    using Clock = std::chrono::steady_clock;
    const auto start = Clock::now();
    const auto nu = config.B.cols();
    const QpProblem qp = build_condensed_qp(config, x_k, x_ref);

    QpWarmStart ws;
    if (warm != nullptr && warm->u_star.size() == qp.num_vars()) ws.u = shift_blocks(warm->u_star, nu);

    MpcStepResult res;
    res.solution = solve_qp(qp, qp_options, ws);
    res.solve_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    if (res.solution.status != QpStatus::Optimal) throw QpFailure("lmpc_step", res.solution);
    res.u = res.solution.u_star.head(nu);
    return res;
}

LinearMpcController::LinearMpcController(LinearMpcConfig config, QpOptions qp_options)
    : config_(std::move(config)), qp_options_(qp_options) {
    config_.validate();
}

Vec LinearMpcController::step(const Vec& x_k, const Vec& x_ref) {
    MpcStepResult res = lmpc_step(config_, x_k, x_ref, last_ ? &*last_ : nullptr, qp_options_);
    last_ = std::move(res.solution);
    return res.u;
}

}  // namespace farma
