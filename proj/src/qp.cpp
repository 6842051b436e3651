#include "farma/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace farma {

namespace {

constexpr double kRegularizationScale = 1e-10;
// Proximal weight of the phase-1 problem. Rounding in the whitened space grows
// like eps / weight, so it cannot be tiny; it only has to stay small against
// the unit price on the slack.
constexpr double kPhaseOneWeight = 1e-6;

double inf_norm(const Vec& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

// Cholesky factor of H, falling back to H + eps*I with eps = 1e-10*tr(H)/n
// (grown tenfold until the factorization succeeds).
Eigen::LLT<Mat> factorize(const Mat& H) {
    Eigen::LLT<Mat> llt(H);
    if (llt.info() == Eigen::Success) return llt;

    const auto n = H.rows();
    double eps = kRegularizationScale * std::max(H.trace() / static_cast<double>(n), 1.0);
    for (int attempt = 0; attempt < 20; ++attempt, eps *= 10.0) {
        llt.compute(H + eps * Mat::Identity(n, n));
        if (llt.info() == Eigen::Success) return llt;
    }
    throw std::runtime_error("solve_qp: Hessian is not positive semidefinite");
}

class ActiveSetSolver {
public:
    ActiveSetSolver(const QpProblem& p, const QpOptions& opts)
        : prob_(p),
          n_(p.num_vars()),
          m_(p.num_constraints()),
          tol_(opts.tol),
          max_iter_(opts.max_iter > 0 ? opts.max_iter : 50 * static_cast<int>(n_ + m_)),
          llt_(factorize(p.H())) {
        // Whitened constraint normals L^{-1} a_j, one column per constraint.
        if (m_ > 0) whitened_ = llt_.matrixL().solve(p.Gamma().transpose());
        scale_ = std::max({1.0, inf_norm(p.q()), inf_norm(p.nu())});
    }

    QpSolution run(Vec x, const std::vector<Eigen::Index>& initial_set) {
        QpSolution sol;
        in_set_.assign(static_cast<std::size_t>(m_), false);
        working_.clear();
        for (auto j : initial_set) {
            if (j < 0 || j >= m_ || in_set_[static_cast<std::size_t>(j)]) continue;
            const double slack = prob_.nu()(j) - prob_.Gamma().row(j).dot(x);
            if (std::abs(slack) > feasibility_tol()) continue;
            if (!try_add(j)) continue;
        }

        Vec lambda_ws;
        // After an unblocked step x minimizes the model on the current
        // working set, so the next step is zero up to rounding.
        bool at_subspace_min = false;
        for (int it = 0; it < max_iter_; ++it) {
            sol.iterations = it + 1;
            const Vec g = prob_.H() * x + prob_.q();
            Vec p = equality_step(g, lambda_ws);

            const double step_floor = 1e-13 * (1.0 + inf_norm(x));
            if (at_subspace_min || inf_norm(p) <= step_floor) {
                at_subspace_min = false;
                const double dual_tol = tol_ * std::max(scale_, inf_norm(prob_.H() * x));
                Eigen::Index leave = -1;
                double most_negative = -dual_tol;
                for (Eigen::Index k = 0; k < lambda_ws.size(); ++k) {
                    if (lambda_ws(k) < most_negative) {
                        most_negative = lambda_ws(k);
                        leave = k;
                    }
                }
                if (leave < 0) {
                    finish(sol, x, lambda_ws, QpStatus::Optimal);
                    return sol;
                }
                remove_at(leave);
                continue;
            }

            double alpha = 1.0;
            Eigen::Index blocking = -1;
            if (m_ > 0) {
                const Vec Gp = prob_.Gamma() * p;
                const Vec slack = prob_.nu() - prob_.Gamma() * x;
                for (Eigen::Index j = 0; j < m_; ++j) {
                    if (in_set_[static_cast<std::size_t>(j)]) continue;
                    const double row_scale = prob_.Gamma().row(j).lpNorm<Eigen::Infinity>();
                    if (Gp(j) <= 1e-14 * row_scale * inf_norm(p)) continue;
                    const double ratio = std::max(slack(j), 0.0) / Gp(j);
                    if (ratio < alpha) {
                        alpha = ratio;
                        blocking = j;
                    }
                }
            }
            x += alpha * p;
            at_subspace_min = blocking < 0;
            if (blocking >= 0 && !try_add(blocking)) {
                // Numerically dependent on the working set; it stays satisfied
                // along directions in the null space of the working set.
                in_set_[static_cast<std::size_t>(blocking)] = false;
            }
        }
        const Vec g = prob_.H() * x + prob_.q();
        equality_step(g, lambda_ws);
        finish(sol, x, lambda_ws, QpStatus::MaxIterations);
        return sol;
    }

    double feasibility_tol() const { return tol_ * std::max(1.0, inf_norm(prob_.nu())); }

private:
    // Minimizer of the quadratic model restricted to A_W p = 0. With H = L L',
    // w = L^{-1} g and V = L^{-1} A_W', lambda solves min |w + V lambda| and
    // p = -L^{-T} (w + V lambda).
    Vec equality_step(const Vec& g, Vec& lambda_ws) {
        Vec w = llt_.matrixL().solve(g);
        if (working_.empty()) {
            lambda_ws.resize(0);
        } else {
            Mat V(n_, static_cast<Eigen::Index>(working_.size()));
            for (std::size_t k = 0; k < working_.size(); ++k) V.col(static_cast<Eigen::Index>(k)) = whitened_.col(working_[k]);
            Eigen::ColPivHouseholderQR<Mat> qr(V);
            lambda_ws = qr.solve(-w);
            w += V * lambda_ws;
        }
        return -llt_.matrixU().solve(w);
    }

    bool try_add(Eigen::Index j) {
        Mat V(n_, static_cast<Eigen::Index>(working_.size()) + 1);
        for (std::size_t k = 0; k < working_.size(); ++k) V.col(static_cast<Eigen::Index>(k)) = whitened_.col(working_[k]);
        V.col(V.cols() - 1) = whitened_.col(j);
        Eigen::ColPivHouseholderQR<Mat> qr(V);
        qr.setThreshold(1e-12);
        if (qr.rank() < V.cols()) return false;
        // Keep the working set sorted so multipliers map to ascending indices.
        working_.insert(std::upper_bound(working_.begin(), working_.end(), j), j);
        in_set_[static_cast<std::size_t>(j)] = true;
        return true;
    }

    void remove_at(Eigen::Index k) {
        in_set_[static_cast<std::size_t>(working_[static_cast<std::size_t>(k)])] = false;
        working_.erase(working_.begin() + k);
    }

    void finish(QpSolution& sol, const Vec& x, const Vec& lambda_ws, QpStatus status) {
        sol.u_star = x;
        sol.lambda = Vec::Zero(m_);
        for (std::size_t k = 0; k < working_.size(); ++k) sol.lambda(working_[k]) = lambda_ws(static_cast<Eigen::Index>(k));
        sol.status = status;
        sol.working_set = working_;
        sol.kkt_residual = kkt_residual(prob_, sol.u_star, sol.lambda);
    }

    const QpProblem& prob_;
    Eigen::Index n_;
    Eigen::Index m_;
    double tol_;
    int max_iter_;
    Eigen::LLT<Mat> llt_;
    Mat whitened_;
    double scale_ = 1.0;
    std::vector<Eigen::Index> working_;
    std::vector<bool> in_set_;
};

bool is_feasible(const QpProblem& p, const Vec& x, double tol) {
    if (p.num_constraints() == 0) return true;
    return (p.Gamma() * x - p.nu()).maxCoeff() <= tol;
}

// Phase 1: min 1/2 d(|u|^2 + s^2) + s  s.t. Gamma u - s <= nu, s >= 0, which
// is feasible at (0, max(0, -min nu)). The problem is declared infeasible
// when the recovered u still violates a constraint.
std::optional<Vec> find_feasible_point(const QpProblem& p, const QpOptions& opts) {
    const auto n = p.num_vars();
    const auto m = p.num_constraints();
    Mat H = kPhaseOneWeight * Mat::Identity(n + 1, n + 1);
    Vec q = Vec::Zero(n + 1);
    q(n) = 1.0;
    Mat G = Mat::Zero(m + 1, n + 1);
    G.topLeftCorner(m, n) = p.Gamma();
    G.col(n).head(m).setConstant(-1.0);
    G(m, n) = -1.0;
    Vec nu(m + 1);
    nu.head(m) = p.nu();
    nu(m) = 0.0;
    QpProblem aux(std::move(H), std::move(q), std::move(G), std::move(nu));

    Vec start = Vec::Zero(n + 1);
    start(n) = std::max(0.0, (-p.nu()).maxCoeff());
    ActiveSetSolver solver(aux, QpOptions{opts.tol, 50 * static_cast<int>(n + m + 2)});
    QpSolution s = solver.run(start, {});
    Vec u = s.u_star.head(n);
    if (!is_feasible(p, u, opts.tol * std::max(1.0, inf_norm(p.nu())))) return std::nullopt;
    return u;
}

}  // namespace

QpProblem::QpProblem(Mat H, Vec q, Mat Gamma, Vec nu)
    : H_(std::move(H)), q_(std::move(q)), Gamma_(std::move(Gamma)), nu_(std::move(nu)) {
    const auto n = q_.size();
    if (H_.rows() != n || H_.cols() != n) throw std::invalid_argument("QpProblem: H must be n x n with n = len(q)");
    if (Gamma_.size() == 0) Gamma_.resize(nu_.size(), n);
    if (Gamma_.rows() != nu_.size()) throw std::invalid_argument("QpProblem: rows(Gamma) != len(nu)");
    if (Gamma_.cols() != n) throw std::invalid_argument("QpProblem: cols(Gamma) != len(q)");
    H_ = 0.5 * (H_ + H_.transpose()).eval();
}

QpProblem::QpProblem(Mat H, Vec q) : QpProblem(std::move(H), std::move(q), Mat(0, 0), Vec(0)) {}

const char* to_string(QpStatus status) {
    switch (status) {
        case QpStatus::Optimal: return "Optimal";
        case QpStatus::MaxIterations: return "MaxIterations";
        case QpStatus::Infeasible: return "Infeasible";
    }
    return "Unknown";
}

double kkt_residual(const QpProblem& p, const Vec& u, const Vec& lambda) {
    Vec stationarity = p.H() * u + p.q();
    double res = 0.0;
    if (p.num_constraints() > 0) {
        stationarity += p.Gamma().transpose() * lambda;
        const Vec slack = p.Gamma() * u - p.nu();
        res = std::max(res, std::max(0.0, slack.maxCoeff()));
        res = std::max(res, std::max(0.0, (-lambda).maxCoeff()));
        res = std::max(res, std::abs(lambda.dot(slack)));
    }
    return std::max(res, inf_norm(stationarity));
}

QpSolution solve_qp(const QpProblem& problem, const QpOptions& options, const QpWarmStart& warm) {
    if (!(options.tol > 0.0)) throw std::invalid_argument("solve_qp: tol must be positive");
    ActiveSetSolver solver(problem, options);
    const double ftol = solver.feasibility_tol();

    std::optional<Vec> start;
    if (warm.u && warm.u->size() == problem.num_vars() && is_feasible(problem, *warm.u, ftol)) {
        start = *warm.u;
    } else if (Vec zero = Vec::Zero(problem.num_vars()); is_feasible(problem, zero, ftol)) {
        start = zero;
    } else {
        start = find_feasible_point(problem, options);
    }

    if (!start) {
        QpSolution sol;
        sol.status = QpStatus::Infeasible;
        sol.u_star = Vec::Zero(problem.num_vars());
        sol.lambda = Vec::Zero(problem.num_constraints());
        sol.kkt_residual = std::numeric_limits<double>::infinity();
        return sol;
    }
    return solver.run(*start, warm.working_set);
}

}  // namespace farma
