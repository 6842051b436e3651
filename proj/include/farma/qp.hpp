#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace farma {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/**
 * Dense convex QP
 *
 *     min  1/2 u' H u + q' u
 *     s.t. Gamma u <= nu
 *
 * H is symmetrized on construction. An empty Gamma means no constraints.
 */
class QpProblem {
public:
    QpProblem(Mat H, Vec q, Mat Gamma, Vec nu);
    QpProblem(Mat H, Vec q);

    const Mat& H() const { return H_; }
    const Vec& q() const { return q_; }
    const Mat& Gamma() const { return Gamma_; }
    const Vec& nu() const { return nu_; }

    Eigen::Index num_vars() const { return q_.size(); }
    Eigen::Index num_constraints() const { return nu_.size(); }

    double objective(const Vec& u) const { return 0.5 * u.dot(H_ * u) + q_.dot(u); }

private:
    Mat H_;
    Vec q_;
    Mat Gamma_;
    Vec nu_;
};

enum class QpStatus { Optimal, MaxIterations, Infeasible };

const char* to_string(QpStatus status);

struct QpSolution {
    Vec u_star;
    Vec lambda;
    QpStatus status = QpStatus::MaxIterations;
    double kkt_residual = 0.0;
    int iterations = 0;
    /// Indices of the constraints in the final working set, ascending.
    std::vector<Eigen::Index> working_set;
};

/// Optional starting point for the active-set iteration. An infeasible
/// primal guess is discarded; working-set entries that are not active at
/// the starting point are dropped.
struct QpWarmStart {
    std::optional<Vec> u;
    std::vector<Eigen::Index> working_set;
};

struct QpOptions {
    double tol = 1e-8;
    /// 0 selects 50 * (n + m).
    int max_iter = 0;
};

/**
 * Primal active-set solver. Each iteration solves the equality-constrained
 * subproblem on the working set as a least-squares problem in the
 * Cholesky-whitened space of H. A feasible start is taken from the warm
 * start, the origin, or a slack-variable phase 1, in that order.
 *
 * Stationarity and complementarity are checked relative to the problem
 * scale max(1, |q|_inf, |H u|_inf, |nu|_inf); kkt_residual reports the
 * unscaled maximum of the four KKT violations.
 */
QpSolution solve_qp(const QpProblem& problem, const QpOptions& options = {},
                    const QpWarmStart& warm = {});

/// Max of stationarity, primal infeasibility, dual infeasibility and
/// complementarity violations at (u, lambda).
double kkt_residual(const QpProblem& problem, const Vec& u, const Vec& lambda);

}  // namespace farma
