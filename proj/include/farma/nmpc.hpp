#pragma once

#include <functional>
#include <optional>

#include "farma/linear_mpc.hpp"
#include "farma/plant.hpp"
#include "farma/qp.hpp"

namespace farma {

/// x+ = f(x, u) with Jacobians A = df/dx, B = df/du.
struct DiscreteDynamics {
    std::function<Vec(const Vec& x, const Vec& u)> f;
    std::function<void(const Vec& x, const Vec& u, Mat& A, Mat& B)> jacobians;
    Eigen::Index nx = 0;
    Eigen::Index nu = 0;
};

/// Continuous-time Jacobians df/dx and df/du of a plant model.
using ContinuousJacobian = std::function<void(const Vec& x, const Vec& u, Mat& dfdx, Mat& dfdu)>;

ContinuousJacobian double_integrator_jacobian();
ContinuousJacobian cart_pendulum_jacobian(const CartPendulumParams& params);

/// Central finite-difference Jacobians with step h.
void finite_difference_jacobians(const std::function<Vec(const Vec&, const Vec&)>& f, const Vec& x, const Vec& u,
                                 Mat& A, Mat& B, double h = 1e-6);

/// f_d(x, u) = x + Ts f_c(x, u). Without an analytic Jacobian the
/// discrete Jacobians fall back to central differences.
DiscreteDynamics euler_discretize(const PlantModel& model, double Ts, ContinuousJacobian jacobian = {});

/// Linear dynamics as a DiscreteDynamics.
DiscreteDynamics linear_dynamics(const Mat& A, const Mat& B);

struct DoubleIntegratorDiscretization {
    Mat A;
    Mat B;
    Mat C;
};

/// Zero-order-hold discretization of the double integrator. With
/// `paper_compat` the input matrix is [Ts^2; Ts] instead of the exact
/// [Ts^2/2; Ts].
DoubleIntegratorDiscretization exact_discretize_double_integrator(double Ts, bool paper_compat = false);

/**
 * Cost of the form V = r' W r with a residual map r. Its gradient is
 * 2 J' W r and its Gauss-Newton Hessian 2 J' W J, with J = dr/dz.
 */
struct ResidualCost {
    std::function<Vec(const Vec& ref, const Vec& z)> residual;
    std::function<Mat(const Vec& ref, const Vec& z)> jacobian;
    Mat weight;

    double value(const Vec& ref, const Vec& z) const;
};

/// (x - x_ref)' W (x - x_ref).
ResidualCost quadratic_tracking_cost(const Mat& W);
/// u' W u (the reference argument is ignored).
ResidualCost quadratic_input_cost(const Mat& W);
/// r(x) = [x1, x2, 1 - cos x3, x4] weighted by W; the reference is ignored.
ResidualCost pendulum_upright_cost(const Mat& W);

struct SqpOptions {
    int max_iter = 100;
    double step_tol = 1e-4;
    double constraint_tol = 1e-6;
    double armijo = 1e-4;
    int max_backtracks = 10;
    double merit_penalty = 1.0;
    QpOptions qp{};
};

struct NmpcConfig {
    DiscreteDynamics dynamics;
    int horizon = 1;
    ResidualCost terminal_cost;
    ResidualCost stage_cost;
    ResidualCost input_cost;
    SaturationLimits limits;
    SqpOptions sqp{};
};

struct NlpEvaluation {
    double J = 0.0;
    Vec g_eq;
    Vec g_ineq;
};

/// Decision vector layout: X = [u_0; ...; u_{h-1}; x_1; ...; x_h].
NlpEvaluation eval_nlp(const NmpcConfig& config, const Vec& x_k, const Vec& x_ref, const Vec& X);

/// X whose states are the rollout of the input sequence from x_k.
Vec rollout(const NmpcConfig& config, const Vec& x_k, const Vec& inputs);

struct NmpcSolution {
    Vec X;
    int iterations = 0;
    double eq_residual = 0.0;
    double last_step = 0.0;
    bool converged = false;
    /// Merit value after every accepted iteration, starting from the warm start.
    std::vector<double> merit_history;
    /// QP working set of the final subproblem (for warm starts).
    std::vector<Eigen::Index> working_set;
};

class SqpNonConvergence : public std::runtime_error {
public:
    SqpNonConvergence(const std::string& why, NmpcSolution best)
        : std::runtime_error("sqp_solve: " + why), best_(std::move(best)) {}
    const NmpcSolution& best() const { return best_; }

private:
    NmpcSolution best_;
};

/**
 * Gauss-Newton SQP. Each iteration linearizes the defects around X,
 * eliminates the state increments by condensing onto the inputs and
 * solves the resulting box-constrained QP. Steps are globalized with a
 * backtracking line search on J + rho |g_eq|_1. The returned X has its
 * states replaced by an exact rollout of the final inputs.
 *
 * Throws SqpNonConvergence (holding the best iterate) if max_iter is hit
 * before |dX|_inf <= step_tol.
 */
NmpcSolution sqp_solve(const NmpcConfig& config, const Vec& x_k, const Vec& x_ref, const Vec& X_warm,
                       const std::vector<Eigen::Index>& qp_working_set = {});

struct NmpcStepResult {
    Vec u;
    NmpcSolution solution;
    double solve_seconds = 0.0;
};

/// One receding-horizon step. `warm` is the previous step's solution,
/// shifted by one stage before use; without it the cold start is the
/// rollout of `cold_inputs` (all zero when empty).
NmpcStepResult nmpc_step(const NmpcConfig& config, const Vec& x_k, const Vec& x_ref,
                         const NmpcSolution* warm = nullptr, const Vec& cold_inputs = {});

/// Shift X = [U; Xs] by one stage in both blocks, repeating the last stage.
Vec shift_decision(const Vec& X, Eigen::Index nx, Eigen::Index nu, int horizon);

class NmpcController {
public:
    explicit NmpcController(NmpcConfig config, Vec cold_inputs = {});

    Vec step(const Vec& x_k, const Vec& x_ref);
    const NmpcConfig& config() const { return config_; }
    const std::optional<NmpcSolution>& last_solution() const { return last_; }
    int total_iterations() const { return total_iterations_; }

private:
    NmpcConfig config_;
    Vec cold_inputs_;
    std::optional<NmpcSolution> last_;
    int total_iterations_ = 0;
};

}  // namespace farma
