#pragma once

#include <optional>

#include "farma/plant.hpp"
#include "farma/qp.hpp"

namespace farma {

/// x+ = A x + B u, y = C x, with stage weight Q, terminal weight Qf and
/// input weight R.
struct LinearMpcConfig {
    Mat A;
    Mat B;
    Mat C;
    int horizon = 1;
    Mat Q;
    Mat Qf;
    Mat R;
    SaturationLimits limits;

    /// Throws std::invalid_argument on inconsistent dimensions, an
    /// asymmetric or indefinite Q / Qf, or R not positive definite.
    void validate() const;
};

/// Stacked predictions [x_1; ...; x_h] = Gamma_u U + Gamma_x x_0.
struct PredictionMatrices {
    Mat Gamma_u;
    Mat Gamma_x;
};

PredictionMatrices build_prediction_matrices(const Mat& A, const Mat& B, int horizon);

/// Condensed QP over U = [u_0; ...; u_{h-1}] with box rows [I; -I] U <= [1 (x) u_max; -1 (x) u_min].
QpProblem build_condensed_qp(const LinearMpcConfig& config, const Vec& x_k, const Vec& x_ref);

struct MpcStepResult {
    Vec u;
    QpSolution solution;
    double solve_seconds = 0.0;
};

class QpFailure : public std::runtime_error {
public:
    QpFailure(const std::string& where, QpSolution sol)
        : std::runtime_error(where + ": QP " + to_string(sol.status)), solution_(std::move(sol)) {}
    const QpSolution& solution() const { return solution_; }

private:
    QpSolution solution_;
};

/**
 * One receding-horizon step: solve the condensed QP and return the first
 * input block. `warm` is the previous step's solution; it is shifted by one
 * block (last block repeated) before use. Throws QpFailure when the QP does
 * not reach Optimal.
 */
MpcStepResult lmpc_step(const LinearMpcConfig& config, const Vec& x_k, const Vec& x_ref,
                        const QpSolution* warm = nullptr, const QpOptions& qp_options = {});

/// Shift a stacked input sequence forward by one block of `block` entries,
/// repeating the last block.
Vec shift_blocks(const Vec& stacked, Eigen::Index block);

/// Stateful wrapper that keeps the previous solution as a warm start.
class LinearMpcController {
public:
    explicit LinearMpcController(LinearMpcConfig config, QpOptions qp_options = {});

    Vec step(const Vec& x_k, const Vec& x_ref);
    const LinearMpcConfig& config() const { return config_; }
    const std::optional<QpSolution>& last_solution() const { return last_; }

private:
    LinearMpcConfig config_;
    QpOptions qp_options_;
    std::optional<QpSolution> last_;
};

}  // namespace farma
