#include "farma/nmpc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace farma {

ContinuousJacobian double_integrator_jacobian() {
    return [](const Vec&, const Vec&, Mat& dfdx, Mat& dfdu) {
        dfdx = Mat::Zero(2, 2);
        dfdx(0, 1) = 1.0;
        dfdu = Mat::Zero(2, 1);
        dfdu(1, 0) = 1.0;
    };
}

ContinuousJacobian cart_pendulum_jacobian(const CartPendulumParams& params) {
    return [p = params](const Vec& x, const Vec& u, Mat& dfdx, Mat& dfdu) {
        const double M = p.cart_mass, m = p.pendulum_mass, l = p.length, g = p.gravity;
        const double phi = x(2), w = x(3), F = u(0);
        const double s = std::sin(phi), c = std::cos(phi);
        const double s2 = std::sin(2.0 * phi), c2 = std::cos(2.0 * phi);
        const double a = m * l;

        const double den = m * l * l * (m + M) / 3.0 - 0.25 * a * a * c * c;
        const double dden = 0.25 * a * a * s2;

        const double n1 = m * m * l * l * l * w * w * s / 6.0 - a * a * g * s2 / 8.0 + m * l * l * F / 3.0;
        const double n1_phi = m * m * l * l * l * w * w * c / 6.0 - a * a * g * c2 / 4.0;
        const double n1_w = m * m * l * l * l * w * s / 3.0;
        const double n1_F = m * l * l / 3.0;

        const double n2 = 0.5 * m * g * l * (m + M) * s - a * a * w * w * s2 / 8.0 - 0.5 * a * c * F;
        const double n2_phi = 0.5 * m * g * l * (m + M) * c - a * a * w * w * c2 / 4.0 + 0.5 * a * s * F;
        const double n2_w = -a * a * w * s2 / 4.0;
        const double n2_F = -0.5 * a * c;

        dfdx = Mat::Zero(4, 4);
        dfdx(0, 1) = 1.0;
        dfdx(1, 2) = (n1_phi * den - n1 * dden) / (den * den);
        dfdx(1, 3) = n1_w / den;
        dfdx(2, 3) = 1.0;
        dfdx(3, 2) = (n2_phi * den - n2 * dden) / (den * den);
        dfdx(3, 3) = n2_w / den;

        dfdu = Mat::Zero(4, 1);
        dfdu(1, 0) = n1_F / den;
        dfdu(3, 0) = n2_F / den;
    };
}

void finite_difference_jacobians(const std::function<Vec(const Vec&, const Vec&)>& f, const Vec& x, const Vec& u,
                                 Mat& A, Mat& B, double h) {
    const Vec f0 = f(x, u);
    A.resize(f0.size(), x.size());
    B.resize(f0.size(), u.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        Vec xp = x, xm = x;
        xp(j) += h;
        xm(j) -= h;
        A.col(j) = (f(xp, u) - f(xm, u)) / (2.0 * h);
    }
    for (Eigen::Index j = 0; j < u.size(); ++j) {
        Vec up = u, um = u;
        up(j) += h;
        um(j) -= h;
        B.col(j) = (f(x, up) - f(x, um)) / (2.0 * h);
    }
}

DiscreteDynamics euler_discretize(const PlantModel& model, double Ts, ContinuousJacobian jacobian) {
    if (!(Ts > 0.0)) throw std::invalid_argument("euler_discretize: Ts must be positive");
    DiscreteDynamics d;
    d.nx = model.nx;
    d.nu = model.nu;
    d.f = [fc = model.f, Ts](const Vec& x, const Vec& u) -> Vec { return x + Ts * fc(x, u); };
    if (jacobian) {
        d.jacobians = [jacobian, Ts, nx = model.nx](const Vec& x, const Vec& u, Mat& A, Mat& B) {
            Mat dfdx, dfdu;
            jacobian(x, u, dfdx, dfdu);
            A = Mat::Identity(nx, nx) + Ts * dfdx;
            B = Ts * dfdu;
        };
    } else {
        d.jacobians = [f = d.f](const Vec& x, const Vec& u, Mat& A, Mat& B) {
            finite_difference_jacobians(f, x, u, A, B);
        };
    }
    return d;
}

DiscreteDynamics linear_dynamics(const Mat& A, const Mat& B) {
    DiscreteDynamics d;
    d.nx = A.rows();
    d.nu = B.cols();
    d.f = [A, B](const Vec& x, const Vec& u) -> Vec { return A * x + B * u; };
    d.jacobians = [A, B](const Vec&, const Vec&, Mat& Ax, Mat& Bu) {
        Ax = A;
        Bu = B;
    };
    return d;
}

DoubleIntegratorDiscretization exact_discretize_double_integrator(double Ts, bool paper_compat) {
    if (!(Ts > 0.0)) throw std::invalid_argument("exact_discretize_double_integrator: Ts must be positive");
    DoubleIntegratorDiscretization d;
    d.A = Mat::Identity(2, 2);
    d.A(0, 1) = Ts;
    d.B.resize(2, 1);
    d.B << (paper_compat ? Ts * Ts : 0.5 * Ts * Ts), Ts;
    d.C = Mat::Zero(1, 2);
    d.C(0, 0) = 1.0;
    return d;
}

double ResidualCost::value(const Vec& ref, const Vec& z) const {
    const Vec r = residual(ref, z);
    return r.dot(weight * r);
}

ResidualCost quadratic_tracking_cost(const Mat& W) {
    return {[](const Vec& ref, const Vec& x) -> Vec { return x - ref; },
            [](const Vec&, const Vec& x) -> Mat { return Mat::Identity(x.size(), x.size()); }, W};
}

ResidualCost quadratic_input_cost(const Mat& W) {
    return {[](const Vec&, const Vec& u) -> Vec { return u; },
            [](const Vec&, const Vec& u) -> Mat { return Mat::Identity(u.size(), u.size()); }, W};
}

ResidualCost pendulum_upright_cost(const Mat& W) {
    return {[](const Vec&, const Vec& x) -> Vec {
                Vec r(4);
                r << x(0), x(1), 1.0 - std::cos(x(2)), x(3);
                return r;
            },
            [](const Vec&, const Vec& x) -> Mat {
                Mat J = Mat::Identity(4, 4);
                J(2, 2) = std::sin(x(2));
                return J;
            },
            W};
}

namespace {

struct Layout {
    Eigen::Index nx, nu, h;
    Eigen::Index inputs() const { return h * nu; }
    Eigen::Index size() const { return h * (nx + nu); }
};

Layout layout_of(const NmpcConfig& c) { return {c.dynamics.nx, c.dynamics.nu, c.horizon}; }

double merit(const NlpEvaluation& e, double rho) { return e.J + rho * e.g_eq.lpNorm<1>(); }

}  // namespace

NlpEvaluation eval_nlp(const NmpcConfig& config, const Vec& x_k, const Vec& x_ref, const Vec& X) {
    const Layout L = layout_of(config);
    if (X.size() != L.size()) throw std::invalid_argument("eval_nlp: decision vector has wrong length");
    const Vec U = X.head(L.inputs());
    const Vec S = X.tail(L.h * L.nx);

    NlpEvaluation e;
    e.g_eq.resize(L.h * L.nx);
    Vec prev = x_k;
    const Vec no_ref;
    for (Eigen::Index i = 0; i < L.h; ++i) {
        const Vec u = U.segment(i * L.nu, L.nu);
        const Vec x = S.segment(i * L.nx, L.nx);
        e.g_eq.segment(i * L.nx, L.nx) = x - config.dynamics.f(prev, u);
        e.J += config.input_cost.value(no_ref, u);
        // x here is x_{i+1}; stage costs cover x_1 ... x_{h-1}, terminal x_h.
        e.J += (i == L.h - 1) ? config.terminal_cost.value(x_ref, x) : config.stage_cost.value(x_ref, x);
        prev = x;
    }
    e.g_ineq.resize(2 * L.inputs());
    e.g_ineq << U - config.limits.u_max.replicate(L.h, 1), -U + config.limits.u_min.replicate(L.h, 1);
    return e;
}

Vec rollout(const NmpcConfig& config, const Vec& x_k, const Vec& inputs) {
    const Layout L = layout_of(config);
    if (inputs.size() != L.inputs()) throw std::invalid_argument("rollout: input sequence has wrong length");
    Vec X(L.size());
    X.head(L.inputs()) = inputs;
    Vec x = x_k;
    for (Eigen::Index i = 0; i < L.h; ++i) {
        x = config.dynamics.f(x, inputs.segment(i * L.nu, L.nu));
        X.segment(L.inputs() + i * L.nx, L.nx) = x;
    }
    return X;
}

Vec shift_decision(const Vec& X, Eigen::Index nx, Eigen::Index nu, int horizon) {
    const Eigen::Index h = horizon;
    Vec out(X.size());
    out.head(h * nu) = shift_blocks(X.head(h * nu), nu);
    out.tail(h * nx) = shift_blocks(X.tail(h * nx), nx);
    return out;
}

NmpcSolution sqp_solve(const NmpcConfig& config, const Vec& x_k, const Vec& x_ref, const Vec& X_warm,
                       const std::vector<Eigen::Index>& qp_working_set) {
    const Layout L = layout_of(config);
    const SqpOptions& opt = config.sqp;
    if (X_warm.size() != L.size()) throw std::invalid_argument("sqp_solve: warm start has wrong length");
    const Eigen::Index nx = L.nx, nu = L.nu, h = L.h, nU = L.inputs();
    const Vec umax = config.limits.u_max.replicate(h, 1);
    const Vec umin = config.limits.u_min.replicate(h, 1);

    Vec X = X_warm;
    X.head(nU) = X.head(nU).cwiseMax(umin).cwiseMin(umax);

    double rho = opt.merit_penalty;
    NlpEvaluation ev = eval_nlp(config, x_k, x_ref, X);

    NmpcSolution sol;
    sol.working_set = qp_working_set;
    sol.merit_history.push_back(merit(ev, rho));

    std::vector<Mat> As(static_cast<std::size_t>(h)), Bs(static_cast<std::size_t>(h));
    Mat G(h * nx, nU);
    Vec c(h * nx);
    std::vector<Mat> Hx(static_cast<std::size_t>(h));
    Vec gx(h * nx), gu(nU);
    Mat Hu = Mat::Zero(nU, nU);
    const Vec no_ref;

    bool converged = false;
    for (int it = 1; it <= opt.max_iter; ++it) {
        sol.iterations = it;
        const Vec U = X.head(nU);
        auto state = [&](Eigen::Index i) -> Vec {  // x_i, i = 0 ... h
            return i == 0 ? x_k : Vec(X.segment(nU + (i - 1) * nx, nx));
        };

        for (Eigen::Index i = 0; i < h; ++i)
            config.dynamics.jacobians(state(i), U.segment(i * nu, nu), As[static_cast<std::size_t>(i)],
                                      Bs[static_cast<std::size_t>(i)]);

        // dx_{i+1} = A_i dx_i + B_i du_i + d_{i+1}, d = -g_eq, dx_0 = 0
        //   => dXs = G dU + c
        G.setZero();
        for (Eigen::Index j = 0; j < h; ++j) {
            Mat blk = Bs[static_cast<std::size_t>(j)];
            G.block(j * nx, j * nu, nx, nu) = blk;
            for (Eigen::Index i = j + 1; i < h; ++i) {
                blk = As[static_cast<std::size_t>(i)] * blk;
                G.block(i * nx, j * nu, nx, nu) = blk;
            }
        }
        Vec ci = Vec::Zero(nx);
        for (Eigen::Index i = 0; i < h; ++i) {
            ci = (i == 0 ? Vec::Zero(nx) : Vec(As[static_cast<std::size_t>(i)] * ci)) - ev.g_eq.segment(i * nx, nx);
            c.segment(i * nx, nx) = ci;
        }

        // Gauss-Newton model of J.
        for (Eigen::Index i = 0; i < h; ++i) {
            const Vec x = state(i + 1);
            const ResidualCost& cost = (i == h - 1) ? config.terminal_cost : config.stage_cost;
            const Vec r = cost.residual(x_ref, x);
            const Mat Jr = cost.jacobian(x_ref, x);
            const Mat WJ = cost.weight * Jr;
            Hx[static_cast<std::size_t>(i)] = 2.0 * Jr.transpose() * WJ;
            gx.segment(i * nx, nx) = 2.0 * WJ.transpose() * r;

            const Vec u = U.segment(i * nu, nu);
            const Vec ru = config.input_cost.residual(no_ref, u);
            const Mat Ju = config.input_cost.jacobian(no_ref, u);
            const Mat WJu = config.input_cost.weight * Ju;
            Hu.block(i * nu, i * nu, nu, nu) = 2.0 * Ju.transpose() * WJu;
            gu.segment(i * nu, nu) = 2.0 * WJu.transpose() * ru;
        }

        Mat HG(h * nx, nU);
        Vec Hc(h * nx);
        for (Eigen::Index i = 0; i < h; ++i) {
            const Mat& Hi = Hx[static_cast<std::size_t>(i)];
            HG.middleRows(i * nx, nx) = Hi * G.middleRows(i * nx, nx);
            Hc.segment(i * nx, nx) = Hi * c.segment(i * nx, nx);
        }
        Mat H = G.transpose() * HG + Hu;
        Vec q = G.transpose() * (Hc + gx) + gu;
        Mat Gamma(2 * nU, nU);
        Gamma << Mat::Identity(nU, nU), -Mat::Identity(nU, nU);
        Vec bounds(2 * nU);
        bounds << umax - U, U - umin;

        QpWarmStart ws;
        ws.u = Vec::Zero(nU);
        ws.working_set = sol.working_set;
        const QpProblem qp(std::move(H), std::move(q), std::move(Gamma), std::move(bounds));
        const QpSolution qs = solve_qp(qp, opt.qp, ws);
        if (qs.status != QpStatus::Optimal) {
            sol.converged = false;
            throw SqpNonConvergence(std::string("QP subproblem ") + to_string(qs.status), sol);
        }
        sol.working_set = qs.working_set;

        const Vec dU = qs.u_star;
        const Vec dS = G * dU + c;
        const double step = std::max(dU.lpNorm<Eigen::Infinity>(), dS.lpNorm<Eigen::Infinity>());
        sol.last_step = step;

        Vec dX(L.size());
        dX << dU, dS;

        if (step <= opt.step_tol) {
            X += dX;
            ev = eval_nlp(config, x_k, x_ref, X);
            converged = true;
            break;
        }

        // Penalty update keeps dX a descent direction of the l1 merit.
        const double slope_J = gx.dot(dS) + gu.dot(dU);
        double quad = 0.0;
        for (Eigen::Index i = 0; i < h; ++i)
            quad += 0.5 * dS.segment(i * nx, nx).dot(Hx[static_cast<std::size_t>(i)] * dS.segment(i * nx, nx));
        quad += 0.5 * dU.dot(Hu * dU);
        const double infeas = ev.g_eq.lpNorm<1>();
        if (infeas > 0.0) rho = std::max(rho, (slope_J + std::max(quad, 0.0)) / (0.5 * infeas));
        const double slope = slope_J - rho * infeas;

        const double phi0 = merit(ev, rho);
        double alpha = 1.0;
        bool accepted = false;
        NlpEvaluation trial_ev;
        for (int bt = 0; bt <= opt.max_backtracks; ++bt, alpha *= 0.5) {
            trial_ev = eval_nlp(config, x_k, x_ref, X + alpha * dX);
            if (merit(trial_ev, rho) <= phi0 + opt.armijo * alpha * slope) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            // No decrease available along dX: stationary up to rounding.
            if (std::abs(slope) <= 1e-10 * std::max(1.0, std::abs(phi0))) {
                converged = true;
                break;
            }
            sol.X = rollout(config, x_k, X.head(nU));
            throw SqpNonConvergence("line search failed", sol);
        }
        X += alpha * dX;
        ev = trial_ev;
        sol.merit_history.push_back(merit(ev, rho));
    }

    sol.X = rollout(config, x_k, X.head(nU).cwiseMax(umin).cwiseMin(umax));
    sol.eq_residual = eval_nlp(config, x_k, x_ref, sol.X).g_eq.lpNorm<Eigen::Infinity>();
    sol.converged = converged && sol.eq_residual <= opt.constraint_tol;
    if (!sol.converged) throw SqpNonConvergence("no convergence within max_iter", sol);
    return sol;
}

NmpcStepResult nmpc_step(const NmpcConfig& config, const Vec& x_k, const Vec& x_ref, const NmpcSolution* warm,
                         const Vec& cold_inputs) {
    using Clock = std::chrono::steady_clock;
    const auto start = Clock::now();
    const Layout L = layout_of(config);

    Vec X0;
    std::vector<Eigen::Index> ws;
    if (warm != nullptr && warm->X.size() == L.size()) {
        X0 = shift_decision(warm->X, L.nx, L.nu, config.horizon);
        // Shift the box rows of the last subproblem along with the inputs.
        const Eigen::Index nU = L.inputs();
        for (Eigen::Index j : warm->working_set) {
            const Eigen::Index half = j / nU, local = j % nU;
            if (local >= L.nu) ws.push_back(half * nU + local - L.nu);
            if (local >= nU - L.nu) ws.push_back(j);
        }
        std::sort(ws.begin(), ws.end());
        ws.erase(std::unique(ws.begin(), ws.end()), ws.end());
    } else {
        const Vec inputs = cold_inputs.size() == L.inputs() ? cold_inputs : Vec(Vec::Zero(L.inputs()));
        X0 = rollout(config, x_k, inputs);
    }

    NmpcStepResult res;
    res.solution = sqp_solve(config, x_k, x_ref, X0, ws);
    res.u = res.solution.X.head(L.nu);
    res.solve_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    return res;
}

NmpcController::NmpcController(NmpcConfig config, Vec cold_inputs)
    : config_(std::move(config)), cold_inputs_(std::move(cold_inputs)) {
    if (config_.horizon < 1) throw std::invalid_argument("NmpcConfig: horizon must be >= 1");
    if (config_.limits.dim() != config_.dynamics.nu) throw std::invalid_argument("NmpcConfig: limits dimension mismatch");
}

Vec NmpcController::step(const Vec& x_k, const Vec& x_ref) {
    NmpcStepResult res = nmpc_step(config_, x_k, x_ref, last_ ? &*last_ : nullptr, cold_inputs_);
    total_iterations_ += res.solution.iterations;
    last_ = std::move(res.solution);
    return res.u;
}

}  // namespace farma
