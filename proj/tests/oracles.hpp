#pragma once

// Reference solutions used by several test binaries.

#include <optional>
#include <random>
#include <vector>

#include "farma/qp.hpp"

namespace farma::testing {

/// Exhaustive active-set search for a strictly convex QP: tries every
/// subset of constraints (smallest first) as equalities and returns the first
/// KKT point. With H positive definite that point is the unique minimizer.
inline std::optional<Vec> brute_force_qp(const QpProblem& p, double tol = 1e-9) {
    const auto n = p.num_vars();
    const auto m = p.num_constraints();
    std::vector<Eigen::Index> subset;

    auto try_subset = [&](const std::vector<Eigen::Index>& s) -> std::optional<Vec> {
        const auto k = static_cast<Eigen::Index>(s.size());
        Mat K = Mat::Zero(n + k, n + k);
        Vec rhs(n + k);
        K.topLeftCorner(n, n) = p.H();
        rhs.head(n) = -p.q();
        for (Eigen::Index i = 0; i < k; ++i) {
            K.block(0, n + i, n, 1) = p.Gamma().row(s[i]).transpose();
            K.block(n + i, 0, 1, n) = p.Gamma().row(s[i]);
            rhs(n + i) = p.nu()(s[i]);
        }
        Eigen::FullPivLU<Mat> lu(K);
        if (lu.rank() < n + k) return std::nullopt;
        const Vec sol = lu.solve(rhs);
        const Vec u = sol.head(n);
        if (k > 0 && sol.tail(k).minCoeff() < -tol) return std::nullopt;
        if (m > 0 && (p.Gamma() * u - p.nu()).maxCoeff() > tol * (1.0 + p.nu().cwiseAbs().maxCoeff())) return std::nullopt;
        return u;
    };

    for (Eigen::Index size = 0; size <= std::min(n, m); ++size) {
        std::vector<bool> pick(static_cast<std::size_t>(m), false);
        std::fill(pick.begin(), pick.begin() + size, true);
        do {
            subset.clear();
            for (Eigen::Index j = 0; j < m; ++j)
                if (pick[static_cast<std::size_t>(j)]) subset.push_back(j);
            if (auto u = try_subset(subset)) return u;
        } while (std::prev_permutation(pick.begin(), pick.end()));
    }
    return std::nullopt;
}

/// Random strictly convex QP with a known strictly feasible point.
inline QpProblem random_qp(std::mt19937_64& rng, Eigen::Index n, Eigen::Index m) {
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> slack(0.1, 2.0);
    auto randn = [&](Eigen::Index r, Eigen::Index c) {
        Mat M(r, c);
        for (Eigen::Index i = 0; i < r; ++i)
            for (Eigen::Index j = 0; j < c; ++j) M(i, j) = normal(rng);
        return M;
    };
    const Mat A = randn(n, n);
    Mat H = A * A.transpose() + 0.1 * Mat::Identity(n, n);
    Vec q = 3.0 * randn(n, 1);
    Mat G = randn(m, n);
    const Vec u0 = randn(n, 1);
    Vec nu = G * u0;
    for (Eigen::Index i = 0; i < m; ++i) nu(i) += slack(rng);
    return QpProblem(std::move(H), std::move(q), std::move(G), std::move(nu));
}

}  // namespace farma::testing
