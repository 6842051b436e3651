#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "farma/experiments.hpp"

namespace py = pybind11;
using namespace farma;

namespace {

py::dict trajectory_dict(const ClosedLoopTrajectory& t) {
    const auto n = static_cast<Eigen::Index>(t.size());
    auto stack = [&](auto member) {
        if (n == 0) return Mat(0, 0);
        Mat m(n, (t.records.front().*member).size());
        for (Eigen::Index k = 0; k < n; ++k) m.row(k) = (t.records[static_cast<std::size_t>(k)].*member).transpose();
        return m;
    };
    Vec time(n), ctrl(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        time(k) = t.records[static_cast<std::size_t>(k)].t;
        ctrl(k) = t.records[static_cast<std::size_t>(k)].controller_seconds;
    }
    py::dict d;
    d["Ts"] = t.Ts;
    d["t"] = time;
    d["r"] = stack(&StepRecord::r);
    d["y"] = stack(&StepRecord::y);
    d["x"] = stack(&StepRecord::x);
    d["u_requested"] = stack(&StepRecord::u_requested);
    d["u"] = stack(&StepRecord::u);
    d["ctrl_time_s"] = ctrl;
    return d;
}

ScenarioConfig resolve_scenario(const std::string& name, bool paper_compat) {
    ScenarioConfig cfg;
    if (name == "example1") cfg = example1_scenario();
    else if (name == "example2") cfg = example2_scenario();
    else cfg = load_scenario(name);
    if (paper_compat) cfg.paper_compat = true;
    return cfg;
}

std::vector<Vec> rows(const Mat& m) {
    std::vector<Vec> out;
    for (Eigen::Index i = 0; i < m.rows(); ++i) out.emplace_back(m.row(i).transpose());
    return out;
}

}  // namespace

PYBIND11_MODULE(_farma, m) {
    m.doc() = "MPC-to-ARMA controller distillation core";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<StageError>(m, "StageError", PyExc_RuntimeError);
    py::register_exception<RankDeficient>(m, "RankDeficient", PyExc_ArithmeticError);
    py::register_exception<DatasetTooShort>(m, "DatasetTooShort", PyExc_ValueError);

    m.def(
        "solve_qp",
        [](const Mat& H, const Vec& q, std::optional<Mat> G, std::optional<Vec> nu, double tol, int max_iter) {
            const QpProblem p = G ? QpProblem(H, q, *G, nu.value_or(Vec())) : QpProblem(H, q);
            const auto s = solve_qp(p, QpOptions{tol, max_iter});
            py::dict d;
            d["u"] = s.u_star;
            d["lambda"] = s.lambda;
            d["status"] = std::string(to_string(s.status));
            d["iterations"] = s.iterations;
            d["kkt_residual"] = s.kkt_residual;
            d["working_set"] = s.working_set;
            return d;
        },
        py::arg("H"), py::arg("q"), py::arg("G") = py::none(), py::arg("nu") = py::none(), py::arg("tol") = 1e-8,
        py::arg("max_iter") = 0, "min 1/2 u'Hu + q'u subject to G u <= nu.");

    m.def("saturate", [](const Vec& u, const Vec& lo, const Vec& hi) { return saturate(u, SaturationLimits(lo, hi)); });
    m.def("wrap_pi", &wrap_pi);

    m.def(
        "run_mpc",
        [](const std::string& scenario, const std::string& run, bool paper_compat) {
            const auto cfg = resolve_scenario(scenario, paper_compat);
            return trajectory_dict(run_mpc(cfg, cfg.run(run.empty() ? cfg.runs.front().name : run)));
        },
        py::arg("scenario") = "example1", py::arg("run") = "", py::arg("paper_compat") = false,
        "Closed-loop MPC run of a built-in scenario name or a config path.");

    m.def(
        "lmpc_step",
        [](const Mat& A, const Mat& B, const Mat& C, int horizon, const Mat& Q, const Mat& Qf, const Mat& R,
           const Vec& u_min, const Vec& u_max, const Vec& x, const Vec& x_ref) {
            LinearMpcConfig cfg{A, B, C, horizon, Q, Qf, R, SaturationLimits(u_min, u_max)};
            return lmpc_step(cfg, x, x_ref).u;
        },
        py::arg("A"), py::arg("B"), py::arg("C"), py::arg("horizon"), py::arg("Q"), py::arg("Qf"), py::arg("R"),
        py::arg("u_min"), py::arg("u_max"), py::arg("x"), py::arg("x_ref"));

    m.def(
        "train_arma",
        [](const Mat& u, const Mat& y, const Mat& r, Eigen::Index window, const std::string& performance,
           double regularization, std::optional<double> bound) {
            TrainingDataset d{rows(u), rows(y), rows(r), performance_map_by_name(performance), window};
            const auto mats = build_training_matrices(
                d, regularization * Mat::Identity(theta_length(window, u.cols(), y.cols()),
                                                  theta_length(window, u.cols(), y.cols())));
            std::optional<SaturationLimits> lim;
            if (bound) lim = SaturationLimits::symmetric(*bound, u.cols());
            return train_arma(mats, lim);
        },
        py::arg("u"), py::arg("y"), py::arg("r"), py::arg("window"), py::arg("performance") = "tracking_error",
        py::arg("regularization") = 0.0, py::arg("bound") = py::none(),
        "Fit theta from logged samples (one row per sample).");

    py::class_<ArmaController>(m, "ArmaController")
        .def(py::init([](const Vec& theta, Eigen::Index window, Eigen::Index nu, Eigen::Index ny, double bound,
                         const std::string& performance) {
                 return ArmaController(theta, window, nu, ny, SaturationLimits::symmetric(bound, nu),
                                       performance_map_by_name(performance));
             }),
             py::arg("theta"), py::arg("window"), py::arg("nu"), py::arg("ny"), py::arg("bound"),
             py::arg("performance") = "tracking_error")
        .def("step", &ArmaController::step, py::arg("r"), py::arg("y"))
        .def("reset", &ArmaController::reset)
        .def_property_readonly("steps", &ArmaController::steps);

    m.def("membership", [](const std::string& kind, double a, double b, double gamma) {
        if (kind == "ramp_up") return MembershipFunction::ramp_up(a, b)(gamma);
        if (kind == "ramp_down") return MembershipFunction::ramp_down(a, b)(gamma);
        throw py::value_error("kind must be 'ramp_up' or 'ramp_down'");
    });
    m.def("blend", &blend, py::arg("outputs"), py::arg("weights"));

    m.def(
        "run_example",
        [](const std::string& scenario, const std::filesystem::path& out, bool paper_compat) {
            const auto report = run_example(resolve_scenario(scenario, paper_compat), out);
            py::dict d;
            py::list checks;
            for (const auto& c : report.checks) checks.append(py::make_tuple(c.name, c.passed, c.detail));
            d["checks"] = checks;
            d["ok"] = report.ok();
            d["timing_ratio"] = report.bench.ratio;
            d["farma"] = trajectory_dict(report.farma_run);
            py::dict mpc;
            for (const auto& [name, t] : report.mpc_runs) mpc[py::str(name)] = trajectory_dict(t);
            d["mpc"] = mpc;
            return d;
        },
        py::arg("scenario"), py::arg("out"), py::arg("paper_compat") = false,
        "Full pipeline; artifacts are written to `out`.");
}
