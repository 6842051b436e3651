#include "farma/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"

namespace farma {

namespace fs = std::filesystem;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path mpc_csv(const fs::path& out, const std::string& run) { return out / ("mpc_" + run + ".csv"); }
fs::path arma_csv(const fs::path& out, const std::string& name) { return out / ("arma_" + name + ".csv"); }
fs::path theta_file(const fs::path& out, const std::string& name) { return out / ("theta_" + name + ".txt"); }

Eigen::Index sample_index(double t, double Ts) { return static_cast<Eigen::Index>(std::llround(t / Ts)); }

bool is_angle(const ScenarioConfig& cfg, Eigen::Index i) {
    return std::find(cfg.angle_outputs.begin(), cfg.angle_outputs.end(), i) != cfg.angle_outputs.end();
}

double output_gap(const ScenarioConfig& cfg, Eigen::Index i, double a, double b) {
    return is_angle(cfg, i) ? std::abs(wrap_pi(a - b)) : std::abs(a - b);
}

MembershipFunction membership_for(const ScenarioConfig& cfg, const ControllerSpec& spec) {
    if (spec.membership == "ramp_up") return MembershipFunction::ramp_up(cfg.breakpoint_lo, cfg.breakpoint_hi);
    if (spec.membership == "ramp_down") return MembershipFunction::ramp_down(cfg.breakpoint_lo, cfg.breakpoint_hi);
    throw ConfigError("controller " + spec.name + ": unknown membership '" + spec.membership + "'");
}

DecisionMap decision_for(const ScenarioConfig& cfg) {
    if (cfg.decision == "abs_tracking_error") return abs_tracking_error_decision();
    if (cfg.decision == "abs_wrapped_angle") return abs_wrapped_angle_decision(cfg.decision_index);
    throw ConfigError("unknown [fuzzy] decision '" + cfg.decision + "'");
}

void write_membership_figure(const ScenarioConfig& cfg, const fs::path& path) {
    std::ofstream os(path);
    if (!os) throw IoError(path, "cannot open for writing");
    os << "gamma";
    for (const auto& c : cfg.controllers) os << ",mu_" << c.name;
    os << '\n';
    const double hi = 2.0 * cfg.breakpoint_hi;
    constexpr int points = 201;
    char buf[32];
    for (int i = 0; i < points; ++i) {
        const double g = hi * i / (points - 1);
        std::snprintf(buf, sizeof buf, "%.17g", g);
        os << buf;
        for (const auto& c : cfg.controllers) {
            std::snprintf(buf, sizeof buf, "%.17g", membership_for(cfg, c)(g));
            os << ',' << buf;
        }
        os << '\n';
    }
}

// Outputs and applied inputs of every controller side by side.
void write_comparison_figure(const std::vector<std::pair<std::string, const ClosedLoopTrajectory*>>& series,
                             const fs::path& path) {
    std::ofstream os(path);
    if (!os) throw IoError(path, "cannot open for writing");
    std::size_t n = SIZE_MAX;
    for (const auto& [name, tr] : series) n = std::min(n, tr->size());
    if (series.empty() || n == 0 || n == SIZE_MAX) {
        os << "t\n";
        return;
    }
    const auto& first = series.front().second->records.front();
    os << 't';
    for (const auto& [name, tr] : series) {
        for (Eigen::Index i = 1; i <= first.y.size(); ++i) os << ',' << name << "_y_" << i;
        for (Eigen::Index i = 1; i <= first.u.size(); ++i) os << ',' << name << "_u_" << i;
    }
    os << '\n';
    char buf[32];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << buf;
    };
    for (std::size_t k = 0; k < n; ++k) {
        put(series.front().second->records[k].t);
        for (const auto& [name, tr] : series) {
            const auto& rec = tr->records[k];
            for (Eigen::Index i = 0; i < rec.y.size(); ++i) os << ',', put(rec.y(i));
            for (Eigen::Index i = 0; i < rec.u.size(); ++i) os << ',', put(rec.u(i));
        }
        os << '\n';
    }
}

template <class F>
auto run_stage(const std::string& stage, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

}  // namespace

TimingStats timing_stats(const ClosedLoopTrajectory& traj, std::size_t blocks) {
    TimingStats s;
    if (traj.size() < 2) return s;
    std::vector<double> t;
    t.reserve(traj.size() - 1);
    for (std::size_t k = 1; k < traj.size(); ++k) t.push_back(traj.records[k].controller_seconds);
    s.samples = t.size();
    double total = 0.0;
    for (double v : t) total += v;
    s.mean = total / static_cast<double>(t.size());

    blocks = std::clamp<std::size_t>(blocks, 1, t.size());
    std::vector<double> means;
    for (std::size_t b = 0; b < blocks; ++b) {
        const std::size_t lo = b * t.size() / blocks;
        const std::size_t hi = (b + 1) * t.size() / blocks;
        double sum = 0.0;
        for (std::size_t k = lo; k < hi; ++k) sum += t[k];
        means.push_back(sum / static_cast<double>(hi - lo));
    }
    std::sort(means.begin(), means.end());
    const std::size_t m = means.size();
    s.median_of_means = m % 2 ? means[m / 2] : 0.5 * (means[m / 2 - 1] + means[m / 2]);
    return s;
}

bool ExampleReport::ok() const {
    return std::all_of(checks.begin(), checks.end(), [](const StageCheck& c) { return c.passed; });
}

const ClosedLoopTrajectory& ExampleReport::mpc_run(const std::string& name) const {
    for (const auto& [n, t] : mpc_runs)
        if (n == name) return t;
    throw std::out_of_range("no MPC run named '" + name + "'");
}

TrainingDataset slice_dataset(const ClosedLoopTrajectory& traj, double t_start, double t_end, Eigen::Index window,
                              PerformanceMap performance) {
    if (!(traj.Ts > 0.0)) throw std::invalid_argument("slice_dataset: trajectory has no sample time");
    const Eigen::Index first = sample_index(t_start, traj.Ts);
    const Eigen::Index last = sample_index(t_end, traj.Ts);
    if (first < 0 || last >= static_cast<Eigen::Index>(traj.size()) || last < first)
        throw std::out_of_range("slice_dataset: [" + std::to_string(t_start) + ", " + std::to_string(t_end) +
                                "] is outside the logged run");
    TrainingDataset d;
    d.window = window;
    d.performance = std::move(performance);
    for (Eigen::Index k = first; k <= last; ++k) {
        const auto& rec = traj.records[static_cast<std::size_t>(k)];
        d.u.push_back(rec.u);
        d.y.push_back(rec.y);
        d.r.push_back(rec.r);
    }
    return d;
}

ClosedLoopTrajectory run_mpc(const ScenarioConfig& cfg, const RunSpec& run) {
    const PlantModel plant = scenario_plant(cfg);
    const SimulationOptions opts{cfg.Ts, run.duration, cfg.substeps};
    const auto reference = constant_reference(cfg.reference, cfg.state_reference);
    if (cfg.mpc.kind == "linear") {
        LinearMpcController ctl(scenario_linear_mpc(cfg), cfg.mpc.qp);
        const StepController law = [&](std::size_t, const Vec&, const Vec&, const Vec& x, const Vec& xr) {
            return ctl.step(x, xr);
        };
        return simulate_closed_loop(plant, law, cfg.limits, run.x0, reference, opts);
    }
    if (cfg.mpc.kind == "nonlinear") {
        NmpcController ctl(scenario_nmpc(cfg), scenario_cold_inputs(cfg, run));
        const StepController law = [&](std::size_t, const Vec&, const Vec&, const Vec& x, const Vec& xr) {
            return ctl.step(x, xr);
        };
        return simulate_closed_loop(plant, law, cfg.limits, run.x0, reference, opts);
    }
    throw ConfigError("unknown [mpc] kind '" + cfg.mpc.kind + "'");
}

TrainedController train_controller(const ScenarioConfig& cfg, const ControllerSpec& spec,
                                   const ClosedLoopTrajectory& source) {
    const TrainingDataset data =
        slice_dataset(source, spec.t_start, spec.t_end, spec.window, performance_map_by_name(spec.performance));
    const Eigen::Index nu = data.u.front().size();
    const Eigen::Index ny = data.y.front().size();
    const Eigen::Index ntheta = theta_length(spec.window, nu, ny);
    const TrainingMatrices mats =
        build_training_matrices(data, Mat(spec.regularization * Mat::Identity(ntheta, ntheta)));

    TrainedController t;
    t.spec = spec;
    t.samples = data.size();
    t.bundle.window = spec.window;
    t.bundle.nu = nu;
    t.bundle.ny = ny;
    t.bundle.theta = spec.constrained ? train_arma(mats, cfg.limits, cfg.mpc.qp) : train_arma(mats);
    return t;
}

ArmaController make_arma(const ScenarioConfig& cfg, const TrainedController& t) {
    return ArmaController(t.bundle.theta, t.bundle.window, t.bundle.nu, t.bundle.ny, cfg.limits,
                          performance_map_by_name(t.spec.performance));
}

FarmaController make_farma(const ScenarioConfig& cfg, const std::vector<TrainedController>& trained) {
    std::vector<ArmaController> members;
    std::vector<FuzzyRule> rules;
    for (std::size_t i = 0; i < trained.size(); ++i) {
        members.push_back(make_arma(cfg, trained[i]));
        rules.push_back(FuzzyRule{{membership_for(cfg, trained[i].spec)}, i});
    }
    return FarmaController(std::move(members), std::move(rules), decision_for(cfg), cfg.limits);
}

ClosedLoopTrajectory run_output_feedback(const ScenarioConfig& cfg, const RunSpec& run,
                                         const std::function<Vec(const Vec& r, const Vec& y)>& law) {
    const StepController step = [&](std::size_t, const Vec& r, const Vec& y, const Vec&, const Vec&) {
        return law(r, y);
    };
    return simulate_closed_loop(scenario_plant(cfg), step, cfg.limits, run.x0,
                                constant_reference(cfg.reference, cfg.state_reference),
                                SimulationOptions{cfg.Ts, run.duration, cfg.substeps});
}

double max_output_deviation(const ScenarioConfig& cfg, const ClosedLoopTrajectory& a, const ClosedLoopTrajectory& b) {
    double worst = 0.0;
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t k = 0; k < n; ++k)
        for (Eigen::Index i = 0; i < a.records[k].y.size(); ++i)
            worst = std::max(worst, output_gap(cfg, i, a.records[k].y(i), b.records[k].y(i)));
    return worst;
}

Vec final_error(const ScenarioConfig& cfg, const ClosedLoopTrajectory& traj) {
    if (traj.empty()) return Vec();
    const auto& rec = traj.records.back();
    Vec e(rec.y.size());
    for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = output_gap(cfg, i, rec.y(i), rec.r(i));
    return e;
}

double limit_excess(const SaturationLimits& limits, const ClosedLoopTrajectory& traj, bool requested) {
    double worst = 0.0;
    for (const auto& rec : traj.records) {
        const Vec& u = requested ? rec.u_requested : rec.u;
        worst = std::max({worst, (u - limits.u_max).maxCoeff(), (limits.u_min - u).maxCoeff()});
    }
    return worst;
}

std::vector<std::pair<std::string, ClosedLoopTrajectory>> stage_mpc(const ScenarioConfig& cfg, const fs::path& out) {
    return run_stage("mpc", [&] {
        fs::create_directories(out);
        std::vector<std::pair<std::string, ClosedLoopTrajectory>> runs;
        for (const auto& run : cfg.runs) {
            try {
                runs.emplace_back(run.name, run_mpc(cfg, run));
            } catch (const SimulationAborted& e) {
                export_csv(e.partial(), mpc_csv(out, run.name));
                throw StageError("mpc", "run '" + run.name + "': " + e.what());
            }
            export_csv(runs.back().second, mpc_csv(out, run.name));
        }
        return runs;
    });
}

std::vector<TrainedController> stage_train(const ScenarioConfig& cfg, const fs::path& out) {
    return run_stage("train", [&] {
        std::vector<TrainedController> trained;
        for (const auto& spec : cfg.controllers) {
            const ClosedLoopTrajectory source = import_csv(mpc_csv(out, spec.source));
            try {
                trained.push_back(train_controller(cfg, spec, source));
            } catch (const std::exception& e) {
                throw StageError("train", "controller " + spec.name + ": " + e.what());
            }
            write_bundle(trained.back().bundle, theta_file(out, spec.name));
        }
        return trained;
    });
}

void stage_farma(const ScenarioConfig& cfg, const fs::path& out, ExampleReport& report) {
    run_stage("farma", [&] {
        if (report.controllers.empty()) {
            for (const auto& spec : cfg.controllers) {
                TrainedController t;
                t.spec = spec;
                t.bundle = read_bundle(theta_file(out, spec.name));
                report.controllers.push_back(std::move(t));
            }
        }
        // Sequential on purpose: concurrent runs would distort the per-step timings.
        report.arma_runs.clear();
        for (const auto& t : report.controllers) {
            ArmaController arma = make_arma(cfg, t);
            ClosedLoopTrajectory traj;
            try {
                traj = run_output_feedback(cfg, cfg.evaluation, [&](const Vec& r, const Vec& y) { return arma.step(r, y); });
            } catch (const SimulationAborted& e) {
                export_csv(e.partial(), arma_csv(out, t.spec.name));
                throw;
            }
            export_csv(traj, arma_csv(out, t.spec.name));
            report.arma_runs.emplace_back(t.spec.name, std::move(traj));
        }
        FarmaController farma = make_farma(cfg, report.controllers);
        try {
            report.farma_run =
                run_output_feedback(cfg, cfg.evaluation, [&](const Vec& r, const Vec& y) { return farma.step(r, y); });
        } catch (const SimulationAborted& e) {
            export_csv(e.partial(), out / "farma.csv");
            throw;
        }
        export_csv(report.farma_run, out / "farma.csv");

        write_membership_figure(cfg, out / "fig_membership.csv");
        std::vector<std::pair<std::string, const ClosedLoopTrajectory*>> series;
        std::optional<ClosedLoopTrajectory> loaded;
        if (!cfg.compare_with.empty()) {
            const ClosedLoopTrajectory* mpc = nullptr;
            for (const auto& [n, tr] : report.mpc_runs)
                if (n == cfg.compare_with) mpc = &tr;
            if (!mpc && fs::exists(mpc_csv(out, cfg.compare_with))) {
                loaded = import_csv(mpc_csv(out, cfg.compare_with));
                mpc = &*loaded;
            }
            if (mpc) series.emplace_back("mpc", mpc);
        }
        for (const auto& [n, tr] : report.arma_runs) series.emplace_back("arma_" + n, &tr);
        series.emplace_back("farma", &report.farma_run);
        write_comparison_figure(series, out / "fig_comparison.csv");
        return 0;
    });
}

BenchReport stage_bench(const ScenarioConfig& cfg, const fs::path& out) {
    return run_stage("bench", [&] {
        BenchReport b;
        b.mpc = timing_stats(import_csv(mpc_csv(out, cfg.compare_with)));
        b.farma = timing_stats(import_csv(out / "farma.csv"));
        b.ratio = b.farma.median_of_means > 0.0 ? b.mpc.median_of_means / b.farma.median_of_means : 0.0;
        return b;
    });
}

void evaluate_checks(const ScenarioConfig& cfg, ExampleReport& report) {
    report.checks.clear();
    char buf[160];
    auto tol_check = [&](const std::string& name, const Vec& err, const Vec& tol) {
        if (tol.size() == 0 || err.size() == 0) return;
        bool ok = true;
        std::string detail = "|y(T)-r| =";
        for (Eigen::Index i = 0; i < err.size(); ++i) {
            const double t = tol.size() == 1 ? tol(0) : tol(std::min(i, tol.size() - 1));
            ok = ok && err(i) <= t;
            std::snprintf(buf, sizeof buf, " %.3g (tol %.3g)", err(i), t);
            detail += buf;
        }
        report.checks.push_back({name, ok, detail});
    };

    for (const auto& [name, traj] : report.mpc_runs) {
        tol_check("mpc." + name + ".final_error", final_error(cfg, traj), cfg.mpc_final_tol);
        const double ex = limit_excess(cfg.limits, traj, false);
        std::snprintf(buf, sizeof buf, "max excess %.3g", ex);
        report.checks.push_back({"mpc." + name + ".input_limits", ex <= 1e-9, buf});
    }
    if (!report.farma_run.empty()) {
        tol_check("farma.final_error", final_error(cfg, report.farma_run), cfg.farma_final_tol);
        const double ex = limit_excess(cfg.limits, report.farma_run, true);
        std::snprintf(buf, sizeof buf, "max requested excess %.3g", ex);
        report.checks.push_back({"farma.input_limits", ex <= 1e-9, buf});
        if (cfg.farma_max_deviation >= 0.0) {
            const ClosedLoopTrajectory* mpc = nullptr;
            for (const auto& [n, tr] : report.mpc_runs)
                if (n == cfg.compare_with) mpc = &tr;
            if (mpc) {
                const double dev = max_output_deviation(cfg, report.farma_run, *mpc);
                std::snprintf(buf, sizeof buf, "max |y_farma - y_mpc| = %.4g (tol %.3g)", dev, cfg.farma_max_deviation);
                report.checks.push_back({"farma.deviation_from_mpc", dev <= cfg.farma_max_deviation, buf});
            }
        }
    }
}

ExampleReport run_example(const ScenarioConfig& cfg, const fs::path& out) {
    ExampleReport report;
    report.scenario = cfg.name;
    fs::create_directories(out);

    auto t0 = std::chrono::steady_clock::now();
    report.mpc_runs = stage_mpc(cfg, out);
    report.stage_seconds.push_back(seconds_since(t0));

    t0 = std::chrono::steady_clock::now();
    report.controllers = stage_train(cfg, out);
    report.stage_seconds.push_back(seconds_since(t0));

    t0 = std::chrono::steady_clock::now();
    stage_farma(cfg, out, report);
    report.stage_seconds.push_back(seconds_since(t0));

    report.bench = stage_bench(cfg, out);
    evaluate_checks(cfg, report);
    write_summary(cfg, report, out / "summary.json");
    return report;
}

void write_summary(const ScenarioConfig& cfg, const ExampleReport& report, const fs::path& path) {
    using nlohmann::json;
    auto traj_json = [&](const ClosedLoopTrajectory& t) {
        json j;
        j["samples"] = t.size();
        if (!t.empty()) {
            const auto& last = t.records.back();
            j["final_y"] = std::vector<double>(last.y.data(), last.y.data() + last.y.size());
            double umax = 0.0;
            for (const auto& r : t.records) umax = std::max(umax, r.u.cwiseAbs().maxCoeff());
            j["max_abs_u"] = umax;
            const Vec err = final_error(cfg, t);
            j["final_error"] = std::vector<double>(err.data(), err.data() + err.size());
        }
        const TimingStats s = timing_stats(t);
        j["mean_step_seconds"] = s.mean;
        j["median_of_means_step_seconds"] = s.median_of_means;
        return j;
    };

    json j;
    j["scenario"] = report.scenario;
    j["paper_compat"] = cfg.paper_compat;
    for (const auto& [n, t] : report.mpc_runs) j["mpc"][n] = traj_json(t);
    for (const auto& c : report.controllers) {
        json cj;
        cj["window"] = c.bundle.window;
        cj["theta_length"] = c.bundle.theta.size();
        cj["samples"] = c.samples;
        j["controllers"][c.spec.name] = cj;
    }
    for (const auto& [n, t] : report.arma_runs) j["arma"][n] = traj_json(t);
    if (!report.farma_run.empty()) j["farma"] = traj_json(report.farma_run);
    j["bench"] = {{"mpc_step_seconds", report.bench.mpc.median_of_means},
                  {"farma_step_seconds", report.bench.farma.median_of_means},
                  {"ratio", report.bench.ratio}};
    for (const auto& c : report.checks) j["checks"].push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    j["passed"] = report.ok();

    std::ofstream os(path);
    if (!os) throw IoError(path, "cannot open for writing");
    os << j.dump(2) << '\n';
}

}  // namespace farma
