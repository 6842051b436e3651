#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "farma/experiments.hpp"

using namespace farma;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "farma_test_experiments" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

/// CSV text with the timing column dropped.
std::string without_timing(const ClosedLoopTrajectory& t) {
    std::stringstream in, out;
    write_trajectory_csv(in, t);
    for (std::string line; std::getline(in, line);) out << line.substr(0, line.rfind(',')) << '\n';
    return out.str();
}

ClosedLoopTrajectory blank(double Ts, double duration) {
    ClosedLoopTrajectory t;
    t.Ts = Ts;
    const auto n = static_cast<std::size_t>(std::llround(duration / Ts)) + 1;
    for (std::size_t k = 0; k < n; ++k) {
        StepRecord r;
        r.t = static_cast<double>(k) * Ts;
        r.r = r.y = Vec::Zero(1);
        r.x = Vec::Zero(2);
        r.u = r.u_requested = Vec::Constant(1, static_cast<double>(k));
        t.records.push_back(r);
    }
    return t;
}

}  // namespace

TEST_CASE("closed-loop runs are deterministic") {
    const auto cfg = example1_scenario();
    const auto a = run_mpc(cfg, cfg.run("mpc"));
    const auto b = run_mpc(cfg, cfg.run("mpc"));
    CHECK(without_timing(a) == without_timing(b));
}

TEST_CASE("training slices include both endpoints") {
    const auto d1 = blank(0.01, 6.0);
    CHECK(slice_dataset(d1, 0.0, 6.0, 10, tracking_error_map()).size() == 601);
    const auto s = slice_dataset(d1, 1.5, 6.0, 10, tracking_error_map());
    CHECK(s.size() == 451);
    CHECK(s.u.front()(0) == 150);

    const auto d2 = blank(0.02, 15.0);
    CHECK(slice_dataset(d2, 0.0, 2.5, 30, tracking_error_map()).size() == 126);
    CHECK(slice_dataset(d2, 0.0, 15.0, 10, tracking_error_map()).size() == 751);
}

TEST_CASE("timing statistics skip the first step") {
    auto t = blank(0.01, 0.2);  // 21 records, 20 after warm-up
    for (auto& r : t.records) r.controller_seconds = 1.0;
    t.records[0].controller_seconds = 1e3;
    t.records[5].controller_seconds = 1e3;  // one outlier block
    const auto s = timing_stats(t, 10);
    CHECK(s.samples == 20);
    CHECK(s.median_of_means == doctest::Approx(1.0));
    CHECK(s.mean > 1.0);
}

TEST_CASE("metrics") {
    auto cfg = example2_scenario();
    ClosedLoopTrajectory a, b;
    StepRecord r;
    r.r = Vec::Zero(2);
    r.y = Eigen::Vector2d(0.1, 3.1);
    r.u = r.u_requested = Vec::Constant(1, 35);
    a.records.push_back(r);
    r.y = Eigen::Vector2d(0.3, -3.1);
    r.u_requested = Vec::Constant(1, -20);
    b.records.push_back(r);
    CHECK(max_output_deviation(cfg, a, b) == doctest::Approx(0.2));
    const Vec fe = final_error(cfg, a);
    CHECK(fe(1) == doctest::Approx(3.1));
    CHECK(limit_excess(cfg.limits, a, true) == doctest::Approx(5.0));
    CHECK(limit_excess(cfg.limits, b, true) == 0.0);
}

TEST_CASE("pipeline stages communicate through files") {
    const auto cfg = example1_scenario();
    const auto out = fresh_dir("stages");

    CHECK_THROWS_AS(stage_train(cfg, out), StageError);

    const auto runs = stage_mpc(cfg, out);
    REQUIRE(runs.size() == 1);
    CHECK(fs::exists(out / "mpc_mpc.csv"));

    const auto trained = stage_train(cfg, out);
    REQUIRE(trained.size() == 2);
    CHECK(trained[0].bundle.theta.size() == 20);
    CHECK(trained[0].samples == 601);
    CHECK(trained[1].samples == 451);
    // Training from the file equals training from memory.
    const auto direct = train_controller(cfg, cfg.controllers[0], runs[0].second);
    CHECK(direct.bundle.theta == trained[0].bundle.theta);

    ExampleReport report;
    stage_farma(cfg, out, report);
    for (const char* f : {"theta_1.txt", "theta_2.txt", "arma_1.csv", "arma_2.csv", "farma.csv", "fig_membership.csv",
                          "fig_comparison.csv"})
        CHECK_MESSAGE(fs::exists(out / f), f);
    CHECK(report.farma_run.size() == 601);

    const auto bench = stage_bench(cfg, out);
    CHECK(bench.ratio > 1.0);
}

TEST_CASE("whole example writes a summary") {
    const auto out = fresh_dir("full");
    const auto report = run_example(example1_scenario(), out);
    CHECK(fs::exists(out / "summary.json"));
    CHECK(report.mpc_run("mpc").size() == 601);
    CHECK(!report.checks.empty());
    bool saw_mpc_check = false;
    for (const auto& c : report.checks)
        if (c.name == "mpc.mpc.final_error") saw_mpc_check = c.passed;
    CHECK(saw_mpc_check);
}
