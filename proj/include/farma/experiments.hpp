#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "farma/csv_io.hpp"
#include "farma/fuzzy.hpp"
#include "farma/scenario.hpp"
#include "farma/trainer.hpp"

namespace farma {

/// Failure of one pipeline stage ("mpc", "train", "farma", "bench").
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& what)
        : std::runtime_error("stage '" + stage + "' failed: " + what), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

struct StageCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Per-step controller time statistics, warm-up step excluded.
struct TimingStats {
    double mean = 0.0;
    double median_of_means = 0.0;
    std::size_t samples = 0;
};

/// Splits the per-step times (minus step 0) into `blocks` consecutive
/// blocks and reports the median of the block means.
TimingStats timing_stats(const ClosedLoopTrajectory& traj, std::size_t blocks = 10);

struct TrainedController {
    ControllerSpec spec;
    CoefficientBundle bundle;
    std::size_t samples = 0;
};

struct BenchReport {
    TimingStats mpc;
    TimingStats farma;
    double ratio = 0.0;  // median-of-means MPC / F-ARMA
};

struct ExampleReport {
    std::string scenario;
    std::vector<std::pair<std::string, ClosedLoopTrajectory>> mpc_runs;
    std::vector<TrainedController> controllers;
    std::vector<std::pair<std::string, ClosedLoopTrajectory>> arma_runs;
    ClosedLoopTrajectory farma_run;
    BenchReport bench;
    std::vector<StageCheck> checks;
    std::vector<double> stage_seconds;  // mpc, train, farma

    bool ok() const;
    const ClosedLoopTrajectory& mpc_run(const std::string& name) const;
};

/// Samples k with t_start <= k Ts <= t_end (inclusive endpoints).
TrainingDataset slice_dataset(const ClosedLoopTrajectory& traj, double t_start, double t_end,
                              Eigen::Index window, PerformanceMap performance);

/// Closed-loop MPC run (linear or nonlinear per the scenario).
ClosedLoopTrajectory run_mpc(const ScenarioConfig& cfg, const RunSpec& run);

TrainedController train_controller(const ScenarioConfig& cfg, const ControllerSpec& spec,
                                   const ClosedLoopTrajectory& source);

ArmaController make_arma(const ScenarioConfig& cfg, const TrainedController& trained);
FarmaController make_farma(const ScenarioConfig& cfg, const std::vector<TrainedController>& trained);

/// Output-feedback run of any controller from the scenario's evaluation state.
ClosedLoopTrajectory run_output_feedback(const ScenarioConfig& cfg, const RunSpec& run,
                                         const std::function<Vec(const Vec& r, const Vec& y)>& law);

/// max_k |y_a,k - y_b,k| over the common prefix (wrapped for angle outputs).
double max_output_deviation(const ScenarioConfig& cfg, const ClosedLoopTrajectory& a, const ClosedLoopTrajectory& b);
/// Per-output |y(T) - r(T)| (wrapped for angle outputs).
Vec final_error(const ScenarioConfig& cfg, const ClosedLoopTrajectory& traj);
/// max_k max_i |u_requested| excess over the limits (0 when all inside).
double limit_excess(const SaturationLimits& limits, const ClosedLoopTrajectory& traj, bool requested);

// Pipeline stages. Each reads its inputs from and writes its artifacts to `out`.
std::vector<std::pair<std::string, ClosedLoopTrajectory>> stage_mpc(const ScenarioConfig& cfg,
                                                                     const std::filesystem::path& out);
std::vector<TrainedController> stage_train(const ScenarioConfig& cfg, const std::filesystem::path& out);
void stage_farma(const ScenarioConfig& cfg, const std::filesystem::path& out, ExampleReport& report);
BenchReport stage_bench(const ScenarioConfig& cfg, const std::filesystem::path& out);

/// Fill report.checks from the trajectories present in the report.
void evaluate_checks(const ScenarioConfig& cfg, ExampleReport& report);

/// Whole pipeline: MPC runs, training, ARMA/F-ARMA runs, figure data,
/// timing and summary.json.
ExampleReport run_example(const ScenarioConfig& cfg, const std::filesystem::path& out);

void write_summary(const ScenarioConfig& cfg, const ExampleReport& report, const std::filesystem::path& path);

}  // namespace farma
