#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "farma/nmpc.hpp"
#include "farma/plant.hpp"

namespace farma {

/**
 * Flat key = value text grouped in [sections]. '#' starts a comment.
 * Numeric values accept `pi` factors: "pi/5", "19/20*pi", "-0.5pi".
 */
class ConfigFile {
public:
    static ConfigFile parse(const std::string& text);
    static ConfigFile load(const std::filesystem::path& path);

    bool has(const std::string& section, const std::string& key) const;
    std::vector<std::string> sections() const;

    std::string str(const std::string& section, const std::string& key) const;
    std::string str(const std::string& section, const std::string& key, const std::string& fallback) const;
    double number(const std::string& section, const std::string& key) const;
    double number(const std::string& section, const std::string& key, double fallback) const;
    Vec vector(const std::string& section, const std::string& key) const;
    Vec vector(const std::string& section, const std::string& key, const Vec& fallback) const;
    bool flag(const std::string& section, const std::string& key, bool fallback) const;

private:
    std::map<std::string, std::map<std::string, std::string>> values_;
    std::vector<std::string> order_;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parse one scalar, allowing products/quotients with `pi`.
double parse_scalar(const std::string& token);

struct MpcSpec {
    std::string kind = "linear";  // linear | nonlinear
    int horizon = 10;
    std::string cost = "quadratic";  // quadratic | pendulum_upright (nonlinear only)
    Vec Q;
    Vec Qf;
    Vec R;
    SqpOptions sqp{};
    QpOptions qp{};
};

struct RunSpec {
    std::string name;
    Vec x0;
    double duration = 0.0;
    /// Nonlinear MPC cold start: the first `cold_start_stages` inputs are
    /// `cold_start_value`, the rest zero.
    double cold_start_value = 0.0;
    int cold_start_stages = 0;
};

struct ControllerSpec {
    std::string name;
    std::string source;  // run name
    double t_start = 0.0;
    double t_end = 0.0;
    Eigen::Index window = 1;
    double regularization = 0.0;
    std::string performance = "tracking_error";
    std::string membership = "ramp_up";  // ramp_up | ramp_down
    bool constrained = true;
};

struct ScenarioConfig {
    std::string name;
    std::string plant = "double_integrator";  // double_integrator | cart_pendulum
    CartPendulumParams pendulum{};
    double Ts = 0.01;
    int substeps = 10;
    bool paper_compat = false;
    SaturationLimits limits;
    Vec reference;
    Vec state_reference;
    /// Zero-based output indices compared modulo 2 pi in checks.
    std::vector<Eigen::Index> angle_outputs;

    MpcSpec mpc;
    std::vector<RunSpec> runs;

    std::string decision = "abs_tracking_error";  // abs_tracking_error | abs_wrapped_angle
    Eigen::Index decision_index = 0;
    double breakpoint_lo = 0.0;
    double breakpoint_hi = 1.0;
    std::vector<ControllerSpec> controllers;

    RunSpec evaluation;
    std::string compare_with;  // run name used for deviation and timing

    /// Per-output tolerances on |y(T) - r| (wrapped for angle outputs).
    Vec mpc_final_tol;
    Vec farma_final_tol;
    /// Negative disables the check.
    double farma_max_deviation = -1.0;

    const RunSpec& run(const std::string& name) const;
    /// Throws ConfigError if a slice leaves its source run or names are unknown.
    void validate() const;
};

ScenarioConfig scenario_from_config(const ConfigFile& file);
ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Built-in scenarios, identical to configs/example1.cfg and configs/example2.cfg.
const char* example1_config_text();
const char* example2_config_text();
ScenarioConfig example1_scenario(bool paper_compat = false);
ScenarioConfig example2_scenario();

/// Plant model and the MPC controller factory for a scenario.
PlantModel scenario_plant(const ScenarioConfig& cfg);
LinearMpcConfig scenario_linear_mpc(const ScenarioConfig& cfg);
NmpcConfig scenario_nmpc(const ScenarioConfig& cfg);
Vec scenario_cold_inputs(const ScenarioConfig& cfg, const RunSpec& run);

}  // namespace farma
