#include "farma/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numbers>
#include <sstream>

#include "farma/arma.hpp"

namespace farma {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_atom(std::string a) {
    a = trim(a);
    if (a.empty()) throw ConfigError("empty number");
    double sign = 1.0;
    while (!a.empty() && (a[0] == '-' || a[0] == '+')) {
        if (a[0] == '-') sign = -sign;
        a.erase(0, 1);
    }
    double factor = 1.0;
    if (a.size() >= 2 && a.compare(a.size() - 2, 2, "pi") == 0) {
        factor = std::numbers::pi;
        a.resize(a.size() - 2);
        if (a.empty()) return sign * factor;
    }
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(a, &used);
    } catch (const std::exception&) {
        throw ConfigError("not a number: '" + a + "'");
    }
    if (used != a.size()) throw ConfigError("not a number: '" + a + "'");
    return sign * v * factor;
}

const char kExample1[] = R"(# Setpoint tracking of a double integrator with linear MPC.
[scenario]
name = example1
plant = double_integrator
Ts = 0.01
substeps = 10
u_min = -10
u_max = 10
reference = 2
state_reference = 2 0
paper_compat = false

[mpc]
kind = linear
horizon = 10
Q = 10 10
Qf = 1e5 1e5
R = 1e-2

[run.mpc]
x0 = 0 0
duration = 6

[fuzzy]
decision = abs_tracking_error
breakpoints = 0.4 0.6

# Large tracking error: controller trained on the whole run.
[controller.1]
source = mpc
t_start = 0
t_end = 6
window = 10
regularization = 0
performance = tracking_error
membership = ramp_up

# Near the setpoint: controller trained on the settling part.
[controller.2]
source = mpc
t_start = 1.5
t_end = 6
window = 10
regularization = 0
performance = tracking_error
membership = ramp_down

[evaluation]
x0 = 0 0
duration = 6
compare_with = mpc

[checks]
mpc_final_error = 0.01
farma_final_error = 0.05
farma_max_deviation = 0.2
)";

const char kExample2[] = R"(# Cart-pendulum swing-up with nonlinear MPC.
[scenario]
name = example2
plant = cart_pendulum
Ts = 0.02
substeps = 10
u_min = -30
u_max = 30
reference = 0 0
state_reference = 0 0 0 0
angle_outputs = 2

[plant]
cart_mass = 1
pendulum_mass = 0.2
length = 0.4
gravity = 9.81

[mpc]
kind = nonlinear
horizon = 100
cost = pendulum_upright
Q = 30 20 60 20
Qf = 30 20 60 20
R = 50
sqp_max_iter = 300
sqp_step_tol = 1e-4

[run.swingup]
x0 = 0 0 pi 0
duration = 15
# Gauss-Newton cannot leave the hanging equilibrium from a zero guess.
cold_start_value = 30
cold_start_stages = 25

[run.stabilize]
x0 = 1 0 pi/5 0
duration = 15

[fuzzy]
decision = abs_wrapped_angle
decision_index = 2
breakpoints = pi/3-pi/30 pi/3+pi/30

[controller.1]
source = swingup
t_start = 0
t_end = 2.5
window = 30
regularization = 1e-3
performance = pendulum_swingup
membership = ramp_up

[controller.2]
source = stabilize
t_start = 0
t_end = 15
window = 10
regularization = 1e-8
performance = pendulum_upright
membership = ramp_down

[evaluation]
x0 = 0 0 19/20*pi 0
duration = 15
compare_with = swingup

[checks]
mpc_final_error = 0.1 0.1
farma_final_error = inf 0.1
)";

Mat diag_or_full(const Vec& v, Eigen::Index n, const std::string& what) {
    if (v.size() == n) return v.asDiagonal();
    if (v.size() == 1) return v(0) * Mat::Identity(n, n);
    throw ConfigError(what + ": expected 1 or " + std::to_string(n) + " entries");
}

}  // namespace

double parse_scalar(const std::string& token) {
    // Sums of products: split on +/- that are not signs or exponent markers.
    const std::string t = trim(token);
    std::vector<std::string> terms;
    std::size_t start = 0;
    for (std::size_t i = 1; i < t.size(); ++i) {
        if ((t[i] == '+' || t[i] == '-') && t[i - 1] != 'e' && t[i - 1] != 'E' && t[i - 1] != '*' && t[i - 1] != '/') {
            terms.push_back(t.substr(start, i - start));
            start = i;
        }
    }
    terms.push_back(t.substr(start));

    double total = 0.0;
    for (const auto& term : terms) {
        double value = 1.0;
        char op = '*';
        std::size_t pos = 0;
        while (pos <= term.size()) {
            const auto next = term.find_first_of("*/", pos);
            const double atom = parse_atom(term.substr(pos, next == std::string::npos ? std::string::npos : next - pos));
            value = op == '*' ? value * atom : value / atom;
            if (next == std::string::npos) break;
            op = term[next];
            pos = next + 1;
        }
        total += value;
    }
    return total;
}

ConfigFile ConfigFile::parse(const std::string& text) {
    ConfigFile cfg;
    std::istringstream is(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": unterminated section");
            section = trim(line.substr(1, line.size() - 2));
            if (!cfg.values_.count(section)) cfg.order_.push_back(section);
            cfg.values_[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        cfg.values_[section][trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return cfg;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError(path.string() + ": cannot open");
    std::stringstream ss;
    ss << is.rdbuf();
    try {
        return parse(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
    const auto s = values_.find(section);
    return s != values_.end() && s->second.count(key) > 0;
}

std::vector<std::string> ConfigFile::sections() const { return order_; }

std::string ConfigFile::str(const std::string& section, const std::string& key) const {
    if (!has(section, key)) throw ConfigError("missing [" + section + "] " + key);
    return values_.at(section).at(key);
}

std::string ConfigFile::str(const std::string& section, const std::string& key, const std::string& fallback) const {
    return has(section, key) ? str(section, key) : fallback;
}

double ConfigFile::number(const std::string& section, const std::string& key) const {
    try {
        return parse_scalar(str(section, key));
    } catch (const ConfigError& e) {
        throw ConfigError("[" + section + "] " + key + ": " + e.what());
    }
}

double ConfigFile::number(const std::string& section, const std::string& key, double fallback) const {
    return has(section, key) ? number(section, key) : fallback;
}

Vec ConfigFile::vector(const std::string& section, const std::string& key) const {
    std::istringstream is(str(section, key));
    std::vector<double> vals;
    std::string tok;
    try {
        while (is >> tok) vals.push_back(parse_scalar(tok));
    } catch (const ConfigError& e) {
        throw ConfigError("[" + section + "] " + key + ": " + e.what());
    }
    return Eigen::Map<Vec>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

Vec ConfigFile::vector(const std::string& section, const std::string& key, const Vec& fallback) const {
    return has(section, key) ? vector(section, key) : fallback;
}

bool ConfigFile::flag(const std::string& section, const std::string& key, bool fallback) const {
    if (!has(section, key)) return fallback;
    std::string v = str(section, key);
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
    if (v == "false" || v == "no" || v == "0" || v == "off") return false;
    throw ConfigError("[" + section + "] " + key + ": expected a boolean");
}

const RunSpec& ScenarioConfig::run(const std::string& name) const {
    for (const auto& r : runs)
        if (r.name == name) return r;
    throw ConfigError("unknown run '" + name + "'");
}

void ScenarioConfig::validate() const {
    if (!(Ts > 0.0)) throw ConfigError("Ts must be positive");
    if (runs.empty()) throw ConfigError("no [run.*] sections");
    if (controllers.empty()) throw ConfigError("no [controller.*] sections");
    const double eps = 1e-9 * Ts;
    for (const auto& c : controllers) {
        const RunSpec& src = run(c.source);
        if (c.t_start < -eps || c.t_end > src.duration + eps || c.t_end < c.t_start)
            throw ConfigError("controller " + c.name + ": slice [" + std::to_string(c.t_start) + ", " +
                              std::to_string(c.t_end) + "] is outside run '" + src.name + "'");
        if (c.window < 1) throw ConfigError("controller " + c.name + ": window must be >= 1");
        performance_map_by_name(c.performance);
    }
    if (!compare_with.empty()) run(compare_with);
}

ScenarioConfig scenario_from_config(const ConfigFile& f) {
    ScenarioConfig c;
    c.name = f.str("scenario", "name", "scenario");
    c.plant = f.str("scenario", "plant", c.plant);
    c.Ts = f.number("scenario", "Ts", c.Ts);
    c.substeps = static_cast<int>(f.number("scenario", "substeps", c.substeps));
    c.paper_compat = f.flag("scenario", "paper_compat", false);
    c.limits = SaturationLimits(f.vector("scenario", "u_min"), f.vector("scenario", "u_max"));
    c.reference = f.vector("scenario", "reference");
    c.state_reference = f.vector("scenario", "state_reference");
    for (double i : f.vector("scenario", "angle_outputs", Vec()))
        c.angle_outputs.push_back(static_cast<Eigen::Index>(i) - 1);

    c.pendulum.cart_mass = f.number("plant", "cart_mass", c.pendulum.cart_mass);
    c.pendulum.pendulum_mass = f.number("plant", "pendulum_mass", c.pendulum.pendulum_mass);
    c.pendulum.length = f.number("plant", "length", c.pendulum.length);
    c.pendulum.gravity = f.number("plant", "gravity", c.pendulum.gravity);

    c.mpc.kind = f.str("mpc", "kind", c.mpc.kind);
    c.mpc.horizon = static_cast<int>(f.number("mpc", "horizon"));
    c.mpc.cost = f.str("mpc", "cost", c.mpc.cost);
    c.mpc.Q = f.vector("mpc", "Q");
    c.mpc.Qf = f.vector("mpc", "Qf");
    c.mpc.R = f.vector("mpc", "R");
    c.mpc.sqp.max_iter = static_cast<int>(f.number("mpc", "sqp_max_iter", c.mpc.sqp.max_iter));
    c.mpc.sqp.step_tol = f.number("mpc", "sqp_step_tol", c.mpc.sqp.step_tol);
    c.mpc.qp.tol = f.number("mpc", "qp_tol", c.mpc.qp.tol);
    c.mpc.sqp.qp = c.mpc.qp;

    c.decision = f.str("fuzzy", "decision", c.decision);
    c.decision_index = static_cast<Eigen::Index>(f.number("fuzzy", "decision_index", 1.0)) - 1;
    const Vec bp = f.vector("fuzzy", "breakpoints");
    if (bp.size() != 2 || !(bp(0) < bp(1))) throw ConfigError("[fuzzy] breakpoints: expected two increasing values");
    c.breakpoint_lo = bp(0);
    c.breakpoint_hi = bp(1);

    for (const auto& s : f.sections()) {
        if (s.rfind("run.", 0) == 0) {
            RunSpec r;
            r.name = s.substr(4);
            r.x0 = f.vector(s, "x0");
            r.duration = f.number(s, "duration");
            r.cold_start_value = f.number(s, "cold_start_value", 0.0);
            r.cold_start_stages = static_cast<int>(f.number(s, "cold_start_stages", 0.0));
            c.runs.push_back(std::move(r));
        } else if (s.rfind("controller.", 0) == 0) {
            ControllerSpec k;
            k.name = s.substr(11);
            k.source = f.str(s, "source");
            k.t_start = f.number(s, "t_start");
            k.t_end = f.number(s, "t_end");
            k.window = static_cast<Eigen::Index>(f.number(s, "window"));
            k.regularization = f.number(s, "regularization", 0.0);
            k.performance = f.str(s, "performance", k.performance);
            k.membership = f.str(s, "membership", k.membership);
            k.constrained = f.flag(s, "constrained", true);
            c.controllers.push_back(std::move(k));
        }
    }

    c.evaluation.name = "farma";
    c.evaluation.x0 = f.vector("evaluation", "x0");
    c.evaluation.duration = f.number("evaluation", "duration");
    c.compare_with = f.str("evaluation", "compare_with", c.runs.empty() ? "" : c.runs.front().name);

    c.mpc_final_tol = f.vector("checks", "mpc_final_error", Vec());
    c.farma_final_tol = f.vector("checks", "farma_final_error", Vec());
    c.farma_max_deviation = f.number("checks", "farma_max_deviation", -1.0);

    c.validate();
    return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) { return scenario_from_config(ConfigFile::load(path)); }

const char* example1_config_text() { return kExample1; }
const char* example2_config_text() { return kExample2; }

ScenarioConfig example1_scenario(bool paper_compat) {
    ScenarioConfig c = scenario_from_config(ConfigFile::parse(kExample1));
    c.paper_compat = paper_compat;
    return c;
}

ScenarioConfig example2_scenario() { return scenario_from_config(ConfigFile::parse(kExample2)); }

PlantModel scenario_plant(const ScenarioConfig& cfg) {
    if (cfg.plant == "double_integrator") return double_integrator_model();
    if (cfg.plant == "cart_pendulum") return cart_pendulum_model(cfg.pendulum);
    throw ConfigError("unknown plant '" + cfg.plant + "'");
}

LinearMpcConfig scenario_linear_mpc(const ScenarioConfig& cfg) {
    if (cfg.plant != "double_integrator") throw ConfigError("linear MPC is only available for the double integrator");
    const auto d = exact_discretize_double_integrator(cfg.Ts, cfg.paper_compat);
    LinearMpcConfig m;
    m.A = d.A;
    m.B = d.B;
    m.C = d.C;
    m.horizon = cfg.mpc.horizon;
    m.Q = diag_or_full(cfg.mpc.Q, 2, "[mpc] Q");
    m.Qf = diag_or_full(cfg.mpc.Qf, 2, "[mpc] Qf");
    m.R = diag_or_full(cfg.mpc.R, 1, "[mpc] R");
    m.limits = cfg.limits;
    m.validate();
    return m;
}

NmpcConfig scenario_nmpc(const ScenarioConfig& cfg) {
    NmpcConfig n;
    const PlantModel plant = scenario_plant(cfg);
    if (cfg.plant == "double_integrator") {
        const auto d = exact_discretize_double_integrator(cfg.Ts, cfg.paper_compat);
        n.dynamics = linear_dynamics(d.A, d.B);
    } else {
        n.dynamics = euler_discretize(plant, cfg.Ts, cart_pendulum_jacobian(cfg.pendulum));
    }
    const Mat Q = diag_or_full(cfg.mpc.Q, plant.nx, "[mpc] Q");
    const Mat Qf = diag_or_full(cfg.mpc.Qf, plant.nx, "[mpc] Qf");
    const Mat R = diag_or_full(cfg.mpc.R, plant.nu, "[mpc] R");
    if (cfg.mpc.cost == "quadratic") {
        // Same objective as the condensed linear MPC, whose H carries R once: 1/2 u'Ru.
        n.stage_cost = quadratic_tracking_cost(Q);
        n.terminal_cost = quadratic_tracking_cost(Qf);
        n.input_cost = quadratic_input_cost(0.5 * R);
    } else if (cfg.mpc.cost == "pendulum_upright") {
        n.stage_cost = pendulum_upright_cost(Q);
        n.terminal_cost = pendulum_upright_cost(Qf);
        n.input_cost = quadratic_input_cost(R);
    } else {
        throw ConfigError("unknown [mpc] cost '" + cfg.mpc.cost + "'");
    }
    n.horizon = cfg.mpc.horizon;
    n.limits = cfg.limits;
    n.sqp = cfg.mpc.sqp;
    return n;
}

Vec scenario_cold_inputs(const ScenarioConfig& cfg, const RunSpec& run) {
    const Eigen::Index nu = cfg.limits.dim();
    Vec u = Vec::Zero(nu * cfg.mpc.horizon);
    const Eigen::Index stages = std::clamp<Eigen::Index>(run.cold_start_stages, 0, cfg.mpc.horizon);
    u.head(stages * nu).setConstant(run.cold_start_value);
    return u;
}

}  // namespace farma
