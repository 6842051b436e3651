// farma: run the MPC -> ARMA -> F-ARMA pipeline from a scenario file.
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "farma/experiments.hpp"

namespace fs = std::filesystem;
using namespace farma;

namespace {

struct Args {
    std::string config;
    std::string out = "out";
    bool paper_compat = false;
};

ScenarioConfig load(const Args& a, const char* builtin) {
    ScenarioConfig cfg;
    if (!a.config.empty())
        cfg = load_scenario(a.config);
    else if (builtin)
        cfg = scenario_from_config(ConfigFile::parse(builtin));
    else
        throw ConfigError("--config is required for this subcommand");
    if (a.paper_compat) cfg.paper_compat = true;
    return cfg;
}

int report_checks(const std::vector<StageCheck>& checks) {
    bool ok = true;
    for (const auto& c : checks) {
        std::printf("[%s] %s: %s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
        ok = ok && c.passed;
    }
    return ok ? 0 : 1;
}

void print_bench(const BenchReport& b) {
    std::printf("mpc   step time: %.3e s (mean %.3e s, %zu steps)\n", b.mpc.median_of_means, b.mpc.mean, b.mpc.samples);
    std::printf("farma step time: %.3e s (mean %.3e s, %zu steps)\n", b.farma.median_of_means, b.farma.mean,
                b.farma.samples);
    std::printf("ratio: %.1f\n", b.ratio);
}

int run_full(const Args& a, const char* builtin) {
    const ScenarioConfig cfg = load(a, builtin);
    const ExampleReport rep = run_example(cfg, a.out);
    for (const auto& c : rep.controllers)
        std::printf("controller %s: %zu samples, %ld coefficients\n", c.spec.name.c_str(), c.samples,
                    static_cast<long>(c.bundle.theta.size()));
    print_bench(rep.bench);
    return report_checks(rep.checks);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MPC distillation into fuzzy-blended ARMA controllers"};
    app.require_subcommand(1);
    Args args;

    auto add = [&](const std::string& name, const std::string& help) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", args.config, "scenario file")->check(CLI::ExistingFile);
        sub->add_option("--out", args.out, "output directory")->capture_default_str();
        sub->add_flag("--paper-compat", args.paper_compat, "use B = [Ts^2; Ts] for the double integrator");
        return sub;
    };
    CLI::App* ex1 = add("example1", "double-integrator setpoint tracking, end to end");
    CLI::App* ex2 = add("example2", "cart-pendulum swing-up, end to end");
    CLI::App* sim_mpc = add("sim-mpc", "closed-loop MPC runs -> mpc_<run>.csv");
    CLI::App* train = add("train", "fit ARMA controllers from mpc_<run>.csv -> theta_<name>.txt");
    CLI::App* sim_farma = add("sim-farma", "ARMA and F-ARMA runs from theta_<name>.txt");
    CLI::App* bench = add("bench", "per-step controller timing from the exported runs");

    CLI11_PARSE(app, argc, argv);

    try {
        if (ex1->parsed()) return run_full(args, example1_config_text());
        if (ex2->parsed()) return run_full(args, example2_config_text());

        const ScenarioConfig cfg = load(args, nullptr);
        fs::create_directories(args.out);
        if (sim_mpc->parsed()) {
            ExampleReport rep;
            rep.mpc_runs = stage_mpc(cfg, args.out);
            evaluate_checks(cfg, rep);
            return report_checks(rep.checks);
        }
        if (train->parsed()) {
            for (const auto& t : stage_train(cfg, args.out))
                std::printf("controller %s: %zu samples, %ld coefficients\n", t.spec.name.c_str(), t.samples,
                            static_cast<long>(t.bundle.theta.size()));
            return 0;
        }
        if (sim_farma->parsed()) {
            ExampleReport rep;
            stage_farma(cfg, args.out, rep);
            const fs::path mpc = fs::path(args.out) / ("mpc_" + cfg.compare_with + ".csv");
            if (fs::exists(mpc)) rep.mpc_runs.emplace_back(cfg.compare_with, import_csv(mpc));
            evaluate_checks(cfg, rep);
            std::erase_if(rep.checks, [](const StageCheck& c) { return c.name.rfind("mpc.", 0) == 0; });
            return report_checks(rep.checks);
        }
        if (bench->parsed()) {
            print_bench(stage_bench(cfg, args.out));
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
