#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "farma/experiments.hpp"

using namespace farma;
using std::numbers::pi;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "farma_test_io";
    fs::create_directories(dir);
    return dir / name;
}

ClosedLoopTrajectory awkward_trajectory() {
    ClosedLoopTrajectory t;
    t.Ts = 0.1;
    for (int k = 0; k < 4; ++k) {
        StepRecord r;
        r.t = 0.1 * k;
        r.r = Vec::Constant(2, 1.0 / 3.0);
        r.y = Vec::Constant(2, std::nextafter(1.0, 2.0) * k);
        r.x = Vec::Constant(3, -pi * k);
        r.u_requested = Vec::Constant(1, 1e-300 * k);
        r.u = Vec::Constant(1, 12345.678901234567);
        r.controller_seconds = 1.25e-6;
        t.records.push_back(r);
    }
    return t;
}

}  // namespace

TEST_CASE("trajectory CSV round trip is bit exact") {
    const auto t = awkward_trajectory();
    std::stringstream ss;
    write_trajectory_csv(ss, t);
    std::string header;
    std::getline(std::stringstream(ss.str()), header);
    CHECK(header == "t,r_1,r_2,y_1,y_2,x_1,x_2,x_3,ur_1,u_1,ctrl_time_s");

    const auto back = read_trajectory_csv(ss);
    REQUIRE(back.size() == t.size());
    CHECK(back.Ts == doctest::Approx(0.1));
    for (std::size_t k = 0; k < t.size(); ++k) {
        CHECK(back.records[k].t == t.records[k].t);
        CHECK(back.records[k].r == t.records[k].r);
        CHECK(back.records[k].y == t.records[k].y);
        CHECK(back.records[k].x == t.records[k].x);
        CHECK(back.records[k].u_requested == t.records[k].u_requested);
        CHECK(back.records[k].u == t.records[k].u);
        CHECK(back.records[k].controller_seconds == t.records[k].controller_seconds);
    }
}

TEST_CASE("empty trajectory writes only a header") {
    std::stringstream ss;
    write_trajectory_csv(ss, {});
    CHECK(ss.str() == "t,ctrl_time_s\n");
}

TEST_CASE("malformed CSV is rejected") {
    std::stringstream a("x,y\n1,2\n");
    CHECK_THROWS(read_trajectory_csv(a));
    std::stringstream b("t,r_1,y_1,x_1,ur_1,u_1,ctrl_time_s\n0,1,2\n");
    CHECK_THROWS(read_trajectory_csv(b));
    CHECK_THROWS_AS(import_csv(scratch("does_not_exist.csv")), IoError);
}

TEST_CASE("example MPC log has one line per sample plus header") {
    const auto cfg = example1_scenario();
    const auto traj = run_mpc(cfg, cfg.run("mpc"));
    const auto path = scratch("mpc.csv");
    export_csv(traj, path);
    std::ifstream in(path);
    std::size_t lines = 0;
    for (std::string l; std::getline(in, l);) ++lines;
    CHECK(lines == 602);
}

TEST_CASE("coefficient bundle round trip") {
    CoefficientBundle b{2, 1, 2, Vec::LinSpaced(6, -1.0 / 7.0, 5.5)};
    const auto path = scratch("theta.txt");
    write_bundle(b, path);
    std::ifstream in(path);
    std::string first;
    std::getline(in, first);
    CHECK(first == "lw,lu,ly");
    const auto back = read_bundle(path);
    CHECK(back.window == 2);
    CHECK(back.nu == 1);
    CHECK(back.ny == 2);
    CHECK(back.theta == b.theta);

    CHECK_THROWS(write_bundle({2, 1, 2, Vec::Zero(5)}, scratch("bad.txt")));
    std::ofstream(scratch("trunc.txt")) << "lw,lu,ly\n2,1,2\n0.5\n";
    CHECK_THROWS_AS(read_bundle(scratch("trunc.txt")), IoError);
}

TEST_CASE("scalar parsing understands pi") {
    CHECK(parse_scalar("2.5") == 2.5);
    CHECK(parse_scalar("pi") == doctest::Approx(pi));
    CHECK(parse_scalar("pi/5") == doctest::Approx(pi / 5));
    CHECK(parse_scalar("19/20*pi") == doctest::Approx(19.0 / 20.0 * pi));
    CHECK(parse_scalar("-0.5pi") == doctest::Approx(-0.5 * pi));
    CHECK(parse_scalar("pi/3-pi/30") == doctest::Approx(pi / 3 - pi / 30));
    CHECK(std::isinf(parse_scalar("inf")));
    CHECK_THROWS_AS(parse_scalar("two"), ConfigError);
    CHECK_THROWS_AS(parse_scalar(""), ConfigError);
}

TEST_CASE("config file sections and lookups") {
    const auto f = ConfigFile::parse("# comment\n[a]\nx = 1 2 3  # trailing\nname = hello\n[b.c]\nflag = true\n");
    CHECK(f.sections() == std::vector<std::string>{"a", "b.c"});
    CHECK(f.vector("a", "x").size() == 3);
    CHECK(f.str("a", "name") == "hello");
    CHECK(f.flag("b.c", "flag", false));
    CHECK(f.number("a", "missing", 4.0) == 4.0);
    CHECK_THROWS_AS(f.number("a", "missing"), ConfigError);
    CHECK_THROWS_AS(ConfigFile::parse("[open\n"), ConfigError);
    CHECK_THROWS_AS(ConfigFile::parse("[a]\nnovalue\n"), ConfigError);
}

TEST_CASE("shipped configs match the built-in scenarios") {
    for (const auto& [file, text] : {std::pair{"example1.cfg", example1_config_text()},
                                     std::pair{"example2.cfg", example2_config_text()}}) {
        std::ifstream in(fs::path(FARMA_SOURCE_DIR) / "configs" / file);
        REQUIRE(in);
        std::stringstream ss;
        ss << in.rdbuf();
        CHECK(ss.str() == std::string(text));
    }
}

TEST_CASE("scenario validation") {
    CHECK_THROWS_AS(load_scenario(fs::path(FARMA_SOURCE_DIR) / "tests/data/bad.cfg"), ConfigError);
    const auto e2 = example2_scenario();
    CHECK(e2.angle_outputs == std::vector<Eigen::Index>{1});
    CHECK(e2.run("swingup").cold_start_stages == 25);
    CHECK(e2.run("stabilize").cold_start_stages == 0);
    CHECK(e2.evaluation.x0(2) == doctest::Approx(0.95 * pi));
    CHECK_THROWS_AS(e2.run("nope"), ConfigError);
}
