#include "farma/csv_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "farma/arma.hpp"

namespace farma {

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, sep)) out.push_back(cur);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

double parse_double(const std::string& s) {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() && s.find_first_not_of(" \t\r", used) != std::string::npos)
        throw std::invalid_argument("bad number '" + s + "'");
    return v;
}

Eigen::Index count_prefix(const std::vector<std::string>& header, const std::string& prefix) {
    Eigen::Index n = 0;
    for (const auto& h : header)
        if (h.rfind(prefix, 0) == 0) ++n;
    return n;
}

}  // namespace

void write_trajectory_csv(std::ostream& os, const ClosedLoopTrajectory& traj) {
    Eigen::Index nr = 0, ny = 0, nx = 0, nu = 0;
    if (!traj.empty()) {
        const auto& r0 = traj.records.front();
        nr = r0.r.size();
        ny = r0.y.size();
        nx = r0.x.size();
        nu = r0.u.size();
    }
    os << 't';
    for (Eigen::Index i = 1; i <= nr; ++i) os << ",r_" << i;
    for (Eigen::Index i = 1; i <= ny; ++i) os << ",y_" << i;
    for (Eigen::Index i = 1; i <= nx; ++i) os << ",x_" << i;
    for (Eigen::Index i = 1; i <= nu; ++i) os << ",ur_" << i;
    for (Eigen::Index i = 1; i <= nu; ++i) os << ",u_" << i;
    os << ",ctrl_time_s\n";

    for (const auto& rec : traj.records) {
        os << fmt(rec.t);
        for (const Vec* v : {&rec.r, &rec.y, &rec.x, &rec.u_requested, &rec.u})
            for (Eigen::Index i = 0; i < v->size(); ++i) os << ',' << fmt((*v)(i));
        os << ',' << fmt(rec.controller_seconds) << '\n';
    }
}

void export_csv(const ClosedLoopTrajectory& traj, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError(path, "cannot open for writing");
    write_trajectory_csv(os, traj);
    if (!os) throw IoError(path, "write failed");
}

ClosedLoopTrajectory read_trajectory_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::invalid_argument("trajectory csv: missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split(line, ',');
    if (header.empty() || header.front() != "t" || header.back() != "ctrl_time_s")
        throw std::invalid_argument("trajectory csv: unexpected header");

    const Eigen::Index nr = count_prefix(header, "r_");
    const Eigen::Index ny = count_prefix(header, "y_");
    const Eigen::Index nx = count_prefix(header, "x_");
    const Eigen::Index nu = count_prefix(header, "u_");
    const auto expected = static_cast<std::size_t>(2 + nr + ny + nx + 2 * nu);
    if (header.size() != expected) throw std::invalid_argument("trajectory csv: malformed header");

    ClosedLoopTrajectory traj;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split(line, ',');
        if (cells.size() != expected) throw std::invalid_argument("trajectory csv: row has wrong number of fields");
        std::size_t c = 0;
        auto take = [&](Eigen::Index n) {
            Vec v(n);
            for (Eigen::Index i = 0; i < n; ++i) v(i) = parse_double(cells[c++]);
            return v;
        };
        StepRecord rec;
        rec.t = parse_double(cells[c++]);
        rec.r = take(nr);
        rec.y = take(ny);
        rec.x = take(nx);
        rec.u_requested = take(nu);
        rec.u = take(nu);
        rec.controller_seconds = parse_double(cells[c++]);
        traj.records.push_back(std::move(rec));
    }
    if (traj.records.size() >= 2) traj.Ts = traj.records[1].t - traj.records[0].t;
    return traj;
}

ClosedLoopTrajectory import_csv(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError(path, "cannot open for reading");
    try {
        return read_trajectory_csv(is);
    } catch (const std::invalid_argument& e) {
        throw IoError(path, e.what());
    }
}

void write_bundle(const CoefficientBundle& b, const std::filesystem::path& path) {
    if (b.theta.size() != theta_length(b.window, b.nu, b.ny))
        throw std::invalid_argument("write_bundle: theta length does not match lw*lu*(ly+lu)");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError(path, "cannot open for writing");
    os << "lw,lu,ly\n" << b.window << ',' << b.nu << ',' << b.ny << '\n';
    for (Eigen::Index i = 0; i < b.theta.size(); ++i) os << fmt(b.theta(i)) << '\n';
    if (!os) throw IoError(path, "write failed");
}

CoefficientBundle read_bundle(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError(path, "cannot open for reading");
    std::string line;
    if (!std::getline(is, line) || line.rfind("lw,lu,ly", 0) != 0) throw IoError(path, "missing 'lw,lu,ly' header");
    if (!std::getline(is, line)) throw IoError(path, "missing dimensions");
    const auto dims = split(line, ',');
    if (dims.size() != 3) throw IoError(path, "dimension line must hold three integers");
    CoefficientBundle b;
    b.window = std::stol(dims[0]);
    b.nu = std::stol(dims[1]);
    b.ny = std::stol(dims[2]);
    const Eigen::Index n = theta_length(b.window, b.nu, b.ny);
    b.theta.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!std::getline(is, line)) throw IoError(path, "expected " + std::to_string(n) + " coefficients");
        b.theta(i) = parse_double(line);
    }
    return b;
}

}  // namespace farma
