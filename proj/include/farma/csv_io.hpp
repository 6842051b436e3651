#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "farma/plant.hpp"

namespace farma {

/// Header: t,r_1..r_ly,y_1..y_ly,x_1..x_lx,ur_1..ur_lu,u_1..u_lu,ctrl_time_s.
/// Numbers use 17 significant digits so a re-read is bit-exact.
void write_trajectory_csv(std::ostream& os, const ClosedLoopTrajectory& traj);
void export_csv(const ClosedLoopTrajectory& traj, const std::filesystem::path& path);

/// Inverse of export_csv. Ts is recovered from the first two time stamps
/// (0 when fewer than two rows).
ClosedLoopTrajectory read_trajectory_csv(std::istream& is);
ClosedLoopTrajectory import_csv(const std::filesystem::path& path);

struct CoefficientBundle {
    Eigen::Index window = 0;
    Eigen::Index nu = 0;
    Eigen::Index ny = 0;
    Vec theta;
};

/// "lw,lu,ly" header line, the three values, then one coefficient per line.
void write_bundle(const CoefficientBundle& bundle, const std::filesystem::path& path);
CoefficientBundle read_bundle(const std::filesystem::path& path);

class IoError : public std::runtime_error {
public:
    IoError(const std::filesystem::path& path, const std::string& what)
        : std::runtime_error(path.string() + ": " + what) {}
};

}  // namespace farma
