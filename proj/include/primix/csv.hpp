#pragma once

#include <string>
#include <vector>

#include "primix/types.hpp"

namespace primix {

/// Shortest decimal text that parses back to the exact same double.
/// Locale-independent ('.' radix), used for every numeric file we write.
std::string format_double(double v);

double parse_double(const std::string& s);

/// Demonstration CSV: header "t,l_theta_0..,l_omega_..,l_tau_..,f_theta_..,
/// f_omega_..,f_tau_..", one row per tick, t = i*dt.
void write_demonstration_csv(const std::string& path, const Demonstration& demo);
Demonstration read_demonstration_csv(const std::string& path);

/// Single-robot trajectory CSV: same layout without the l_/f_ prefixes.
void write_trajectory_csv(const std::string& path, const Trajectory& traj);
Trajectory read_trajectory_csv(const std::string& path);

/// Plain numeric table with a caller-supplied header row.
void write_table_csv(const std::string& path, const std::vector<std::string>& header,
                     const std::vector<std::vector<double>>& rows);
std::vector<std::vector<double>> read_table_csv(const std::string& path,
                                                std::vector<std::string>* header = nullptr);

}  // namespace primix
