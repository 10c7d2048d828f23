#pragma once

#include <string>
#include <vector>

#include "chemo/state.hpp"

namespace chemo {

/// Shortest decimal representation that round-trips the exact double.
std::string format_double(double v);

/// Header is exactly "t,N,T,I,C,u"; one row per sample; u[i] applies on
/// [t[i], t[i+1]) with the last row repeating the final applied dose.
void write_trajectory_csv(const Trajectory& traj, const std::string& path);
Trajectory read_trajectory_csv(const std::string& path);

/// Generic numeric table used for sweep results and learning curves.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

void write_table_csv(const Table& tab, const std::string& path);
Table read_table_csv(const std::string& path);

}  // namespace chemo
