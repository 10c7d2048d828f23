#include "chemo/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace chemo {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

double parse_double(const std::string& tok, const std::string& path) {
  double v = 0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last)
    throw std::runtime_error("csv: bad numeric field '" + tok + "' in " + path);
  return v;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
  if (traj.t.size() != traj.x.size() || traj.t.size() != traj.u.size())
    throw std::invalid_argument("trajectory columns have unequal lengths");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << "t,N,T,I,C,u\n";
  for (size_t i = 0; i < traj.t.size(); ++i) {
    f << format_double(traj.t[i]) << ',' << format_double(traj.x[i].N) << ','
      << format_double(traj.x[i].T) << ',' << format_double(traj.x[i].I) << ','
      << format_double(traj.x[i].C) << ',' << format_double(traj.u[i]) << '\n';
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

Trajectory read_trajectory_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(f, line))
    throw std::runtime_error("csv: empty file " + path);
  if (split_line(line) != std::vector<std::string>{"t", "N", "T", "I", "C", "u"})
    throw std::runtime_error("csv: unexpected trajectory header in " + path);
  Trajectory traj;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto tok = split_line(line);
    if (tok.size() != 6)
      throw std::runtime_error("csv: expected 6 fields per row in " + path);
    traj.t.push_back(parse_double(tok[0], path));
    traj.x.push_back(StateVec{parse_double(tok[1], path), parse_double(tok[2], path),
                              parse_double(tok[3], path), parse_double(tok[4], path)});
    traj.u.push_back(parse_double(tok[5], path));
  }
  return traj;
}

void write_table_csv(const Table& tab, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  for (size_t i = 0; i < tab.header.size(); ++i)
    f << tab.header[i] << (i + 1 < tab.header.size() ? "," : "");
  f << '\n';
  for (const auto& row : tab.rows) {
    if (row.size() != tab.header.size())
      throw std::invalid_argument("table row width does not match header");
    for (size_t i = 0; i < row.size(); ++i)
      f << format_double(row[i]) << (i + 1 < row.size() ? "," : "");
    f << '\n';
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

Table read_table_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error("csv: empty file " + path);
  Table tab;
  tab.header = split_line(line);
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto tok = split_line(line);
    std::vector<double> row;
    row.reserve(tok.size());
    for (const auto& t : tok) row.push_back(parse_double(t, path));
    tab.rows.push_back(std::move(row));
  }
  return tab;
}

}  // namespace chemo
