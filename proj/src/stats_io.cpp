#include "chanimp/stats_io.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "chanimp/error.hpp"

namespace chanimp {

namespace {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(where, "cannot parse number '" + s + "'");
  }
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) {
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\r')) cell.pop_back();
    std::size_t i = 0;
    while (i < cell.size() && cell[i] == ' ') ++i;
    out.push_back(cell.substr(i));
  }
  return out;
}

}  // namespace

void write_stats_csv(std::ostream& out, const SufficientStats& stats) {
  out << "# S1=" << fmt(stats.s1) << ",S2=" << fmt(stats.s2)
      << ",noise_var=" << fmt(stats.noise_var) << '\n';
  out << "packet_index,V1_re,V1_im,V2_re,V2_im\n";
  for (Eigen::Index i = 0; i < stats.v1.size(); ++i) {
    out << i << ',' << fmt(stats.v1[i].real()) << ',' << fmt(stats.v1[i].imag()) << ','
        << fmt(stats.v2[i].real()) << ',' << fmt(stats.v2[i].imag()) << '\n';
  }
}

SufficientStats read_stats_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind('#', 0) != 0) {
    throw ConfigError("stats", "first line must be '# S1=...,S2=...,noise_var=...'");
  }
  double s1 = 0.0, s2 = 0.0, nv = 0.0;
  bool has_s1 = false, has_s2 = false, has_nv = false;
  for (const std::string& kv : split(line.substr(1), ',')) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("stats", "malformed header entry '" + kv + "'");
    const std::string key = split(kv.substr(0, eq), ' ').back();
    const std::string val = kv.substr(eq + 1);
    if (key == "S1") {
      s1 = parse_double(val, "stats.S1");
      has_s1 = true;
    } else if (key == "S2") {
      s2 = parse_double(val, "stats.S2");
      has_s2 = true;
    } else if (key == "noise_var") {
      nv = parse_double(val, "stats.noise_var");
      has_nv = true;
    } else {
      throw ConfigError("stats." + key, "unknown header key");
    }
  }
  if (!has_s1) throw ConfigError("stats.S1", "missing from header");
  if (!has_s2) throw ConfigError("stats.S2", "missing from header");
  if (!has_nv) throw ConfigError("stats.noise_var", "missing from header");

  if (!std::getline(in, line) ||
      split(line, ',') != std::vector<std::string>{"packet_index", "V1_re", "V1_im", "V2_re",
                                                     "V2_im"}) {
    throw ConfigError("stats", "second line must be 'packet_index,V1_re,V1_im,V2_re,V2_im'");
  }
  std::vector<cdouble> v1, v2;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line, ',');
    const std::string where = "stats row " + std::to_string(row);
    if (cells.size() != 5) throw ConfigError(where, "expected 5 columns");
    if (parse_double(cells[0], where) != static_cast<double>(row)) {
      throw ConfigError(where, "packet_index must run 0..L-1 in order");
    }
    v1.emplace_back(parse_double(cells[1], where), parse_double(cells[2], where));
    v2.emplace_back(parse_double(cells[3], where), parse_double(cells[4], where));
    ++row;
  }
  if (v1.empty()) throw ConfigError("stats", "file holds no packets");
  const auto n = static_cast<Eigen::Index>(v1.size());
  try {
    return SufficientStats(Eigen::Map<CVector>(v1.data(), n), Eigen::Map<CVector>(v2.data(), n),
                           s1, s2, nv);
  } catch (const DomainError& e) {
    throw ConfigError("stats", e.what());
  }
}

void save_stats_csv(const std::string& path, const SufficientStats& stats) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_stats_csv(out, stats);
  if (!out) throw IoError("failed writing '" + path + "'");
}

SufficientStats load_stats_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_stats_csv(in);
}

}  // namespace chanimp
