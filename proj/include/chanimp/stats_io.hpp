#pragma once

#include <iosfwd>
#include <string>

#include "chanimp/sufficient_stats.hpp"

namespace chanimp {

// Sufficient-statistic CSV:
//
//   # S1=<S1>,S2=<S2>,noise_var=<sigma_n^2>
//   packet_index,V1_re,V1_im,V2_re,V2_im
//   0,<re>,<im>,<re>,<im>
//   ...
//
// Packet indices must run 0..L-1 in order. Numbers are written with 17
// significant digits.

void write_stats_csv(std::ostream& out, const SufficientStats& stats);
SufficientStats read_stats_csv(std::istream& in);

void save_stats_csv(const std::string& path, const SufficientStats& stats);
SufficientStats load_stats_csv(const std::string& path);

}  // namespace chanimp
