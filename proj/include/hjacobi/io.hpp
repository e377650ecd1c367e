#pragma once

#include <cstddef>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "hjacobi/boundary.hpp"
#include "hjacobi/ergodic.hpp"
#include "hjacobi/invariant.hpp"
#include "hjacobi/pd.hpp"
#include "hjacobi/pd_limit.hpp"
#include "hjacobi/sde.hpp"
#include "hjacobi/wealth.hpp"

namespace hjacobi {

/// Shortest decimal form that round-trips.
inline std::string format_real(double v) {
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::stod(buf) == v) break;
  }
  return buf;
}

namespace detail {

inline void csv_row(std::ostream& os, std::span<const double> v) {
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << format_real(v[i]);
  os << '\n';
}

}  // namespace detail

inline void write_path_csv(std::ostream& os, const SimPath& path) {
  os << "time";
  for (std::size_t i = 1; i <= path.dim(); ++i) os << ",x_" << i;
  os << '\n';
  for (std::size_t n = 0; n < path.size(); ++n) {
    os << format_real(path.times[n]);
    for (double v : path.row(n)) os << ',' << format_real(v);
    os << '\n';
  }
}

inline void write_samples_csv(std::ostream& os, const std::vector<std::vector<double>>& draws, const char* prefix) {
  if (draws.empty()) return;
  for (std::size_t i = 1; i <= draws.front().size(); ++i) os << (i > 1 ? "," : "") << prefix << i;
  os << '\n';
  for (const auto& d : draws) detail::csv_row(os, d);
}

inline void write_ledger_csv(std::ostream& os, const WealthLedger& l) {
  os << "time,logV,drift_part,mart_part\n";
  for (std::size_t n = 0; n < l.times.size(); ++n)
    os << format_real(l.times[n]) << ',' << format_real(l.log_v[n]) << ',' << format_real(l.drift_part[n]) << ','
       << format_real(l.mart_part[n]) << '\n';
}

inline void write_hit_csv(std::ostream& os, const HitFrequencyReport& r) {
  os << "eps,frequency,ci_lo,ci_hi\n";
  for (const auto& row : r.rows)
    os << format_real(row.eps) << ',' << format_real(row.frequency) << ',' << format_real(row.ci_lo) << ','
       << format_real(row.ci_hi) << '\n';
}

inline void write_convergence_csv(std::ostream& os, const ConvergenceReport& r) {
  os << "d,function_id,estimate,se,tilted_limit,gap\n";
  for (const auto& row : r.rows)
    os << row.d << ',' << row.function_id << ',' << format_real(row.estimate) << ',' << format_real(row.se) << ','
       << format_real(row.tilted_limit) << ',' << format_real(row.gap) << '\n';
}

}  // namespace hjacobi
