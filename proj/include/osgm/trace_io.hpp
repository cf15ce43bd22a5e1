#pragma once

#include "osgm/solver.hpp"

#include <iosfwd>
#include <string>

namespace osgm {

// Shortest decimal form that parses back to the same double.
std::string format_double(double v);
double parse_double(const std::string& s);

inline const char* const trace_columns =
    "k,f_gap,grad_norm,feedback,progress,eta,drift,potential_phi,potential_omega,oracle_calls";

void write_trace(std::ostream& os, const SolverTrace& trace);
std::string trace_to_csv(const SolverTrace& trace);
SolverTrace parse_trace(std::istream& is);
SolverTrace parse_trace(const std::string& csv);

// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace osgm
