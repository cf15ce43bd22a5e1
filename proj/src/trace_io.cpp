#include "osgm/trace_io.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace osgm {

namespace {

const char* const reserved_status = "status";
const char* const reserved_final_gap = "final_f_gap";
const char* const reserved_final_grad = "final_grad_norm";

std::string optional_field(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::optional<double> parse_optional(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return parse_double(s);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ConfigError("trace: bad number '" + s + "'");
  return v;
}

void write_trace(std::ostream& os, const SolverTrace& trace) {
  for (const auto& [key, value] : trace.header) os << "# " << key << "=" << value << "\n";
  os << "# " << reserved_status << "=" << to_string(trace.status) << "\n";
  os << "# " << reserved_final_gap << "=" << optional_field(trace.final_f_gap) << "\n";
  os << "# " << reserved_final_grad << "=" << format_double(trace.final_grad_norm) << "\n";
  os << trace_columns << "\n";
  for (const auto& r : trace.rows) {
    os << r.k << ',' << optional_field(r.f_gap) << ',' << format_double(r.grad_norm) << ','
       << optional_field(r.feedback) << ',' << optional_field(r.progress) << ',' << optional_field(r.eta) << ','
       << optional_field(r.drift) << ',' << optional_field(r.potential_phi) << ','
       << optional_field(r.potential_omega) << ',' << r.oracle_calls << "\n";
  }
}

std::string trace_to_csv(const SolverTrace& trace) {
  std::ostringstream os;
  write_trace(os, trace);
  return os.str();
}

SolverTrace parse_trace(std::istream& is) {
  SolverTrace t;
  std::string line;
  bool saw_columns = false;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError("trace line " + std::to_string(lineno) + ": header without '='");
      const std::string key = line.substr(2, eq - 2);
      const std::string value = line.substr(eq + 1);
      if (key == reserved_status)
        t.status = parse_status(value);
      else if (key == reserved_final_gap)
        t.final_f_gap = parse_optional(value);
      else if (key == reserved_final_grad)
        t.final_grad_norm = parse_double(value);
      else
        t.header.emplace_back(key, value);
      continue;
    }
    if (!saw_columns) {
      if (line != trace_columns) throw ConfigError("trace line " + std::to_string(lineno) + ": unexpected columns");
      saw_columns = true;
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 10) throw ConfigError("trace line " + std::to_string(lineno) + ": expected 10 fields");
    TraceRow r;
    r.k = std::stoi(f[0]);
    r.f_gap = parse_optional(f[1]);
    r.grad_norm = parse_double(f[2]);
    r.feedback = parse_optional(f[3]);
    r.progress = parse_optional(f[4]);
    r.eta = parse_optional(f[5]);
    r.drift = parse_optional(f[6]);
    r.potential_phi = parse_optional(f[7]);
    r.potential_omega = parse_optional(f[8]);
    r.oracle_calls = std::stol(f[9]);
    t.rows.push_back(r);
  }
  return t;
}

SolverTrace parse_trace(const std::string& csv) {
  std::istringstream is(csv);
  return parse_trace(is);
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << contents;
    if (!out) throw ConfigError("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

}  // namespace osgm
