#include "osgm/problem_io.hpp"

#include "json.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace osgm {

namespace {

using nlohmann::json;

int line_of(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

const json& field(const json& j, const char* key, const std::string& kind) {
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError("problem file: kind \"" + kind + "\" requires field \"" + key + "\"");
  return *it;
}

double number(const json& v, const std::string& what) {
  if (!v.is_number()) throw ConfigError("problem file: " + what + " must be a number");
  return v.get<double>();
}

Vec vector_field(const json& v, const std::string& what) {
  if (!v.is_array()) throw ConfigError("problem file: " + what + " must be an array of numbers");
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = number(v[i], what);
  return out;
}

Mat matrix_field(const json& v, const std::string& what) {
  if (!v.is_array() || v.empty() || !v[0].is_array())
    throw ConfigError("problem file: " + what + " must be a nonempty list of rows");
  const std::size_t rows = v.size(), cols = v[0].size();
  Mat out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    if (!v[i].is_array() || v[i].size() != cols)
      throw ConfigError("problem file: " + what + " row " + std::to_string(i) + " has the wrong length");
    for (std::size_t j = 0; j < cols; ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = number(v[i][j], what);
  }
  return out;
}

int positive_int(const std::string& s, const std::string& what) {
  int v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || v < 1)
    throw ConfigError(what + " must be a positive integer, got '" + s + "'");
  return v;
}

double real(const std::string& s, const std::string& what) {
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ConfigError(what + " must be a number, got '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

Mat gaussian_matrix(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Mat M(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) M(i, j) = normal(rng);
  return M;
}

ProblemD renamed(ProblemD p, std::string name) {
  p.name = std::move(name);
  return p;
}

}  // namespace

ProblemD parse_problem_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("problem file: line " + std::to_string(line_of(text, e.byte)) + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("problem file: top level must be a JSON object");
  const std::string kind = field(j, "kind", "?").is_string() ? j["kind"].get<std::string>() : "";
  if (kind == "quadratic") {
    const Mat A = matrix_field(field(j, "matrix", kind), "matrix");
    const Vec xs = vector_field(field(j, "x_star", kind), "x_star");
    return make_quadratic<double>(A, xs);
  }
  if (kind == "tridiagonal") {
    const json& n = field(j, "n", kind);
    if (!n.is_number_integer()) throw ConfigError("problem file: n must be an integer");
    return make_tridiagonal<double>(n.get<int>());
  }
  if (kind == "piecewise2d") return make_piecewise_quadratic<double>();
  if (kind == "logistic") {
    const Mat A = matrix_field(field(j, "features", kind), "features");
    const Vec y = vector_field(field(j, "labels", kind), "labels");
    return make_logistic<double>(A, y, number(field(j, "reg", kind), "reg"));
  }
  throw ConfigError("problem file: kind must be one of quadratic, tridiagonal, piecewise2d, logistic");
}

ProblemD load_problem_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open problem file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_problem_json(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

ProblemD make_tridiagonal_twin(int n) {
  const Vec lam = tridiagonal_spectrum<double>(n);
  ProblemD p = make_quadratic<double>(Mat(lam.asDiagonal()), Vec::Zero(n));
  // Exact extremes from the closed form rather than the eigensolver.
  const ProblemD t = make_tridiagonal<double>(n);
  p.L = t.L;
  p.mu = t.mu;
  return renamed(std::move(p), "tridiagonal-twin:" + std::to_string(n));
}

ProblemD make_diag_range(int n) {
  if (n < 1) throw ConfigError("diag-range: n must be positive");
  const Vec d = Vec::LinSpaced(n, 1, n);
  return renamed(make_quadratic<double>(Mat(d.asDiagonal()), Vec::Zero(n)), "diag-range:" + std::to_string(n));
}

ProblemD make_random_spd(int n, double cond, std::uint64_t seed) {
  if (n < 1) throw ConfigError("random-spd: n must be positive");
  if (!(cond >= 1)) throw ConfigError("random-spd: condition number must be at least 1");
  std::mt19937_64 rng(seed);
  const Mat G = gaussian_matrix(n, n, rng);
  const Mat Q = Eigen::HouseholderQR<Mat>(G).householderQ();
  Vec lam(n);
  for (int i = 0; i < n; ++i) lam(i) = n == 1 ? 1.0 : std::pow(cond, double(i) / (n - 1));
  Mat A = Q * lam.asDiagonal() * Q.transpose();
  A = (A + A.transpose()) / 2;
  const Vec xs = gaussian_matrix(n, 1, rng).col(0);
  ProblemD p = make_quadratic<double>(A, xs);
  std::ostringstream name;
  name << "random-spd:" << n << ":" << cond;
  return renamed(std::move(p), name.str());
}

ProblemD make_random_logistic(int m, int n, double reg, std::uint64_t seed) {
  if (m < 1 || n < 1) throw ConfigError("logistic-random: m and n must be positive");
  std::mt19937_64 rng(seed);
  const Mat A = gaussian_matrix(m, n, rng);
  const Vec w = gaussian_matrix(n, 1, rng).col(0);
  std::uniform_real_distribution<double> unif(0, 1);
  Vec y(m);
  for (int i = 0; i < m; ++i) {
    // Labels drawn from a logistic model with a weak signal, so the data
    // overlap and the unregularized loss has a finite minimizer.
    const double t = 0.5 * A.row(i).dot(w);
    y(i) = unif(rng) < 1 / (1 + std::exp(-t)) ? 1.0 : -1.0;
  }
  ProblemD p = make_logistic<double>(A, y, reg);
  std::ostringstream name;
  name << "logistic-random:" << m << "," << n << "," << reg;
  return renamed(std::move(p), name.str());
}

ProblemD load_problem(const std::string& spec, std::uint64_t seed) {
  const auto colon = spec.find(':');
  const std::string name = spec.substr(0, colon);
  const std::string args = colon == std::string::npos ? "" : spec.substr(colon + 1);
  auto need_args = [&](const char* usage) {
    if (args.empty()) throw ConfigError("problem '" + name + "' needs parameters: " + usage);
  };
  if (name == "tridiagonal") {
    need_args("tridiagonal:n");
    return make_tridiagonal<double>(positive_int(args, "tridiagonal n"));
  }
  if (name == "tridiagonal-twin") {
    need_args("tridiagonal-twin:n");
    return make_tridiagonal_twin(positive_int(args, "tridiagonal-twin n"));
  }
  if (name == "piecewise2d") {
    if (!args.empty()) throw ConfigError("piecewise2d takes no parameters");
    return make_piecewise_quadratic<double>();
  }
  if (name == "diag-range") {
    need_args("diag-range:n");
    return make_diag_range(positive_int(args, "diag-range n"));
  }
  if (name == "random-spd") {
    need_args("random-spd:n[:cond]");
    const auto parts = split(args, ':');
    if (parts.size() > 2) throw ConfigError("random-spd: expected random-spd:n[:cond]");
    const int n = positive_int(parts[0], "random-spd n");
    const double cond = parts.size() == 2 ? real(parts[1], "random-spd cond") : 100.0;
    return make_random_spd(n, cond, seed);
  }
  if (name == "logistic-random") {
    need_args("logistic-random:m,n,reg");
    const auto parts = split(args, ',');
    if (parts.size() != 3) throw ConfigError("logistic-random: expected logistic-random:m,n,reg");
    return make_random_logistic(positive_int(parts[0], "logistic-random m"), positive_int(parts[1], "logistic-random n"),
                                real(parts[2], "logistic-random reg"), seed);
  }
  if (std::filesystem::exists(spec)) return load_problem_file(spec);
  throw ConfigError("unknown problem '" + spec + "'; expected a file path or one of tridiagonal:n, tridiagonal-twin:n, "
                    "piecewise2d, diag-range:n, random-spd:n[:cond], logistic-random:m,n,reg");
}

std::vector<std::string> builtin_problem_names() {
  return {"tridiagonal:n", "tridiagonal-twin:n", "piecewise2d", "diag-range:n", "random-spd:n[:cond]",
          "logistic-random:m,n,reg"};
}

}  // namespace osgm
