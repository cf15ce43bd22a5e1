#pragma once

#include "osgm/problem.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace osgm {

// Parses a JSON problem description. Errors carry the line of the offending
// token.
ProblemD parse_problem_json(const std::string& text);
ProblemD load_problem_file(const std::string& path);

// Resolves a built-in "name:params" or a path to a JSON file. Random
// instances are drawn from the seed.
//   tridiagonal:n          tridiag(-1, 2, -1)
//   tridiagonal-twin:n     diagonal quadratic with the same spectrum
//   piecewise2d            two-region quadratic in R^2
//   diag-range:n           diag(1, ..., n)
//   random-spd:n[:cond]    Q diag(geometric 1..cond) Q^T, random x*
//   logistic-random:m,n,reg
ProblemD load_problem(const std::string& spec, std::uint64_t seed = 0);

std::vector<std::string> builtin_problem_names();

ProblemD make_tridiagonal_twin(int n);
ProblemD make_diag_range(int n);
ProblemD make_random_spd(int n, double cond, std::uint64_t seed);
ProblemD make_random_logistic(int m, int n, double reg, std::uint64_t seed);

}  // namespace osgm
