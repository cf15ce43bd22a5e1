#pragma once

#include "osgm/types.hpp"

#include <atomic>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>

namespace osgm {

template <class Scalar_>
struct Problem {
  using Scalar = Scalar_;
  using vec_t = vec_type<Scalar>;
  using mat_t = mat_type<Scalar>;

  std::string name;
  int dim = 0;
  std::function<Scalar(const vec_t&)> value;
  std::function<vec_t(const vec_t&)> gradient;
  // Hessian-vector product at x; empty when no Hessian exists.
  std::function<vec_t(const vec_t&, const vec_t&)> hessian_vector;

  Scalar L = 0;
  Scalar mu = 0;
  std::optional<Scalar> f_star;
  bool f_star_estimated = false;
  std::optional<vec_t> x_star;
  std::optional<mat_t> hessian_at_opt;
  std::optional<Scalar> hessian_lipschitz;
  std::optional<Scalar> kappa_star_diag;

  // True quadratic objective with Hessian hessian_at_opt everywhere.
  bool quadratic = false;
  // f is evaluated as a nonnegative form in x - x*, so f - f* keeps full
  // relative precision all the way down to zero.
  bool exact_gap = false;
  // Lower bound on the strong convexity modulus over the ball of radius r
  // around x_star. Used to bound the sublevel radius when mu = 0.
  std::function<Scalar(Scalar)> local_strong_convexity;

  Scalar kappa() const { return mu > 0 ? L / mu : std::numeric_limits<Scalar>::infinity(); }

  std::optional<Scalar> gap(Scalar fx) const {
    if (!f_star) return std::nullopt;
    return fx - *f_star;
  }
};

using ProblemD = Problem<double>;

struct OracleCounts {
  std::atomic<long> values{0};
  std::atomic<long> gradients{0};
};

// Copy of the problem whose oracle increments the given counters.
template <class Scalar>
Problem<Scalar> with_counter(const Problem<Scalar>& p, std::shared_ptr<OracleCounts> counts) {
  Problem<Scalar> q = p;
  auto value = p.value;
  auto gradient = p.gradient;
  q.value = [value, counts](const vec_type<Scalar>& x) {
    counts->values.fetch_add(1, std::memory_order_relaxed);
    return value(x);
  };
  q.gradient = [gradient, counts](const vec_type<Scalar>& x) {
    counts->gradients.fetch_add(1, std::memory_order_relaxed);
    return gradient(x);
  };
  return q;
}

namespace detail {

template <class Scalar>
void check_dim(const vec_type<Scalar>& x, int n, const char* what) {
  if (x.size() != n) {
    std::ostringstream os;
    os << what << ": expected dimension " << n << ", got " << x.size();
    throw ConfigError(os.str());
  }
}

}  // namespace detail

template <class Scalar>
Problem<Scalar> make_quadratic(const mat_type<Scalar>& A, const vec_type<Scalar>& x_star) {
  const int n = static_cast<int>(A.rows());
  if (n < 1 || A.cols() != n) throw ConfigError("quadratic: matrix must be square and nonempty");
  detail::check_dim<Scalar>(x_star, n, "quadratic x_star");
  const Scalar scale = std::max<Scalar>(1, A.cwiseAbs().maxCoeff());
  const Scalar asym = (A - A.transpose()).cwiseAbs().maxCoeff();
  if (asym > Scalar(1e-12) * scale) {
    std::ostringstream os;
    os << "quadratic: matrix is not symmetric (max |A - A^T| = " << asym << ")";
    throw ConfigError(os.str());
  }
  mat_type<Scalar> S = (A + A.transpose()) / 2;
  Eigen::SelfAdjointEigenSolver<mat_type<Scalar>> es(S, Eigen::EigenvaluesOnly);
  const Scalar lmin = es.eigenvalues().minCoeff();
  const Scalar lmax = es.eigenvalues().maxCoeff();
  if (!(lmin > 0)) {
    std::ostringstream os;
    os << "quadratic: matrix is not positive definite (smallest eigenvalue " << lmin << ")";
    throw ConfigError(os.str());
  }
  Eigen::LLT<mat_type<Scalar>> llt(S);
  if (llt.info() != Eigen::Success) {
    std::ostringstream os;
    os << "quadratic: Cholesky failed (smallest eigenvalue " << lmin << ")";
    throw ConfigError(os.str());
  }
  auto U = std::make_shared<const mat_type<Scalar>>(llt.matrixU());
  auto H = std::make_shared<const mat_type<Scalar>>(S);
  auto xs = std::make_shared<const vec_type<Scalar>>(x_star);

  Problem<Scalar> p;
  p.name = "quadratic:" + std::to_string(n);
  p.dim = n;
  p.value = [U, xs](const vec_type<Scalar>& x) -> Scalar {
    detail::check_dim<Scalar>(x, static_cast<int>(xs->size()), "quadratic");
    vec_type<Scalar> e = x - *xs;
    return (U->template triangularView<Eigen::Upper>() * e).squaredNorm() / 2;
  };
  p.gradient = [H, xs](const vec_type<Scalar>& x) -> vec_type<Scalar> {
    detail::check_dim<Scalar>(x, static_cast<int>(xs->size()), "quadratic");
    return (*H) * (x - *xs);
  };
  p.hessian_vector = [H](const vec_type<Scalar>&, const vec_type<Scalar>& v) -> vec_type<Scalar> {
    return (*H) * v;
  };
  p.L = lmax;
  p.mu = lmin;
  p.f_star = Scalar(0);
  p.x_star = x_star;
  p.hessian_at_opt = S;
  p.hessian_lipschitz = Scalar(0);
  p.quadratic = true;
  p.exact_gap = true;
  if (S.isDiagonal(0)) p.kappa_star_diag = Scalar(1);
  return p;
}

template <class Scalar>
vec_type<Scalar> tridiagonal_spectrum(int n) {
  vec_type<Scalar> lam(n);
  const Scalar pi = std::numbers::pi_v<Scalar>;
  for (int k = 1; k <= n; ++k) {
    const Scalar s = std::sin(pi * k / (2 * Scalar(n + 1)));
    lam(k - 1) = 4 * s * s;
  }
  return lam;
}

template <class Scalar>
mat_type<Scalar> tridiagonal_matrix(int n) {
  mat_type<Scalar> T = mat_type<Scalar>::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    T(i, i) = 2;
    if (i + 1 < n) T(i, i + 1) = T(i + 1, i) = -1;
  }
  return T;
}

// f(x) = x^T T_n x / 2 with T_n = tridiag(-1, 2, -1).
template <class Scalar>
Problem<Scalar> make_tridiagonal(int n) {
  if (n < 2) throw ConfigError("tridiagonal: n must be at least 2, got " + std::to_string(n));
  Problem<Scalar> p;
  p.name = "tridiagonal:" + std::to_string(n);
  p.dim = n;
  // x^T T x = x_1^2 + x_n^2 + sum (x_i - x_{i+1})^2, a sum of squares.
  p.value = [n](const vec_type<Scalar>& x) -> Scalar {
    detail::check_dim<Scalar>(x, n, "tridiagonal");
    Scalar s = x(0) * x(0) + x(n - 1) * x(n - 1);
    for (int i = 0; i + 1 < n; ++i) {
      const Scalar d = x(i) - x(i + 1);
      s += d * d;
    }
    return s / 2;
  };
  auto apply = [n](const vec_type<Scalar>& x) -> vec_type<Scalar> {
    vec_type<Scalar> y(n);
    for (int i = 0; i < n; ++i) {
      Scalar v = 2 * x(i);
      if (i > 0) v -= x(i - 1);
      if (i + 1 < n) v -= x(i + 1);
      y(i) = v;
    }
    return y;
  };
  p.gradient = [n, apply](const vec_type<Scalar>& x) {
    detail::check_dim<Scalar>(x, n, "tridiagonal");
    return apply(x);
  };
  p.hessian_vector = [apply](const vec_type<Scalar>&, const vec_type<Scalar>& v) { return apply(v); };
  const Scalar pi = std::numbers::pi_v<Scalar>;
  const Scalar smax = std::sin(pi * n / (2 * Scalar(n + 1)));
  const Scalar smin = std::sin(pi / (2 * Scalar(n + 1)));
  p.L = 4 * smax * smax;
  p.mu = 4 * smin * smin;
  p.f_star = Scalar(0);
  p.x_star = vec_type<Scalar>::Zero(n);
  p.hessian_at_opt = tridiagonal_matrix<Scalar>(n);
  p.hessian_lipschitz = Scalar(0);
  p.kappa_star_diag = p.L / p.mu;
  p.quadratic = true;
  p.exact_gap = true;
  return p;
}

// f = x1^2/4 + x2^2/2 for x1 >= 0 and 3 x1^2/4 + x2^2/2 for x1 < 0.
template <class Scalar>
Problem<Scalar> make_piecewise_quadratic() {
  Problem<Scalar> p;
  p.name = "piecewise2d";
  p.dim = 2;
  p.value = [](const vec_type<Scalar>& x) -> Scalar {
    detail::check_dim<Scalar>(x, 2, "piecewise2d");
    const Scalar a = x(0) >= 0 ? Scalar(0.25) : Scalar(0.75);
    return a * x(0) * x(0) + x(1) * x(1) / 2;
  };
  p.gradient = [](const vec_type<Scalar>& x) -> vec_type<Scalar> {
    detail::check_dim<Scalar>(x, 2, "piecewise2d");
    const Scalar a = x(0) >= 0 ? Scalar(0.5) : Scalar(1.5);
    vec_type<Scalar> g(2);
    g << a * x(0), x(1);
    return g;
  };
  p.L = Scalar(1.5);
  p.mu = Scalar(0.5);
  p.f_star = Scalar(0);
  p.x_star = vec_type<Scalar>::Zero(2);
  p.exact_gap = true;
  return p;
}

namespace detail {

template <class Scalar>
Scalar softplus(Scalar t) {
  return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

template <class Scalar>
Scalar sigmoid(Scalar t) {
  if (t >= 0) return 1 / (1 + std::exp(-t));
  const Scalar e = std::exp(t);
  return e / (1 + e);
}

}  // namespace detail

// Damped Newton iteration to a point with ||grad|| <= tol. Requires a
// Hessian-vector product; the Hessian is assembled column by column.
template <class Scalar>
vec_type<Scalar> refine_minimizer(const Problem<Scalar>& p, vec_type<Scalar> x, Scalar tol,
                                  int max_iters = 200) {
  if (!p.hessian_vector) throw ConfigError(p.name + ": refinement needs Hessian-vector products");
  const int n = p.dim;
  Scalar fx = p.value(x);
  for (int it = 0; it < max_iters; ++it) {
    vec_type<Scalar> g = p.gradient(x);
    if (g.norm() <= tol) return x;
    mat_type<Scalar> H(n, n);
    for (int j = 0; j < n; ++j) H.col(j) = p.hessian_vector(x, vec_type<Scalar>::Unit(n, j));
    H = (H + H.transpose()) / 2;
    Eigen::LDLT<mat_type<Scalar>> ldlt(H);
    vec_type<Scalar> d = -ldlt.solve(g);
    if (!d.allFinite() || g.dot(d) >= 0) d = -g / p.L;
    Scalar t = 1;
    for (int ls = 0; ls < 60; ++ls) {
      vec_type<Scalar> xn = x + t * d;
      const Scalar fn = p.value(xn);
      if (fn <= fx + Scalar(1e-4) * t * g.dot(d) || fn <= fx) {
        x = xn;
        fx = fn;
        break;
      }
      t /= 2;
    }
    if (t < Scalar(1e-17)) break;
  }
  if (p.gradient(x).norm() <= tol) return x;
  throw ConfigError(p.name + ": pre-solve did not reach the gradient tolerance "
                              "(data may be separable without regularization)");
}

// f(x) = mean log(1 + exp(-y_i <a_i, x>)) + reg/2 ||x||^2.
template <class Scalar>
Problem<Scalar> make_logistic(const mat_type<Scalar>& features, const vec_type<Scalar>& labels,
                              Scalar reg) {
  const int m = static_cast<int>(features.rows());
  const int n = static_cast<int>(features.cols());
  if (m < 1 || n < 1) throw ConfigError("logistic: features must be nonempty");
  if (labels.size() != m) {
    std::ostringstream os;
    os << "logistic: " << m << " feature rows but " << labels.size() << " labels";
    throw ConfigError(os.str());
  }
  for (int i = 0; i < m; ++i)
    if (labels(i) != 1 && labels(i) != -1) {
      std::ostringstream os;
      os << "logistic: label " << i << " is " << labels(i) << ", expected -1 or +1";
      throw ConfigError(os.str());
    }
  if (!(reg >= 0)) throw ConfigError("logistic: reg must be nonnegative");

  // Rows scaled by their labels: margins are Z x.
  auto Z = std::make_shared<const mat_type<Scalar>>(labels.asDiagonal() * features);
  Problem<Scalar> p;
  p.name = "logistic:" + std::to_string(m) + "x" + std::to_string(n);
  p.dim = n;
  p.value = [Z, reg, m, n](const vec_type<Scalar>& x) -> Scalar {
    detail::check_dim<Scalar>(x, n, "logistic");
    vec_type<Scalar> t = (*Z) * x;
    Scalar s = 0;
    for (int i = 0; i < m; ++i) s += detail::softplus<Scalar>(-t(i));
    return s / m + reg * x.squaredNorm() / 2;
  };
  p.gradient = [Z, reg, m, n](const vec_type<Scalar>& x) -> vec_type<Scalar> {
    detail::check_dim<Scalar>(x, n, "logistic");
    vec_type<Scalar> t = (*Z) * x;
    vec_type<Scalar> w(m);
    for (int i = 0; i < m; ++i) w(i) = -detail::sigmoid<Scalar>(-t(i));
    return Z->transpose() * w / Scalar(m) + reg * x;
  };
  p.hessian_vector = [Z, reg, m](const vec_type<Scalar>& x, const vec_type<Scalar>& v) {
    vec_type<Scalar> t = (*Z) * x;
    vec_type<Scalar> zv = (*Z) * v;
    for (int i = 0; i < m; ++i) {
      const Scalar s = detail::sigmoid<Scalar>(t(i));
      zv(i) *= s * (1 - s);
    }
    return vec_type<Scalar>(Z->transpose() * zv / Scalar(m) + reg * v);
  };
  mat_type<Scalar> G = features.transpose() * features;
  Eigen::SelfAdjointEigenSolver<mat_type<Scalar>> es(G, Eigen::EigenvaluesOnly);
  const Scalar gmin = std::max<Scalar>(0, es.eigenvalues().minCoeff());
  p.L = es.eigenvalues().maxCoeff() / (4 * Scalar(m)) + reg;
  p.mu = reg;

  vec_type<Scalar> xs = refine_minimizer<Scalar>(p, vec_type<Scalar>::Zero(n), Scalar(1e-12));
  p.x_star = xs;
  p.f_star = p.value(xs);
  p.f_star_estimated = true;

  Scalar amax = 0;
  for (int i = 0; i < m; ++i) amax = std::max<Scalar>(amax, features.row(i).norm());
  const Scalar xnorm = xs.norm();
  p.local_strong_convexity = [gmin, amax, xnorm, reg, m](Scalar r) -> Scalar {
    const Scalar T = amax * (xnorm + r);
    const Scalar s = detail::sigmoid<Scalar>(T);
    return reg + gmin / Scalar(m) * s * (1 - s);
  };
  return p;
}

template <class Scalar>
struct SublevelRadius {
  Scalar value;
  // False only when value is the exact maximum distance.
  bool is_bound;
};

// Radius of the sublevel set {f - f* <= gap} around x_star.
template <class Scalar>
SublevelRadius<Scalar> sublevel_radius_for_gap(const Problem<Scalar>& p, Scalar gap) {
  if (!p.f_star || !p.x_star) throw ConfigError(p.name + ": sublevel radius needs f_star and x_star");
  gap = std::max<Scalar>(0, gap);
  if (p.mu > 0) return {std::sqrt(2 * gap / p.mu), !p.quadratic};
  if (!p.local_strong_convexity)
    throw ConfigError("Δ undefined without strong convexity; supply a bound");
  if (gap == 0) return {Scalar(0), true};
  // On the sphere of radius r around x_star, f - f* >= c(r) = mu(r) r^2 / 2.
  // By convexity along rays, f - f* >= c(r) t / r at distance t >= r, so the
  // sublevel set lies in the ball of radius r max(1, gap / c(r)).
  Scalar best = std::numeric_limits<Scalar>::infinity();
  Scalar r = std::sqrt(2 * gap / p.local_strong_convexity(Scalar(0))) * Scalar(1e-3);
  for (int j = 0; j < 400; ++j, r *= Scalar(1.05)) {
    const Scalar c = p.local_strong_convexity(r) * r * r / 2;
    if (!(c > 0)) continue;
    best = std::min(best, r * std::max<Scalar>(1, gap / c));
  }
  if (!std::isfinite(best)) throw ConfigError("Δ undefined without strong convexity; supply a bound");
  return {best, true};
}

template <class Scalar>
SublevelRadius<Scalar> sublevel_radius(const Problem<Scalar>& p, const vec_type<Scalar>& x1) {
  if (!p.f_star || !p.x_star) throw ConfigError(p.name + ": sublevel radius needs f_star and x_star");
  return sublevel_radius_for_gap(p, p.value(x1) - *p.f_star);
}

}  // namespace osgm
