#pragma once

#include "osgm/types.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

namespace osgm {

// A gradient scaling P in one of three patterns. Scalar and diagonal
// stepsizes are parameterized by their coefficients; distances and gradients
// are taken in those coefficients, which coincides with the Frobenius
// geometry for diagonal and full patterns.
template <class Scalar_>
class Stepsize {
 public:
  using Scalar = Scalar_;
  using vec_t = vec_type<Scalar>;
  using mat_t = mat_type<Scalar>;

  Stepsize() = default;

  static Stepsize scalar(Scalar alpha, int n) {
    Stepsize s;
    s.pattern_ = PatternKind::scalar;
    s.n_ = n;
    s.alpha_ = alpha;
    return s;
  }

  static Stepsize diagonal(vec_t d) {
    Stepsize s;
    s.pattern_ = PatternKind::diagonal;
    s.n_ = static_cast<int>(d.size());
    s.d_ = std::move(d);
    return s;
  }

  static Stepsize full(mat_t P) {
    if (P.rows() != P.cols()) throw ConfigError("full stepsize must be square");
    Stepsize s;
    s.pattern_ = PatternKind::full;
    s.n_ = static_cast<int>(P.rows());
    s.P_ = std::move(P);
    return s;
  }

  // a * I expressed in the given pattern.
  static Stepsize scaled_identity(PatternKind pattern, int n, Scalar a) {
    switch (pattern) {
      case PatternKind::scalar: return scalar(a, n);
      case PatternKind::diagonal: return diagonal(vec_t::Constant(n, a));
      case PatternKind::full: return full(a * mat_t::Identity(n, n));
    }
    return {};
  }

  static Stepsize zero(PatternKind pattern, int n) { return scaled_identity(pattern, n, Scalar(0)); }

  // M as a stepsize of the given pattern, if M lies exactly in that subspace.
  static std::optional<Stepsize> restrict(const mat_t& M, PatternKind pattern) {
    const int n = static_cast<int>(M.rows());
    if (pattern == PatternKind::full) return full(M);
    mat_t off = M;
    off.diagonal().setZero();
    if (off.cwiseAbs().maxCoeff() != 0) return std::nullopt;
    if (pattern == PatternKind::diagonal) return diagonal(M.diagonal());
    const Scalar a = M(0, 0);
    if ((M.diagonal().array() != a).any()) return std::nullopt;
    return scalar(a, n);
  }

  PatternKind pattern() const { return pattern_; }
  int dim() const { return n_; }
  Scalar alpha() const { return alpha_; }
  const vec_t& diag() const { return d_; }
  const mat_t& matrix() const { return P_; }

  template <class Derived>
  vec_t apply(const Eigen::MatrixBase<Derived>& g) const {
    if (g.size() != n_) {
      std::ostringstream os;
      os << "stepsize of dimension " << n_ << " applied to vector of dimension " << g.size();
      throw ConfigError(os.str());
    }
    switch (pattern_) {
      case PatternKind::scalar: return alpha_ * g;
      case PatternKind::diagonal: return d_.cwiseProduct(g);
      case PatternKind::full: return P_ * g;
    }
    return {};
  }

  mat_t dense() const {
    switch (pattern_) {
      case PatternKind::scalar: return alpha_ * mat_t::Identity(n_, n_);
      case PatternKind::diagonal: return d_.asDiagonal();
      case PatternKind::full: return P_;
    }
    return {};
  }

  // Norm of the embedded n x n matrix.
  Scalar frobenius_norm() const {
    switch (pattern_) {
      case PatternKind::scalar: return std::abs(alpha_) * std::sqrt(Scalar(n_));
      case PatternKind::diagonal: return d_.norm();
      case PatternKind::full: return P_.norm();
    }
    return 0;
  }

  // Norm of the coefficient vector (the learner's geometry).
  Scalar param_norm() const {
    switch (pattern_) {
      case PatternKind::scalar: return std::abs(alpha_);
      case PatternKind::diagonal: return d_.norm();
      case PatternKind::full: return P_.norm();
    }
    return 0;
  }

  Stepsize embed(PatternKind target) const {
    if (target == pattern_) return *this;
    if (target == PatternKind::full) return full(dense());
    if (target == PatternKind::diagonal && pattern_ == PatternKind::scalar)
      return diagonal(vec_t::Constant(n_, alpha_));
    throw ConfigError("cannot embed " + to_string(pattern_) + " stepsize into " + to_string(target));
  }

  bool all_finite() const {
    switch (pattern_) {
      case PatternKind::scalar: return std::isfinite(alpha_);
      case PatternKind::diagonal: return d_.allFinite();
      case PatternKind::full: return P_.allFinite();
    }
    return false;
  }

  // Entrywise access to the coefficients, for projections and AdaGrad.
  Scalar* coeffs() {
    switch (pattern_) {
      case PatternKind::scalar: return &alpha_;
      case PatternKind::diagonal: return d_.data();
      case PatternKind::full: return P_.data();
    }
    return nullptr;
  }
  const Scalar* coeffs() const { return const_cast<Stepsize*>(this)->coeffs(); }
  Eigen::Index num_coeffs() const {
    switch (pattern_) {
      case PatternKind::scalar: return 1;
      case PatternKind::diagonal: return d_.size();
      case PatternKind::full: return P_.size();
    }
    return 0;
  }

  bool operator==(const Stepsize& o) const {
    if (pattern_ != o.pattern_ || n_ != o.n_) return false;
    switch (pattern_) {
      case PatternKind::scalar: return alpha_ == o.alpha_;
      case PatternKind::diagonal: return d_ == o.d_;
      case PatternKind::full: return P_ == o.P_;
    }
    return false;
  }

 private:
  PatternKind pattern_ = PatternKind::scalar;
  int n_ = 0;
  Scalar alpha_ = 0;
  vec_t d_;
  mat_t P_;
};

namespace detail {

template <class Scalar>
void require_same_pattern(const Stepsize<Scalar>& a, const Stepsize<Scalar>& b) {
  if (a.pattern() != b.pattern() || a.dim() != b.dim())
    throw ConfigError("stepsize pattern or dimension mismatch (" + to_string(a.pattern()) + " vs " +
                      to_string(b.pattern()) + ")");
}

}  // namespace detail

template <class Scalar>
Stepsize<Scalar> operator-(const Stepsize<Scalar>& a, const Stepsize<Scalar>& b) {
  detail::require_same_pattern(a, b);
  switch (a.pattern()) {
    case PatternKind::scalar: return Stepsize<Scalar>::scalar(a.alpha() - b.alpha(), a.dim());
    case PatternKind::diagonal: return Stepsize<Scalar>::diagonal(a.diag() - b.diag());
    case PatternKind::full: return Stepsize<Scalar>::full(a.matrix() - b.matrix());
  }
  return {};
}

// Squared distance in the learner's coefficient geometry.
template <class Scalar>
Scalar param_distance_sq(const Stepsize<Scalar>& a, const Stepsize<Scalar>& b) {
  detail::require_same_pattern(a, b);
  switch (a.pattern()) {
    case PatternKind::scalar: return (a.alpha() - b.alpha()) * (a.alpha() - b.alpha());
    case PatternKind::diagonal: return (a.diag() - b.diag()).squaredNorm();
    case PatternKind::full: return (a.matrix() - b.matrix()).squaredNorm();
  }
  return 0;
}

template <class Scalar>
Scalar param_distance(const Stepsize<Scalar>& a, const Stepsize<Scalar>& b) {
  return std::sqrt(param_distance_sq(a, b));
}

template <class Scalar>
Scalar frobenius_distance(const Stepsize<Scalar>& a, const Stepsize<Scalar>& b) {
  if (a.pattern() == b.pattern()) {
    const Scalar d = param_distance(a, b);
    return a.pattern() == PatternKind::scalar ? d * std::sqrt(Scalar(a.dim())) : d;
  }
  return (a.dense() - b.dense()).norm();
}

// Gradient of a feedback function restricted to a stepsize pattern. The full
// pattern keeps the rank-one form scale * left * right^T.
template <class Scalar_>
struct PatternGradient {
  using Scalar = Scalar_;
  using vec_t = vec_type<Scalar>;
  using mat_t = mat_type<Scalar>;

  PatternKind pattern = PatternKind::scalar;
  int n = 0;
  Scalar alpha = 0;
  vec_t diag;
  vec_t left;
  vec_t right;
  Scalar scale = 0;

  Scalar squared_norm() const {
    switch (pattern) {
      case PatternKind::scalar: return alpha * alpha;
      case PatternKind::diagonal: return diag.squaredNorm();
      case PatternKind::full: return scale * scale * left.squaredNorm() * right.squaredNorm();
    }
    return 0;
  }
  Scalar norm() const { return std::sqrt(squared_norm()); }

  mat_t dense_coeffs() const {
    switch (pattern) {
      case PatternKind::scalar: return mat_t::Constant(1, 1, alpha);
      case PatternKind::diagonal: return diag;
      case PatternKind::full: return scale * left * right.transpose();
    }
    return {};
  }

  // <grad, D> in coefficient geometry.
  Scalar inner(const Stepsize<Scalar>& D) const {
    switch (pattern) {
      case PatternKind::scalar: return alpha * D.alpha();
      case PatternKind::diagonal: return diag.dot(D.diag());
      case PatternKind::full: return scale * left.dot(D.matrix() * right);
    }
    return 0;
  }
};

// P - eta * grad, without projection.
template <class Scalar>
Stepsize<Scalar> gradient_step(const Stepsize<Scalar>& P, Scalar eta, const PatternGradient<Scalar>& g) {
  if (P.pattern() != g.pattern) throw ConfigError("gradient pattern does not match stepsize pattern");
  switch (P.pattern()) {
    case PatternKind::scalar: return Stepsize<Scalar>::scalar(P.alpha() - eta * g.alpha, P.dim());
    case PatternKind::diagonal: return Stepsize<Scalar>::diagonal(P.diag() - eta * g.diag);
    case PatternKind::full: {
      mat_type<Scalar> M = P.matrix();
      M.noalias() -= (eta * g.scale) * g.left * g.right.transpose();
      return Stepsize<Scalar>::full(std::move(M));
    }
  }
  return {};
}

template <class Scalar_>
struct CandidateSet {
  using Scalar = Scalar_;
  enum class Kind { unconstrained, box, nonnegative, ball };

  Kind kind = Kind::unconstrained;
  Scalar lo = 0;
  Scalar hi = 0;
  std::optional<Stepsize<Scalar>> center;
  Scalar radius = 0;

  static CandidateSet unconstrained() { return {}; }
  static CandidateSet box(Scalar lo, Scalar hi) {
    if (!(lo <= hi)) throw ConfigError("box set needs lo <= hi");
    CandidateSet s;
    s.kind = Kind::box;
    s.lo = lo;
    s.hi = hi;
    return s;
  }
  static CandidateSet nonnegative() {
    CandidateSet s;
    s.kind = Kind::nonnegative;
    return s;
  }
  // Ball of the given Frobenius radius around center.
  static CandidateSet ball(Stepsize<Scalar> c, Scalar radius) {
    if (!(radius > 0)) throw ConfigError("ball set needs a positive radius");
    CandidateSet s;
    s.kind = Kind::ball;
    s.center = std::move(c);
    s.radius = radius;
    return s;
  }

  // Frobenius diameter of the set within the pattern subspace.
  std::optional<Scalar> diameter(PatternKind pattern, int n) const {
    switch (kind) {
      case Kind::box: {
        const Scalar w = hi - lo;
        if (pattern == PatternKind::full) return w * Scalar(n);
        return w * std::sqrt(Scalar(n));
      }
      case Kind::ball: return 2 * radius;
      default: return std::nullopt;
    }
  }

  // Ball radius measured in the pattern's coefficients.
  Scalar coefficient_radius(PatternKind pattern, int n) const {
    return pattern == PatternKind::scalar ? radius / std::sqrt(Scalar(n)) : radius;
  }

  void validate(PatternKind pattern, int n) const {
    if (kind == Kind::ball) {
      if (!center || center->pattern() != pattern || center->dim() != n)
        throw ConfigError("ball center must have the stepsize pattern " + to_string(pattern));
    }
  }

  bool contains(const Stepsize<Scalar>& P, Scalar tol = Scalar(1e-12)) const {
    const Scalar* c = P.coeffs();
    const Eigen::Index m = P.num_coeffs();
    switch (kind) {
      case Kind::unconstrained: return true;
      case Kind::box:
        for (Eigen::Index i = 0; i < m; ++i)
          if (c[i] < lo - tol || c[i] > hi + tol) return false;
        return true;
      case Kind::nonnegative:
        for (Eigen::Index i = 0; i < m; ++i)
          if (c[i] < -tol) return false;
        return true;
      case Kind::ball:
        return param_distance(P, *center) <= coefficient_radius(P.pattern(), P.dim()) * (1 + tol) + tol;
    }
    return false;
  }
};

template <class Scalar>
Stepsize<Scalar> project(Stepsize<Scalar> P, const CandidateSet<Scalar>& set) {
  using Kind = typename CandidateSet<Scalar>::Kind;
  Scalar* c = P.coeffs();
  const Eigen::Index m = P.num_coeffs();
  switch (set.kind) {
    case Kind::unconstrained: return P;
    case Kind::box:
      for (Eigen::Index i = 0; i < m; ++i) c[i] = std::clamp(c[i], set.lo, set.hi);
      return P;
    case Kind::nonnegative:
      for (Eigen::Index i = 0; i < m; ++i) c[i] = std::max(c[i], Scalar(0));
      return P;
    case Kind::ball: {
      const Scalar r = set.coefficient_radius(P.pattern(), P.dim());
      const Scalar d = param_distance(P, *set.center);
      if (d <= r) return P;
      const Scalar t = r / d;
      const Scalar* cc = set.center->coeffs();
      for (Eigen::Index i = 0; i < m; ++i) c[i] = cc[i] + t * (c[i] - cc[i]);
      return P;
    }
  }
  return P;
}

}  // namespace osgm
