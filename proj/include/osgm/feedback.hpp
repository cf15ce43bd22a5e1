#pragma once

#include "osgm/problem.hpp"
#include "osgm/stepsize.hpp"

#include <optional>

namespace osgm {

// Below these the iterate counts as optimal and no feedback is formed.
template <class Scalar>
Scalar gap_tolerance(const Problem<Scalar>& p) {
  const Scalar fs = p.f_star ? std::abs(*p.f_star) : Scalar(0);
  return Scalar(1e-14) * std::max<Scalar>(1, fs);
}
inline constexpr double grad_tolerance = 1e-12;

template <class Scalar_>
struct FeedbackSample {
  using Scalar = Scalar_;
  using vec_t = vec_type<Scalar>;
  using mat_t = mat_type<Scalar>;

  FeedbackKind kind = FeedbackKind::ratio;
  Scalar value = 0;
  // The feedback gradient is -g_half g^T / denom.
  vec_t g_half;
  vec_t g;
  Scalar denom = 1;
  vec_t proposal;
  Scalar f_at_proposal = 0;
  Scalar f_x = 0;
  int value_calls = 0;
  int gradient_calls = 0;

  Scalar gradient_norm() const { return g_half.norm() * g.norm() / denom; }
  mat_t gradient_dense() const { return -(g_half * g.transpose()) / denom; }
};

template <class Scalar, class Derived>
vec_type<Scalar> propose(const vec_type<Scalar>& x, const Stepsize<Scalar>& P,
                         const Eigen::MatrixBase<Derived>& g) {
  if (x.size() != g.size()) throw ConfigError("propose: x and gradient dimensions differ");
  return x - P.apply(g);
}

// Feedback at (x, P) reusing f(x) and g = grad f(x) from the caller; charges
// one value and one gradient call for the proposal. Returns nullopt when x is
// numerically optimal: f(x) - f* <= gap_tolerance for ratio feedback,
// ||g|| <= grad_tolerance for hypergradient feedback.
template <class Scalar>
std::optional<FeedbackSample<Scalar>> evaluate_feedback(FeedbackKind kind, const Problem<Scalar>& p,
                                                        const vec_type<Scalar>& x, Scalar fx,
                                                        const vec_type<Scalar>& g,
                                                        const Stepsize<Scalar>& P) {
  FeedbackSample<Scalar> s;
  s.kind = kind;
  s.f_x = fx;
  if (kind == FeedbackKind::ratio) {
    if (!p.f_star) throw ConfigError(p.name + ": ratio feedback needs f_star");
    s.denom = fx - *p.f_star;
    if (!(s.denom > gap_tolerance(p))) return std::nullopt;
  } else {
    const Scalar gn = g.norm();
    if (!(gn > Scalar(grad_tolerance))) return std::nullopt;
    s.denom = gn * gn;
  }
  s.g = g;
  s.proposal = propose(x, P, g);
  s.f_at_proposal = p.value(s.proposal);
  s.g_half = p.gradient(s.proposal);
  s.value_calls = 1;
  s.gradient_calls = 1;
  if (kind == FeedbackKind::ratio)
    s.value = (s.f_at_proposal - *p.f_star) / s.denom;
  else
    s.value = (s.f_at_proposal - fx) / s.denom;
  return s;
}

template <class Scalar>
std::optional<FeedbackSample<Scalar>> ratio_feedback(const Problem<Scalar>& p, const vec_type<Scalar>& x,
                                                     const Stepsize<Scalar>& P) {
  if (!p.f_star) throw ConfigError(p.name + ": ratio feedback needs f_star");
  auto s = evaluate_feedback(FeedbackKind::ratio, p, x, p.value(x), p.gradient(x), P);
  if (s) {
    s->value_calls += 1;
    s->gradient_calls += 1;
  }
  return s;
}

template <class Scalar>
std::optional<FeedbackSample<Scalar>> hypergradient_feedback(const Problem<Scalar>& p,
                                                             const vec_type<Scalar>& x,
                                                             const Stepsize<Scalar>& P) {
  auto s = evaluate_feedback(FeedbackKind::hypergradient, p, x, p.value(x), p.gradient(x), P);
  if (s) {
    s->value_calls += 1;
    s->gradient_calls += 1;
  }
  return s;
}

// Feedback value only (one value call), for evaluating benchmark stepsizes.
// The caller guarantees the denominator is positive.
template <class Scalar>
Scalar feedback_value(FeedbackKind kind, const Problem<Scalar>& p, const vec_type<Scalar>& x, Scalar fx,
                      const vec_type<Scalar>& g, const Stepsize<Scalar>& P) {
  const Scalar fp = p.value(propose(x, P, g));
  if (kind == FeedbackKind::ratio) return (fp - *p.f_star) / (fx - *p.f_star);
  return (fp - fx) / g.squaredNorm();
}

template <class Scalar>
PatternGradient<Scalar> contract_gradient(const FeedbackSample<Scalar>& s, PatternKind pattern) {
  PatternGradient<Scalar> out;
  out.pattern = pattern;
  out.n = static_cast<int>(s.g.size());
  switch (pattern) {
    case PatternKind::scalar: out.alpha = -s.g_half.dot(s.g) / s.denom; break;
    case PatternKind::diagonal: out.diag = -s.g_half.cwiseProduct(s.g) / s.denom; break;
    case PatternKind::full:
      out.left = s.g_half;
      out.right = s.g;
      out.scale = -1 / s.denom;
      break;
  }
  return out;
}

template <class Scalar>
struct FeedbackConstants {
  Scalar ratio_smoothness;
  Scalar hyper_smoothness;
  std::optional<Scalar> ratio_lipschitz;
  std::optional<Scalar> hyper_lipschitz;
};

template <class Scalar>
FeedbackConstants<Scalar> feedback_constants(Scalar L, std::optional<Scalar> diam = std::nullopt) {
  FeedbackConstants<Scalar> c{2 * L * L, L, std::nullopt, std::nullopt};
  if (diam) {
    c.ratio_lipschitz = 2 * L * (L * *diam + 1);
    c.hyper_lipschitz = L * *diam + 1;
  }
  return c;
}

template <class Scalar>
FeedbackConstants<Scalar> feedback_constants(const Problem<Scalar>& p, std::optional<Scalar> diam = std::nullopt) {
  return feedback_constants<Scalar>(p.L, diam);
}

}  // namespace osgm
