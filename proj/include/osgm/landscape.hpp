#pragma once

#include "osgm/feedback.hpp"
#include "osgm/problem.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <string>

namespace osgm {

template <class Scalar_>
struct ActionOutcome {
  using Scalar = Scalar_;
  using vec_t = vec_type<Scalar>;

  ActionKind kind = ActionKind::vanilla;
  vec_t x_next;
  Scalar f_next = 0;
  // Gradient at x_next when the action already knows it; empty after a null
  // step, where the caller still holds grad f(x).
  std::optional<vec_t> grad_next;
  bool accepted_proposal = true;
  // f(x), evaluated by the monotone kinds.
  std::optional<Scalar> f_x;
  int extra_value_calls = 0;
  int extra_gradient_calls = 0;

  int extra_oracle_calls() const { return extra_value_calls + extra_gradient_calls; }
};

// Chooses x^{k+1} from x and the proposal p, given f(p) and grad f(p).
// Ties in the monotone comparison go to the candidate.
template <class Scalar>
ActionOutcome<Scalar> act(ActionKind kind, const vec_type<Scalar>& x, const vec_type<Scalar>& proposal,
                          Scalar f_proposal, const vec_type<Scalar>& g_proposal, const Problem<Scalar>& p,
                          Scalar L) {
  if (!(L > 0)) throw ConfigError("landscape action needs L > 0");
  ActionOutcome<Scalar> out;
  out.kind = kind;
  vec_type<Scalar> cand = proposal;
  Scalar f_cand = f_proposal;
  vec_type<Scalar> g_cand = g_proposal;
  if (has_lookahead(kind)) {
    cand = proposal - g_proposal / L;
    f_cand = p.value(cand);
    g_cand = p.gradient(cand);
    out.extra_value_calls += 1;
    out.extra_gradient_calls += 1;
  }
  if (is_monotone(kind)) {
    const Scalar fx = p.value(x);
    out.extra_value_calls += 1;
    out.f_x = fx;
    if (!(f_cand <= fx)) {
      out.x_next = x;
      out.f_next = fx;
      out.accepted_proposal = false;
      return out;
    }
  }
  out.x_next = std::move(cand);
  out.f_next = f_cand;
  out.grad_next = std::move(g_cand);
  return out;
}

template <class Scalar>
ActionOutcome<Scalar> act(ActionKind kind, const vec_type<Scalar>& x, const FeedbackSample<Scalar>& s,
                          const Problem<Scalar>& p, Scalar L) {
  return act(kind, x, s.proposal, s.f_at_proposal, s.g_half, p, L);
}

// Evaluates the proposal itself; its two oracle calls are not counted in the
// outcome's extra calls.
template <class Scalar>
ActionOutcome<Scalar> act(ActionKind kind, const vec_type<Scalar>& x, const vec_type<Scalar>& proposal,
                          const Problem<Scalar>& p, Scalar L) {
  return act(kind, x, proposal, p.value(proposal), p.gradient(proposal), p, L);
}

template <class Scalar>
struct MonitorRecord {
  std::string name;
  // r_k or h_k measured on the accepted iterate.
  Scalar progress;
  Scalar bound;
  Scalar slack;
  Scalar tolerance;
};

// Per-iteration progress bound implied by the action: equality for vanilla,
// a cap of 1 (ratio) or 0 (hypergradient) for monotone, and a decrease of
// ||grad ell||^2 / (4L^2) (ratio) or / (2L) (hypergradient) for lookahead.
template <class Scalar>
MonitorRecord<Scalar> check_progress_inequalities(ActionKind kind, const FeedbackSample<Scalar>& s,
                                                  const ActionOutcome<Scalar>& out, const Problem<Scalar>& p,
                                                  Scalar L) {
  MonitorRecord<Scalar> r;
  r.name = "progress." + to_string(kind) + "." + to_string(s.kind);
  const bool ratio = s.kind == FeedbackKind::ratio;
  r.progress = ratio ? (out.f_next - *p.f_star) / s.denom : (out.f_next - s.f_x) / s.denom;
  const Scalar cap = ratio ? Scalar(1) : Scalar(0);
  const Scalar gsq = s.gradient_norm() * s.gradient_norm();
  const Scalar penalty = ratio ? gsq / (4 * L * L) : gsq / (2 * L);
  Scalar scale = std::max<Scalar>({Scalar(1), std::abs(s.value), std::abs(r.progress)});
  switch (kind) {
    case ActionKind::vanilla:
      r.bound = s.value;
      r.slack = -std::abs(s.value - r.progress);
      r.tolerance = Scalar(1e-14) * scale;
      return r;
    case ActionKind::monotone: r.bound = std::min(s.value, cap); break;
    case ActionKind::lookahead: r.bound = s.value - penalty; break;
    case ActionKind::monotone_lookahead: r.bound = std::min(s.value - penalty, cap); break;
  }
  scale = std::max(scale, penalty);
  r.slack = r.bound - r.progress;
  r.tolerance = Scalar(1e-10) * scale;
  return r;
}

// Smallest L' = L_init / factor^j with the descent condition
// f(q - grad f(q)/L') - f(q) <= -||grad f(q)||^2 / (2L') at the probe q.
// At q = x^{k+1/2} this is also the smoothness test of h_x along its own
// gradient step from P_k.
template <class Scalar>
Scalar estimate_L(const Problem<Scalar>& p, const vec_type<Scalar>& probe, Scalar L_init,
                  Scalar backtrack_factor = Scalar(0.5), int* value_calls = nullptr) {
  if (!(L_init > 0)) throw ConfigError("estimate_L needs L_init > 0");
  if (!(backtrack_factor > 0 && backtrack_factor < 1)) throw ConfigError("backtrack factor must lie in (0, 1)");
  const Scalar fq = p.value(probe);
  const vec_type<Scalar> g = p.gradient(probe);
  const Scalar gsq = g.squaredNorm();
  const Scalar slack = 4 * std::numeric_limits<Scalar>::epsilon() * std::abs(fq);
  Scalar Lp = L_init;
  for (int j = 0; j <= 60; ++j) {
    if (gsq == 0) return Lp;
    const Scalar f_next = p.value(vec_type<Scalar>(probe - g / Lp));
    if (value_calls) ++*value_calls;
    if (f_next - fq <= -gsq / (2 * Lp) + slack) return Lp;
    Lp /= backtrack_factor;
  }
  throw OracleError("objective not L-smooth at probe");
}

}  // namespace osgm
