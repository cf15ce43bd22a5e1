#pragma once

#include "osgm/feedback.hpp"
#include "osgm/problem.hpp"
#include "osgm/stepsize.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace osgm {

template <class Scalar_>
struct Schedule {
  using Scalar = Scalar_;
  enum class Kind { constant, horizon, anytime };

  Kind kind = Kind::constant;
  // eta for constant schedules, c otherwise.
  Scalar value = 0;
  // K for the c / sqrt(K) schedule.
  int horizon = 0;

  static Schedule constant(Scalar eta) { return {Kind::constant, eta, 0}; }
  static Schedule fixed_horizon(Scalar c, int K) { return {Kind::horizon, c, K}; }
  static Schedule anytime(Scalar c) { return {Kind::anytime, c, 0}; }

  Scalar eta(int k) const {
    switch (kind) {
      case Kind::constant: return value;
      case Kind::horizon:
        if (horizon <= 0) throw ConfigError("c/sqrt(K) schedule used without a horizon");
        return value / std::sqrt(Scalar(horizon));
      case Kind::anytime: return value / std::sqrt(Scalar(std::max(k, 1)));
    }
    return 0;
  }

  std::string describe() const {
    switch (kind) {
      case Kind::constant: return "constant(" + std::to_string(value) + ")";
      case Kind::horizon: return "c/sqrt(K)(c=" + std::to_string(value) + ",K=" + std::to_string(horizon) + ")";
      case Kind::anytime: return "c/sqrt(k)(c=" + std::to_string(value) + ")";
    }
    return "";
  }
};

// A feedback/action pairing. The four pairings with theoretical guarantees
// have names; the rest are reported as feedback+action.
struct Variant {
  FeedbackKind feedback = FeedbackKind::ratio;
  ActionKind action = ActionKind::lookahead;

  std::string name() const {
    std::string a;
    switch (action) {
      case ActionKind::vanilla: a = "Vanilla"; break;
      case ActionKind::monotone: a = "Monotone"; break;
      case ActionKind::lookahead: a = "Lookahead"; break;
      case ActionKind::monotone_lookahead: a = "Monotone Lookahead"; break;
    }
    return a + (feedback == FeedbackKind::ratio ? " OSGM-R" : " OSGM-H");
  }

  bool operator==(const Variant&) const = default;
};

inline constexpr Variant lookahead_osgm_r{FeedbackKind::ratio, ActionKind::lookahead};
inline constexpr Variant monotone_lookahead_osgm_h{FeedbackKind::hypergradient, ActionKind::monotone_lookahead};
inline constexpr Variant vanilla_osgm_r{FeedbackKind::ratio, ActionKind::vanilla};
inline constexpr Variant monotone_osgm_h{FeedbackKind::hypergradient, ActionKind::monotone};

// Stepsize schedule each variant's guarantees are stated for. Ratio feedback
// with a lookahead step uses 1/(2L^2), hypergradient feedback with a
// lookahead step uses 1/L, and the variants without lookahead use
// c/sqrt(k) with c = D/sigma (sigma the feedback's Lipschitz constant).
template <class Scalar>
Schedule<Scalar> default_schedule(Variant v, const Problem<Scalar>& p, const CandidateSet<Scalar>& set,
                                  PatternKind pattern, std::optional<int> horizon = std::nullopt) {
  const Scalar L = p.L;
  if (!(L > 0)) throw ConfigError(p.name + ": smoothness constant L unknown");
  if (has_lookahead(v.action)) {
    if (v.feedback == FeedbackKind::ratio) return Schedule<Scalar>::constant(1 / (2 * L * L));
    return Schedule<Scalar>::constant(1 / L);
  }
  const auto D = set.diameter(pattern, p.dim);
  if (!D) throw ConfigError(v.name() + " needs a bounded candidate set (diameter D) for its schedule");
  const auto c = feedback_constants<Scalar>(L, D);
  const Scalar sigma = v.feedback == FeedbackKind::ratio ? *c.ratio_lipschitz : *c.hyper_lipschitz;
  if (horizon) return Schedule<Scalar>::fixed_horizon(*D / sigma, *horizon);
  return Schedule<Scalar>::anytime(*D / sigma);
}

template <class Scalar_>
struct LearnerState {
  using Scalar = Scalar_;
  LearnerKind kind = LearnerKind::ogd;
  Stepsize<Scalar> current;
  Schedule<Scalar> schedule;
  CandidateSet<Scalar> set;
  int k = 1;
  // Sum of squared gradient coefficients (AdaGrad only).
  std::optional<Stepsize<Scalar>> accumulator;
  Scalar eps = Scalar(1e-12);
  // Upper bound on emitted rates after a schedule revision.
  Scalar eta_cap = std::numeric_limits<Scalar>::infinity();
  Scalar last_eta = std::numeric_limits<Scalar>::quiet_NaN();

  Scalar eta() const { return std::min(schedule.eta(k), eta_cap); }
};

template <class Scalar>
LearnerState<Scalar> make_learner(LearnerKind kind, Stepsize<Scalar> P1, Schedule<Scalar> schedule,
                                  CandidateSet<Scalar> set) {
  set.validate(P1.pattern(), P1.dim());
  if (!set.contains(P1)) throw ConfigError("initial stepsize lies outside the candidate set");
  LearnerState<Scalar> s;
  s.kind = kind;
  s.current = std::move(P1);
  s.schedule = schedule;
  s.set = std::move(set);
  if (kind == LearnerKind::adagrad) s.accumulator = Stepsize<Scalar>::zero(s.current.pattern(), s.current.dim());
  return s;
}

// Swap in a schedule derived from revised constants. The emitted rate never
// goes up as a result.
template <class Scalar>
void revise_schedule(LearnerState<Scalar>& s, Schedule<Scalar> schedule) {
  if (std::isfinite(s.last_eta)) s.eta_cap = std::min(s.eta_cap, s.last_eta);
  s.schedule = schedule;
}

template <class Scalar>
LearnerState<Scalar> ogd_step(LearnerState<Scalar> s, const PatternGradient<Scalar>& grad) {
  const Scalar eta = s.eta();
  s.current = project(gradient_step(s.current, eta, grad), s.set);
  s.last_eta = eta;
  ++s.k;
  return s;
}

template <class Scalar>
LearnerState<Scalar> adagrad_step(LearnerState<Scalar> s, const PatternGradient<Scalar>& grad) {
  if (!s.accumulator) s.accumulator = Stepsize<Scalar>::zero(s.current.pattern(), s.current.dim());
  const Scalar eta = s.eta();
  const mat_type<Scalar> G = grad.dense_coeffs();
  Scalar* acc = s.accumulator->coeffs();
  Scalar* c = s.current.coeffs();
  const Eigen::Index m = s.current.num_coeffs();
  for (Eigen::Index i = 0; i < m; ++i) {
    const Scalar gi = G.data()[i];
    acc[i] += gi * gi;
    c[i] -= eta * gi / (std::sqrt(acc[i]) + s.eps);
  }
  s.current = project(std::move(s.current), s.set);
  s.last_eta = eta;
  ++s.k;
  return s;
}

template <class Scalar>
LearnerState<Scalar> learner_step(LearnerState<Scalar> s, const PatternGradient<Scalar>& grad) {
  return s.kind == LearnerKind::ogd ? ogd_step(std::move(s), grad) : adagrad_step(std::move(s), grad);
}

// Feedback of a benchmark stepsize at one iterate.
template <class Scalar>
struct BenchmarkValue {
  std::string name;
  Stepsize<Scalar> P;
  Scalar feedback;
};

template <class Scalar>
struct BenchmarkTrack {
  std::string name;
  Scalar sum_feedback = 0;
  Scalar path_length = 0;
  std::optional<Stepsize<Scalar>> last;
  bool in_set = true;
};

template <class Scalar>
struct StepSlack {
  std::string name;
  Scalar slack;
  Scalar tolerance;
};

// Both sides of the static and dynamic regret bounds, accumulated along a run.
template <class Scalar>
struct RegretTracker {
  Stepsize<Scalar> P1;
  int K = 0;
  Scalar cumulative_feedback = 0;
  Scalar grad_sq_sum = 0;
  Scalar max_drift = 0;
  std::vector<BenchmarkTrack<Scalar>> benchmarks;

  explicit RegretTracker(Stepsize<Scalar> first = {}) : P1(std::move(first)) {}

  BenchmarkTrack<Scalar>* find(const std::string& name) {
    for (auto& b : benchmarks)
      if (b.name == name) return &b;
    return nullptr;
  }
  const BenchmarkTrack<Scalar>* find(const std::string& name) const {
    return const_cast<RegretTracker*>(this)->find(name);
  }
};

// Accumulates one iteration: feedback ell(P_k) with gradient grad, rate
// eta_k, the learner's move from P_k to P_next, and benchmark values at x^k.
// Returns the slack of the one-step OGD inequality for each benchmark that
// lies in the set.
template <class Scalar>
std::vector<StepSlack<Scalar>> update_regret(RegretTracker<Scalar>& t, Scalar ell, const PatternGradient<Scalar>& grad,
                                             Scalar eta, const Stepsize<Scalar>& P_k, const Stepsize<Scalar>& P_next,
                                             const std::vector<BenchmarkValue<Scalar>>& benchmarks,
                                             const CandidateSet<Scalar>& set) {
  std::vector<StepSlack<Scalar>> out;
  ++t.K;
  t.cumulative_feedback += ell;
  const Scalar gsq = grad.squared_norm();
  t.grad_sq_sum += gsq;
  t.max_drift = std::max(t.max_drift, param_distance(P_k, t.P1));
  const Stepsize<Scalar> delta = P_next - P_k;
  const Scalar delta_sq = delta.param_norm() * delta.param_norm();
  for (const auto& b : benchmarks) {
    BenchmarkTrack<Scalar>* track = t.find(b.name);
    if (!track) {
      BenchmarkTrack<Scalar> fresh;
      fresh.name = b.name;
      t.benchmarks.push_back(std::move(fresh));
      track = &t.benchmarks.back();
    }
    track->sum_feedback += b.feedback;
    if (track->last) track->path_length += param_distance(*track->last, b.P);
    track->last = b.P;
    if (!set.contains(b.P, Scalar(1e-9))) {
      track->in_set = false;
      continue;
    }
    // ||P_next - B||^2 - ||P_k - B||^2 = ||delta||^2 + 2 <delta, P_k - B>.
    const Stepsize<Scalar> diff = P_k - b.P;
    Scalar cross = 0;
    const Scalar* dc = delta.coeffs();
    const Scalar* fc = diff.coeffs();
    for (Eigen::Index i = 0; i < delta.num_coeffs(); ++i) cross += dc[i] * fc[i];
    const Scalar lhs = delta_sq + 2 * cross;
    const Scalar rhs = -2 * eta * (ell - b.feedback) + eta * eta * gsq;
    const Scalar scale = std::max({Scalar(1), std::abs(delta_sq), std::abs(2 * cross),
                                   std::abs(2 * eta * (ell - b.feedback)), eta * eta * gsq});
    out.push_back({b.name, rhs - lhs, Scalar(1e-10) * scale});
  }
  return out;
}

// Static regret with constant eta: sum ell(P_k) - sum ell(B) <=
// ||P_1 - B||^2 / (2 eta) + eta/2 sum ||grad||^2. Returns rhs - lhs.
template <class Scalar>
Scalar static_regret_slack(const RegretTracker<Scalar>& t, const BenchmarkTrack<Scalar>& b, Scalar eta) {
  const Scalar lhs = t.cumulative_feedback - b.sum_feedback;
  const Scalar rhs = param_distance_sq(t.P1, *b.last) / (2 * eta) + eta / 2 * t.grad_sq_sum;
  return rhs - lhs;
}

// Bounded-set regret with eta_k = c / sqrt(k) or c / sqrt(K):
// (D^2 / (2c) + c sigma^2) sqrt(K).
template <class Scalar>
Scalar sqrtk_regret_slack(const RegretTracker<Scalar>& t, const BenchmarkTrack<Scalar>& b, Scalar c, Scalar sigma,
                          Scalar D) {
  const Scalar lhs = t.cumulative_feedback - b.sum_feedback;
  const Scalar rhs = (D * D / (2 * c) + c * sigma * sigma) * std::sqrt(Scalar(t.K));
  return rhs - lhs;
}

// Dynamic regret with constant eta against a benchmark sequence.
template <class Scalar>
Scalar dynamic_regret_slack(const RegretTracker<Scalar>& t, const BenchmarkTrack<Scalar>& b, Scalar eta) {
  const Scalar lhs = t.cumulative_feedback - b.sum_feedback;
  const Scalar rhs = eta / 2 * t.grad_sq_sum + param_distance_sq(*b.last, t.P1) / (2 * eta) +
                     t.max_drift / eta * b.path_length;
  return rhs - lhs;
}

}  // namespace osgm
