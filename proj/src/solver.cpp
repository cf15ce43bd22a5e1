#include "osgm/solver.hpp"

#include "osgm/trace_io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace osgm {

namespace {

std::string describe_set(const CandidateSet<double>& set) {
  using Kind = CandidateSet<double>::Kind;
  switch (set.kind) {
    case Kind::unconstrained: return "none";
    case Kind::box: return "box:" + format_double(set.lo) + "," + format_double(set.hi);
    case Kind::nonnegative: return "nonneg";
    case Kind::ball: return "ball:" + format_double(set.radius);
  }
  return "";
}

Vec initial_point(const ProblemD& problem, const SolverConfig& config) {
  return config.x1 ? *config.x1 : Vec(Vec::Ones(problem.dim));
}

void problem_header(SolverTrace& t, const ProblemD& p, PatternKind pattern) {
  t.set_header("problem", p.name);
  t.set_header("dim", std::to_string(p.dim));
  t.set_header("L", format_double(p.L));
  t.set_header("mu", format_double(p.mu));
  if (p.mu > 0) t.set_header("kappa", format_double(p.kappa()));
  if (auto star = optimal_preconditioner(p, pattern)) t.set_header("kappa_star", format_double(star->kappa));
  if (p.f_star) t.set_header("f_star", format_double(*p.f_star));
  t.set_header("f_star_estimated", p.f_star_estimated ? "true" : "false");
}

struct StopCheck {
  std::optional<double> gap;
  double grad_norm;
  std::optional<TerminalStatus> status;
};

StopCheck stop_check(const ProblemD& p, double fx, const Vec& g, double stop_gap, double stop_grad) {
  StopCheck s{p.gap(fx), g.norm(), std::nullopt};
  if (s.gap && *s.gap <= stop_gap)
    s.status = TerminalStatus::converged;
  else if (s.grad_norm <= stop_grad)
    s.status = TerminalStatus::stationary;
  return s;
}

const char* const hyper_guard =
    "hypergradient feedback needs a monotone action (monotone or monotone-lookahead): its per-iteration "
    "progress only reduces to a convergence guarantee when steps never increase f; pass --unsafe to override";

// Feedback for the heavy-ball extension in the same layout as the plain
// feedback, so that beta = omega = 0 follows the identical code path.
struct MomentumSample {
  FeedbackSample<double> sample;
  Vec grad_at_proposal;
  double grad_beta = 0;
};

std::optional<MomentumSample> momentum_feedback(FeedbackKind kind, const ProblemD& p, const Vec& x, double fx,
                                                const Vec& g, const Vec& x_prev, const Stepsize<double>& P,
                                                double beta, double omega) {
  MomentumSample m;
  FeedbackSample<double>& s = m.sample;
  s.kind = kind;
  s.f_x = fx;
  const Vec step_prev = x - x_prev;
  const double prev_sq = step_prev.squaredNorm();
  if (kind == FeedbackKind::ratio) {
    if (!p.f_star) throw ConfigError(p.name + ": ratio feedback needs f_star");
    const double gap = fx - *p.f_star;
    if (!(gap > gap_tolerance(p))) return std::nullopt;
    s.denom = gap + omega / 2 * prev_sq;
  } else {
    const double gn = g.norm();
    if (!(gn > grad_tolerance)) return std::nullopt;
    s.denom = gn * gn;
  }
  s.g = g;
  s.proposal = x - P.apply(g);
  if (beta != 0) s.proposal += beta * step_prev;
  s.f_at_proposal = p.value(s.proposal);
  m.grad_at_proposal = p.gradient(s.proposal);
  s.value_calls = 1;
  s.gradient_calls = 1;
  const Vec step = s.proposal - x;
  if (omega != 0)
    s.g_half = m.grad_at_proposal + omega * step;
  else
    s.g_half = m.grad_at_proposal;
  const double moved = omega / 2 * step.squaredNorm();
  if (kind == FeedbackKind::ratio)
    s.value = (s.f_at_proposal - *p.f_star + moved) / s.denom;
  else
    s.value = (s.f_at_proposal - fx + moved - omega / 2 * prev_sq) / s.denom;
  m.grad_beta = s.g_half.dot(step_prev) / s.denom;
  return m;
}

RunResult run_loop(const ProblemD& problem, const SolverConfig& config, const MomentumConfig* momentum) {
  validate_config(problem, config);
  const int n = problem.dim;
  double L_used = config.backtrack && config.L_init > 0 ? config.L_init : problem.L;
  ProblemD scaled = problem;
  scaled.L = L_used;
  const Stepsize<double> P1 =
      config.P1 ? *config.P1 : Stepsize<double>::scaled_identity(config.pattern, n, 1 / problem.L);
  Schedule<double> schedule = resolve_schedule(scaled, config);
  LearnerState<double> learner = make_learner(config.learner, P1, schedule, config.set);
  learner.eps = config.adagrad_eps;

  RunResult result;
  SolverTrace& trace = result.trace;
  const bool ratio = config.feedback == FeedbackKind::ratio;

  Vec x = initial_point(problem, config);
  if (x.size() != n) throw ConfigError("x1 has dimension " + std::to_string(x.size()) + ", expected " + std::to_string(n));
  double fx = problem.value(x);
  Vec g = problem.gradient(x);
  long calls = 2;
  Vec x_prev = x;
  double beta = momentum ? momentum->beta : 0;

  std::optional<double> delta;
  if (problem.f_star && problem.x_star) {
    try {
      delta = sublevel_radius_for_gap(problem, fx - *problem.f_star).value;
    } catch (const ConfigError&) {
    }
  }

  RunContext ctx;
  ctx.variant = config.variant();
  ctx.learner = config.learner;
  ctx.pattern = config.pattern;
  ctx.set = config.set;
  ctx.P1 = P1;
  ctx.schedule = schedule;
  ctx.backtracking = config.backtrack;
  ctx.benchmarks = config.benchmarks;
  ctx.sequences = config.sequences;

  std::optional<PotentialSpec> phi, omega;
  for (const auto& s : potential_specs(problem, ctx, L_used, delta)) {
    if (s.kind == PotentialSpec::Kind::omega_h) {
      if (!omega) omega = s;
    } else if (!phi) {
      phi = s;
    }
  }

  std::optional<RunMonitor> monitor;
  if (config.monitors && !momentum) monitor.emplace(problem, ctx, L_used, delta);

  trace.set_header("method", momentum ? "heavyball" : "osgm");
  if (momentum) {
    trace.set_header("mode", "experimental-heuristic");
    trace.set_header("momentum", momentum->learned ? "learned" : "fixed");
    trace.set_header("beta", format_double(momentum->beta));
    trace.set_header("omega", format_double(momentum->omega));
  }
  problem_header(trace, problem, config.pattern);
  trace.set_header("variant", config.variant().name());
  trace.set_header("feedback", to_string(config.feedback));
  trace.set_header("action", to_string(config.action));
  trace.set_header("learner", to_string(config.learner));
  trace.set_header("pattern", to_string(config.pattern));
  trace.set_header("set", describe_set(config.set));
  trace.set_header("schedule", schedule.describe());
  trace.set_header("eta", format_double(learner.eta()));
  trace.set_header("iters", std::to_string(config.max_iters));
  trace.set_header("stop_gap", format_double(config.stop_gap));
  trace.set_header("stop_grad", format_double(config.stop_grad));
  trace.set_header("seed", std::to_string(config.seed));
  if (config.backtrack) trace.set_header("backtrack", "true");
  if (phi) trace.set_header("potential_phi", phi->label + ",rho=" + format_double(phi->rho));
  if (omega) trace.set_header("potential_omega", omega->label + ",rho=" + format_double(omega->rho));
  if (ratio && problem.f_star_estimated) trace.set_header("warning", "ratio feedback uses an estimated f_star");

  trace.status = TerminalStatus::max_iters;
  for (int k = 1; k <= config.max_iters; ++k) {
    const StopCheck stop = stop_check(problem, fx, g, config.stop_gap, config.stop_grad);
    if (stop.status) {
      trace.status = *stop.status;
      break;
    }
    const Stepsize<double> P_k = learner.current;
    std::optional<FeedbackSample<double>> sample;
    Vec grad_prop;
    double grad_beta = 0;
    if (momentum) {
      auto m = momentum_feedback(config.feedback, problem, x, fx, g, x_prev, P_k, beta, momentum->omega);
      if (m) {
        sample = std::move(m->sample);
        grad_prop = std::move(m->grad_at_proposal);
        grad_beta = m->grad_beta;
      }
    } else {
      sample = evaluate_feedback(config.feedback, problem, x, fx, g, P_k);
      if (sample) grad_prop = sample->g_half;
    }
    if (!sample) {
      trace.status = ratio ? TerminalStatus::converged : TerminalStatus::stationary;
      break;
    }
    calls += 2;

    if (config.backtrack && has_lookahead(config.action)) {
      int probes = 0;
      const double L_new = [&] {
        const double gsq = grad_prop.squaredNorm();
        const double slack = 4 * std::numeric_limits<double>::epsilon() * std::abs(sample->f_at_proposal);
        double Lp = L_used;
        for (int j = 0; j <= 60; ++j) {
          if (gsq == 0) return Lp;
          const double f_next = problem.value(Vec(sample->proposal - grad_prop / Lp));
          ++probes;
          if (f_next - sample->f_at_proposal <= -gsq / (2 * Lp) + slack) return Lp;
          Lp /= config.backtrack_factor;
        }
        throw OracleError("objective not L-smooth at probe");
      }();
      calls += probes;
      if (L_new > L_used) {
        L_used = L_new;
        if (!config.schedule) {
          scaled.L = L_used;
          revise_schedule(learner, resolve_schedule(scaled, config));
        }
      }
    }

    const ActionOutcome<double> outcome =
        act(config.action, x, sample->proposal, sample->f_at_proposal, grad_prop, problem, L_used);
    calls += outcome.extra_oracle_calls();

    const PatternGradient<double> grad = contract_gradient(*sample, config.pattern);
    const double eta = learner.eta();
    learner = learner_step(std::move(learner), grad);
    if (momentum && momentum->learned) {
      const double eta_beta = momentum->beta_eta ? *momentum->beta_eta : eta;
      beta = std::clamp(beta - eta_beta * grad_beta, 0.0, 1 - 1e-8);
    }

    if (monitor) {
      monitor->observe(IterationView{k, x, fx, g, *sample, outcome, grad, P_k, learner.current, eta, L_used});
    }

    TraceRow row;
    row.k = k;
    row.f_gap = stop.gap;
    row.grad_norm = stop.grad_norm;
    row.feedback = sample->value;
    row.progress = ratio ? (outcome.f_next - *problem.f_star) / sample->denom : (outcome.f_next - fx) / sample->denom;
    row.eta = eta;
    row.drift = frobenius_distance(P_k, P1);
    if (stop.gap && phi) row.potential_phi = potential_value(*phi, *stop.gap, P_k);
    if (stop.gap && omega) row.potential_omega = potential_value(*omega, *stop.gap, P_k);
    row.oracle_calls = calls;
    trace.rows.push_back(row);
    if (config.record_iterates) result.iterates.push_back(x);

    x_prev = outcome.accepted_proposal ? x : outcome.x_next;
    x = outcome.x_next;
    fx = outcome.f_next;
    if (outcome.grad_next) g = *outcome.grad_next;
    if (!std::isfinite(fx) || !learner.current.all_finite()) {
      trace.status = TerminalStatus::diverged;
      break;
    }
  }

  trace.final_f_gap = problem.gap(fx);
  trace.final_grad_norm = g.norm();
  if (monitor) {
    result.report = monitor->finish(fx);
    result.log = monitor->log();
  }
  if (config.record_iterates) result.iterates.push_back(x);
  result.final_P = learner.current;
  result.final_x = x;
  return result;
}

}  // namespace

std::string to_string(TerminalStatus s) {
  switch (s) {
    case TerminalStatus::converged: return "converged";
    case TerminalStatus::max_iters: return "max_iters";
    case TerminalStatus::stationary: return "stationary";
    case TerminalStatus::diverged: return "diverged";
  }
  return "";
}

TerminalStatus parse_status(const std::string& s) {
  if (s == "converged") return TerminalStatus::converged;
  if (s == "max_iters") return TerminalStatus::max_iters;
  if (s == "stationary") return TerminalStatus::stationary;
  if (s == "diverged") return TerminalStatus::diverged;
  throw ConfigError("unknown terminal status '" + s + "'");
}

const std::string* SolverTrace::header_value(const std::string& key) const {
  for (const auto& [k, v] : header)
    if (k == key) return &v;
  return nullptr;
}

void SolverTrace::set_header(const std::string& key, const std::string& value) {
  for (auto& [k, v] : header)
    if (k == key) {
      v = value;
      return;
    }
  header.emplace_back(key, value);
}

void validate_config(const ProblemD& problem, const SolverConfig& config) {
  const int n = problem.dim;
  if (n < 1) throw ConfigError(problem.name + ": dimension must be positive");
  if (!(problem.L > 0)) throw ConfigError(problem.name + ": smoothness constant L must be positive");
  if (config.feedback == FeedbackKind::hypergradient && !is_monotone(config.action) && !config.unsafe)
    throw ConfigError(hyper_guard);
  if (config.feedback == FeedbackKind::ratio && !problem.f_star)
    throw ConfigError(problem.name + ": ratio feedback needs f_star");
  if (config.max_iters < 0) throw ConfigError("max_iters must be nonnegative");
  if (config.x1 && config.x1->size() != n)
    throw ConfigError("x1 has dimension " + std::to_string(config.x1->size()) + ", expected " + std::to_string(n));
  if (config.backtrack && !(config.backtrack_factor > 0 && config.backtrack_factor < 1))
    throw ConfigError("backtrack factor must lie in (0, 1)");
  config.set.validate(config.pattern, n);
  if (config.P1) {
    if (config.P1->pattern() != config.pattern || config.P1->dim() != n)
      throw ConfigError("P1 must be a " + to_string(config.pattern) + " stepsize of dimension " + std::to_string(n));
    if (!config.set.contains(*config.P1)) throw ConfigError("P1 lies outside the candidate set");
  } else if (!config.set.contains(Stepsize<double>::scaled_identity(config.pattern, n, 1 / problem.L))) {
    throw ConfigError("the default P1 = (1/L)I lies outside the candidate set; supply P1");
  }
}

Schedule<double> resolve_schedule(const ProblemD& problem, const SolverConfig& config) {
  if (config.schedule) return *config.schedule;
  if (config.learner == LearnerKind::adagrad) return Schedule<double>::constant(0.1 / problem.L);
  try {
    return default_schedule(config.variant(), problem, config.set, config.pattern);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(e.what()) + "; pass an explicit eta or a bounded set");
  }
}

RunResult run_osgm(const ProblemD& problem, const SolverConfig& config) { return run_loop(problem, config, nullptr); }

RunResult run_osgm_heavyball(const ProblemD& problem, const SolverConfig& config, const MomentumConfig& momentum) {
  if (!config.experimental) throw ConfigError("heavy-ball mode is experimental; set experimental = true");
  if (!(momentum.beta >= 0 && momentum.beta < 1)) throw ConfigError("momentum beta must lie in [0, 1)");
  if (!(momentum.omega >= 0)) throw ConfigError("momentum omega must be nonnegative");
  return run_loop(problem, config, &momentum);
}

HeavyBallFeedback heavyball_feedback(const ProblemD& problem, FeedbackKind kind, const Vec& x, const Vec& x_prev,
                                     const Stepsize<double>& P, double beta, double omega) {
  const double fx = problem.value(x);
  const Vec g = problem.gradient(x);
  auto m = momentum_feedback(kind, problem, x, fx, g, x_prev, P, beta, omega);
  if (!m) throw ConfigError("heavy-ball feedback undefined at an optimal point");
  return {m->sample.value, m->sample.gradient_dense(), m->grad_beta};
}

RunResult run_hdm(const ProblemD& problem, const SolverConfig& config) {
  if (config.set.kind != CandidateSet<double>::Kind::unconstrained)
    throw ConfigError("HDM updates the stepsize without projection; use an unconstrained set");
  if (config.pattern == PatternKind::scalar) throw ConfigError("HDM needs a diagonal or full pattern");
  SolverConfig cfg = config;
  cfg.feedback = FeedbackKind::hypergradient;
  cfg.unsafe = true;
  validate_config(problem, cfg);
  const int n = problem.dim;
  const Schedule<double> schedule = config.schedule ? *config.schedule : Schedule<double>::constant(1 / problem.L);
  const Stepsize<double> P1 =
      config.P1 ? *config.P1 : Stepsize<double>::scaled_identity(config.pattern, n, 1 / problem.L);

  RunResult result;
  SolverTrace& trace = result.trace;
  trace.set_header("method", "hdm");
  problem_header(trace, problem, config.pattern);
  trace.set_header("pattern", to_string(config.pattern));
  trace.set_header("set", "none");
  trace.set_header("schedule", schedule.describe());
  trace.set_header("eta", format_double(schedule.eta(1)));
  trace.set_header("iters", std::to_string(config.max_iters));
  trace.set_header("stop_gap", format_double(config.stop_gap));
  trace.set_header("stop_grad", format_double(config.stop_grad));
  trace.set_header("seed", std::to_string(config.seed));

  Vec x = initial_point(problem, config);
  double fx = problem.value(x);
  Vec g = problem.gradient(x);
  long calls = 2;
  Stepsize<double> P = P1;
  trace.status = TerminalStatus::max_iters;
  for (int k = 1; k <= config.max_iters; ++k) {
    const StopCheck stop = stop_check(problem, fx, g, config.stop_gap, config.stop_grad);
    if (stop.status) {
      trace.status = *stop.status;
      break;
    }
    auto sample = evaluate_feedback(FeedbackKind::hypergradient, problem, x, fx, g, P);
    if (!sample) {
      trace.status = TerminalStatus::stationary;
      break;
    }
    calls += 2;
    const double eta = schedule.eta(k);
    const Stepsize<double> P_next = gradient_step(P, eta, contract_gradient(*sample, config.pattern));
    const Vec x_next = x - P_next.apply(g);
    const double f_next = problem.value(x_next);
    Vec g_next = problem.gradient(x_next);
    calls += 2;

    TraceRow row;
    row.k = k;
    row.f_gap = stop.gap;
    row.grad_norm = stop.grad_norm;
    row.feedback = sample->value;
    row.progress = (f_next - fx) / sample->denom;
    row.eta = eta;
    row.drift = frobenius_distance(P, P1);
    row.oracle_calls = calls;
    trace.rows.push_back(row);
    if (config.record_iterates) result.iterates.push_back(x);

    x = x_next;
    fx = f_next;
    g = std::move(g_next);
    P = P_next;
    if (!std::isfinite(fx) || !P.all_finite()) {
      trace.status = TerminalStatus::diverged;
      break;
    }
  }
  trace.final_f_gap = problem.gap(fx);
  trace.final_grad_norm = g.norm();
  if (config.record_iterates) result.iterates.push_back(x);
  result.final_P = P;
  result.final_x = x;
  return result;
}

RunResult run_gd(const ProblemD& problem, const Stepsize<double>& P, const Vec& x1, int max_iters, double stop_gap,
                 double stop_grad) {
  if (x1.size() != problem.dim)
    throw ConfigError("x1 has dimension " + std::to_string(x1.size()) + ", expected " + std::to_string(problem.dim));
  RunResult result;
  SolverTrace& trace = result.trace;
  trace.set_header("method", "gd");
  problem_header(trace, problem, P.pattern());
  trace.set_header("pattern", to_string(P.pattern()));
  trace.set_header("iters", std::to_string(max_iters));
  trace.set_header("stop_gap", format_double(stop_gap));
  trace.set_header("stop_grad", format_double(stop_grad));

  const bool smooth_step = problem.mu > 0 && problem.f_star &&
                           (P.dense() - Mat::Identity(problem.dim, problem.dim) / problem.L).norm() == 0;
  const double rate = 1 - 1 / problem.kappa();
  if (!smooth_step) result.report.skip("gd.contraction", "needs P = (1/L)I on a strongly convex problem");

  Vec x = x1;
  double fx = problem.value(x);
  Vec g = problem.gradient(x);
  long calls = 2;
  trace.status = TerminalStatus::max_iters;
  for (int k = 1; k <= max_iters; ++k) {
    const StopCheck stop = stop_check(problem, fx, g, stop_gap, stop_grad);
    if (stop.status) {
      trace.status = *stop.status;
      break;
    }
    const Vec x_next = x - P.apply(g);
    if (x_next == x) {
      trace.status = TerminalStatus::stationary;
      break;
    }
    const double f_next = problem.value(x_next);
    Vec g_next = problem.gradient(x_next);
    calls += 2;
    TraceRow row;
    row.k = k;
    row.f_gap = stop.gap;
    row.grad_norm = stop.grad_norm;
    if (stop.gap)
      row.feedback = (f_next - *problem.f_star) / *stop.gap;
    else
      row.feedback = (f_next - fx) / g.squaredNorm();
    row.progress = row.feedback;
    row.drift = 0.0;
    row.oracle_calls = calls;
    trace.rows.push_back(row);
    if (smooth_step && stop.gap) {
      const double next_gap = f_next - *problem.f_star;
      result.report.record("gd.contraction", rate * *stop.gap - next_gap, 1e-10 * *stop.gap, k);
    }
    x = x_next;
    fx = f_next;
    g = std::move(g_next);
  }
  trace.final_f_gap = problem.gap(fx);
  trace.final_grad_norm = g.norm();
  result.final_P = P;
  result.final_x = x;
  return result;
}

}  // namespace osgm
