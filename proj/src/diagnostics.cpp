#include "osgm/diagnostics.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace osgm {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

double coeff_inner(const Stepsize<double>& a, const Stepsize<double>& b) {
  detail::require_same_pattern(a, b);
  const double* x = a.coeffs();
  const double* y = b.coeffs();
  double s = 0;
  for (Eigen::Index i = 0; i < a.num_coeffs(); ++i) s += x[i] * y[i];
  return s;
}

// ||P_next - B||^2 - ||P - B||^2 = ||d||^2 + 2 <d, P - B> with d = P_next - P.
double distance_change(const Stepsize<double>& P, const Stepsize<double>& P_next, const Stepsize<double>& B) {
  const Stepsize<double> d = P_next - P;
  const Stepsize<double> e = P - B;
  return coeff_inner(d, d) + 2 * coeff_inner(d, e);
}

bool evaluable(double gap, const ProblemD& p) {
  if (!(gap > 0)) return false;
  if (p.f_star_estimated) return gap >= 1e-4 * std::max(1.0, std::abs(*p.f_star));
  return true;
}

bool is_constant(const Schedule<double>& s) {
  return s.kind != Schedule<double>::Kind::anytime;
}

bool same_stepsize(const Stepsize<double>& a, const Stepsize<double>& b) {
  if (a.dim() != b.dim()) return false;
  const mat_type<double> A = a.dense();
  const mat_type<double> B = b.dense();
  return (A - B).norm() <= 1e-12 * std::max(1.0, B.norm());
}

std::optional<mat_type<double>> hessian_inverse_dense(const ProblemD& p) {
  if (!p.hessian_at_opt) return std::nullopt;
  const mat_type<double>& A = *p.hessian_at_opt;
  if (A.isDiagonal(0)) return mat_type<double>(A.diagonal().cwiseInverse().asDiagonal());
  Eigen::LDLT<mat_type<double>> ldlt(A);
  mat_type<double> inv = ldlt.solve(mat_type<double>::Identity(A.rows(), A.cols()));
  return mat_type<double>((inv + inv.transpose()) / 2);
}

// Log-space check of log gap_{K+1} <= rhs.
class LogBound {
 public:
  LogBound(MonitorReport& r, const ProblemD& p) : report_(r), problem_(p) {}

  void operator()(const std::string& name, double gap_next, double rhs, int K) const {
    if (std::isnan(rhs)) return;
    if (!(gap_next > 0)) {
      if (problem_.f_star_estimated) return;
      report_.record(name, inf, 0, K);
      return;
    }
    if (!evaluable(gap_next, problem_)) return;
    report_.record(name, rhs - std::log(gap_next), 1e-9 * K, K);
  }

 private:
  MonitorReport& report_;
  const ProblemD& problem_;
};

double safe_log(double v) { return v > 0 ? std::log(v) : std::numeric_limits<double>::quiet_NaN(); }

struct Prefix {
  std::vector<double> s;
  explicit Prefix(const std::vector<double>& v) : s(v.size() + 1, 0.0) {
    for (size_t i = 0; i < v.size(); ++i) s[i + 1] = s[i] + v[i];
  }
  double upto(int K) const { return s[K]; }
};

// Quantities shared by the global and local checks.
struct RunFacts {
  const MonitorLog& log;
  const ProblemD& problem;
  const RunContext& ctx;
  bool ratio;
  bool constant;
  double eta = 0;
  double penalty = 0;
  std::optional<double> D;
  bool zero_in_set = false;
  std::optional<double> regret_constant;

  RunFacts(const MonitorLog& l, const ProblemD& p)
      : log(l), problem(p), ctx(l.context), ratio(l.context.variant.feedback == FeedbackKind::ratio) {
    constant = ctx.learner == LearnerKind::ogd && is_constant(ctx.schedule) && !l.eta_revised && !l.eta.empty();
    if (constant) eta = l.eta.front();
    if (has_lookahead(ctx.variant.action) && !ctx.backtracking)
      penalty = ratio ? 1 / (4 * l.L * l.L) : 1 / (2 * l.L);
    D = ctx.set.diameter(ctx.pattern, ctx.P1.dim());
    zero_in_set = ctx.set.contains(Stepsize<double>::zero(ctx.pattern, ctx.P1.dim()));
    if (ctx.learner == LearnerKind::ogd && ctx.schedule.kind == Schedule<double>::Kind::anytime && D &&
        zero_in_set) {
      const auto fc = feedback_constants<double>(p.L, D);
      const double sigma = ratio ? *fc.ratio_lipschitz : *fc.hyper_lipschitz;
      const double c = ctx.schedule.value;
      regret_constant = *D * *D / (2 * c) + c * sigma * sigma;
    }
  }

  // Bound on sum progress - sum benchmark feedback for a constant rate.
  double excess(double dist_term, double G) const {
    return dist_term / eta + std::max(0.0, eta / 2 - penalty) * G;
  }
};

}  // namespace

std::string to_string(PotentialSpec::Kind k) {
  switch (k) {
    case PotentialSpec::Kind::phi_r: return "phi_r";
    case PotentialSpec::Kind::phi_h: return "phi_h";
    case PotentialSpec::Kind::omega_h: return "omega_h";
  }
  return "";
}

std::optional<double> potential_value(const PotentialSpec& spec, double gap, const Stepsize<double>& P) {
  if (!(gap > 0)) return std::nullopt;
  const double dist = param_distance_sq(P, spec.benchmark);
  if (spec.kind == PotentialSpec::Kind::omega_h) return -spec.rho / gap + dist;
  return spec.rho * std::log(gap) + dist;
}

std::optional<double> eval_potential(const PotentialSpec& spec, const Vec& x, const Stepsize<double>& P,
                                     const ProblemD& problem) {
  if (!problem.f_star) throw ConfigError(problem.name + ": potentials need f_star");
  return potential_value(spec, problem.value(x) - *problem.f_star, P);
}

double potential_change(const PotentialSpec& spec, double gap, double gap_next, const Stepsize<double>& P,
                        const Stepsize<double>& P_next) {
  const double dist = distance_change(P, P_next, spec.benchmark);
  if (spec.kind == PotentialSpec::Kind::omega_h) return spec.rho * (gap_next - gap) / (gap * gap_next) + dist;
  return spec.rho * std::log(gap_next / gap) + dist;
}

std::optional<Stepsize<double>> inverse_hessian(const ProblemD& problem, PatternKind pattern) {
  auto inv = hessian_inverse_dense(problem);
  if (!inv) return std::nullopt;
  return Stepsize<double>::restrict(*inv, pattern);
}

std::optional<double> benchmark_condition(const ProblemD& problem, const Stepsize<double>& B) {
  if (auto inv = hessian_inverse_dense(problem); inv && problem.quadratic) {
    if ((B.dense() - *inv).norm() <= 1e-12 * std::max(1.0, inv->norm())) return 1.0;
  }
  const int n = B.dim();
  if (problem.mu > 0 && same_stepsize(B, Stepsize<double>::scaled_identity(PatternKind::full, n, 1 / problem.L)))
    return problem.kappa();
  if (!problem.quadratic || !problem.hessian_at_opt) return std::nullopt;
  Eigen::SelfAdjointEigenSolver<mat_type<double>> es(*problem.hessian_at_opt);
  const mat_type<double> S = es.operatorSqrt();
  const mat_type<double> M = mat_type<double>::Identity(n, n) - S * B.dense() * S;
  Eigen::JacobiSVD<mat_type<double>> svd(M);
  const double smax = svd.singularValues()(0);
  const double rho = smax * smax;
  if (!(rho < 1)) return std::nullopt;
  return 1 / (1 - rho);
}

std::optional<OptimalPreconditioner> optimal_preconditioner(const ProblemD& problem, PatternKind pattern) {
  const int n = problem.dim;
  switch (pattern) {
    case PatternKind::full:
      if (problem.quadratic)
        if (auto inv = inverse_hessian(problem, PatternKind::full)) return OptimalPreconditioner{*inv, 1.0};
      return std::nullopt;
    case PatternKind::diagonal:
      if (problem.quadratic && problem.hessian_at_opt && problem.hessian_at_opt->isDiagonal(0))
        return OptimalPreconditioner{*inverse_hessian(problem, PatternKind::diagonal), 1.0};
      if (problem.kappa_star_diag && problem.mu > 0)
        return OptimalPreconditioner{Stepsize<double>::scaled_identity(pattern, n, 1 / problem.L),
                                     *problem.kappa_star_diag};
      return std::nullopt;
    case PatternKind::scalar:
      if (problem.mu > 0)
        return OptimalPreconditioner{Stepsize<double>::scalar(1 / problem.L, n), problem.kappa()};
      return std::nullopt;
  }
  return std::nullopt;
}

std::vector<BenchmarkSequence> region_sequences(PatternKind pattern) {
  if (pattern == PatternKind::scalar) return {};
  auto make = [pattern](double r1, double r2) {
    return [pattern, r1, r2](int, const Vec& x) {
      Vec d(2);
      d << (x(0) >= 0 ? r1 : r2), 1.0;
      return Stepsize<double>::diagonal(d).embed(pattern);
    };
  };
  return {BenchmarkSequence{"region-inverse-hessian", make(2.0, 2.0 / 3.0)},
          BenchmarkSequence{"region-hessian", make(0.5, 1.5)}};
}

const BenchmarkSeries* MonitorLog::find(const std::string& name) const {
  for (const auto& s : series)
    if (s.name == name) return &s;
  return nullptr;
}

std::vector<PotentialSpec> potential_specs(const ProblemD& problem, const RunContext& ctx, double L,
                                           std::optional<double> delta) {
  std::vector<PotentialSpec> out;
  if (!problem.f_star) return out;
  const int n = problem.dim;
  const bool constant = ctx.learner == LearnerKind::ogd && is_constant(ctx.schedule);
  const double eta = constant ? ctx.schedule.eta(1) : 0;
  const auto smooth = Stepsize<double>::scaled_identity(ctx.pattern, n, 1 / problem.L);

  if (ctx.variant.feedback == FeedbackKind::ratio) {
    const bool guaranteed_run = has_lookahead(ctx.variant.action) && constant && !ctx.backtracking &&
                                eta <= (1 + 1e-12) / (2 * L * L);
    const double rho = constant ? 2 * eta : 1 / (L * L);
    std::vector<std::pair<std::string, Stepsize<double>>> benches;
    if (auto inv = inverse_hessian(problem, ctx.pattern)) benches.emplace_back("inverse-hessian", *inv);
    benches.emplace_back("inverse-smoothness", smooth);
    for (const auto& [name, B] : benches) {
      auto kappa = benchmark_condition(problem, B);
      if (!kappa) continue;
      PotentialSpec s;
      s.kind = PotentialSpec::Kind::phi_r;
      s.rho = rho;
      s.benchmark = B;
      s.expected_decrease = guaranteed_run && ctx.set.contains(B) ? rho / *kappa : 0;
      s.label = "potential.ratio_log." + name;
      out.push_back(std::move(s));
    }
    return out;
  }

  const bool guaranteed = ctx.variant.action == ActionKind::monotone_lookahead && constant && !ctx.backtracking &&
                          eta <= (1 + 1e-12) / L && ctx.set.contains(smooth);
  const double rate = constant ? eta : 1 / L;
  if (problem.mu > 0) {
    PotentialSpec s;
    s.kind = PotentialSpec::Kind::phi_h;
    s.rho = rate / problem.mu;
    s.benchmark = smooth;
    s.expected_decrease = guaranteed ? rate / L : 0;
    s.label = "potential.hyper_log";
    out.push_back(std::move(s));
  }
  if (delta) {
    PotentialSpec s;
    s.kind = PotentialSpec::Kind::omega_h;
    s.rho = 2 * rate * *delta * *delta;
    s.benchmark = smooth;
    s.expected_decrease = guaranteed ? rate / L : 0;
    s.label = "potential.hyper_reciprocal";
    out.push_back(std::move(s));
  }
  return out;
}

RunMonitor::RunMonitor(ProblemD problem, RunContext context, double L, std::optional<double> delta)
    : problem_(std::move(problem)), tracker_(context.P1) {
  log_.context = std::move(context);
  log_.L = L;
  log_.delta = delta;
  const RunContext& ctx = log_.context;
  const int n = problem_.dim;
  hessian_inverse_ = hessian_inverse_dense(problem_);

  auto add = [&](const std::string& name, const Stepsize<double>& P) {
    BenchmarkSeries s;
    s.name = name;
    s.P = P;
    s.in_set = ctx.set.contains(P, 1e-9);
    s.kappa = benchmark_condition(problem_, P);
    log_.series.push_back(std::move(s));
  };
  add("initial", ctx.P1);
  add("inverse-smoothness", Stepsize<double>::scaled_identity(ctx.pattern, n, 1 / problem_.L));
  if (auto inv = inverse_hessian(problem_, ctx.pattern)) add("inverse-hessian", *inv);
  for (const auto& [name, P] : ctx.benchmarks) add(name, P);
  for (const auto& seq : ctx.sequences) {
    BenchmarkSeries s;
    s.name = seq.name;
    s.sequence = true;
    log_.series.push_back(std::move(s));
  }
  potentials_ = potential_specs(problem_, ctx, L, delta);
  for (const auto& p : potentials_)
    if (p.expected_decrease == 0) report_.skip(p.label, "decrease not guaranteed for this configuration");
}

void RunMonitor::observe(const IterationView& it) {
  const RunContext& ctx = log_.context;
  const ProblemD& p = problem_;
  const int k = it.k;
  const bool ratio = it.sample.kind == FeedbackKind::ratio;
  const double gap = p.f_star ? it.fx - *p.f_star : std::numeric_limits<double>::quiet_NaN();

  // Potential decrease over the previous iteration, now that gap_k is known.
  if (!log_.gaps.empty() && pending_) {
    const double g0 = log_.gaps.back();
    for (const auto& spec : potentials_) {
      if (spec.expected_decrease == 0 || !evaluable(g0, p) || !evaluable(gap, p)) continue;
      const double change = potential_change(spec, g0, gap, pending_->first, pending_->second);
      report_.record(spec.label, -change - spec.expected_decrease, 1e-9, k - 1);
    }
  }

  if (!log_.eta.empty() && it.eta != log_.eta.front() && is_constant(ctx.schedule)) log_.eta_revised = true;
  log_.gaps.push_back(gap);
  log_.grad_sq.push_back(it.g.squaredNorm());
  log_.feedback.push_back(it.sample.value);
  log_.ell_grad_sq.push_back(it.grad.squared_norm());
  log_.eta.push_back(it.eta);
  const double drift = param_distance(it.P_k, ctx.P1);
  log_.max_drift.push_back(log_.max_drift.empty() ? drift : std::max(log_.max_drift.back(), drift));

  const auto rec = check_progress_inequalities(ctx.variant.action, it.sample, it.outcome, p, std::max(it.L, p.L));
  log_.progress.push_back(rec.progress);
  report_.record(rec.name, rec.slack, rec.tolerance, k);

  std::vector<BenchmarkValue<double>> values;
  size_t seq_index = 0;
  for (auto& s : log_.series) {
    if (s.sequence) {
      const Stepsize<double> P = ctx.sequences[seq_index++].at(k, it.x);
      const double prev_pl = s.path_length.empty() ? 0 : s.path_length.back();
      s.path_length.push_back(s.values.empty() ? 0 : prev_pl + param_distance(s.P, P));
      s.dist_sq_to_P1.push_back(param_distance_sq(P, ctx.P1));
      s.in_set = s.in_set && ctx.set.contains(P, 1e-9);
      s.P = P;
    }
    const double v = feedback_value(it.sample.kind, p, it.x, it.fx, it.g, s.P);
    s.values.push_back(v);
    values.push_back({s.name, s.P, v});
  }

  const auto slacks = update_regret(tracker_, it.sample.value, it.grad, it.eta, it.P_k, it.P_next, values, ctx.set);
  if (ctx.learner == LearnerKind::ogd) {
    for (const auto& s : slacks) report_.record("ogd_step." + s.name, s.slack, s.tolerance, k);
    for (const auto& s : log_.series) {
      const auto* b = tracker_.find(s.name);
      if (!b || !b->in_set) continue;
      const double scale = std::max({1.0, std::abs(tracker_.cumulative_feedback), std::abs(b->sum_feedback),
                                     tracker_.grad_sq_sum * it.eta});
      if (s.sequence) {
        if (!is_constant(ctx.schedule) || log_.eta_revised) continue;
        const double slack = dynamic_regret_slack(tracker_, *b, log_.eta.front());
        report_.record("regret.dynamic." + s.name, slack, 1e-10 * std::max(scale, std::abs(slack)), k);
      } else if (is_constant(ctx.schedule) && !log_.eta_revised) {
        const double slack = static_regret_slack(tracker_, *b, log_.eta.front());
        report_.record("regret.static." + s.name, slack, 1e-10 * std::max(scale, std::abs(slack)), k);
      } else {
        RunFacts facts(log_, p);
        if (!facts.regret_constant) continue;
        const auto fc = feedback_constants<double>(p.L, facts.D);
        const double sigma = ratio ? *fc.ratio_lipschitz : *fc.hyper_lipschitz;
        const double slack = sqrtk_regret_slack(tracker_, *b, ctx.schedule.value, sigma, *facts.D);
        report_.record("regret.sqrtk." + s.name, slack, 1e-10 * std::max(scale, std::abs(slack)), k);
      }
    }
  }

  if (hessian_inverse_ && p.hessian_lipschitz && p.mu > 0 && p.x_star && p.f_star && evaluable(gap, p)) {
    const double r = feedback_value(FeedbackKind::ratio, p, it.x, it.fx, it.g, Stepsize<double>::full(*hessian_inverse_));
    const double H = *p.hessian_lipschitz;
    const double bound = H * H * p.kappa() / (4 * p.mu * p.mu) * (it.x - *p.x_star).squaredNorm();
    report_.record("hessian_inverse_feedback", bound - r, 1e-10 * std::max(1.0, bound), k);
  }

  pending_ = std::make_pair(it.P_k, it.P_next);
}

MonitorReport RunMonitor::finish(double f_final) {
  const ProblemD& p = problem_;
  if (log_.K() > 0) {
    const double gap = p.f_star ? f_final - *p.f_star : std::numeric_limits<double>::quiet_NaN();
    if (pending_) {
      const double g0 = log_.gaps.back();
      for (const auto& spec : potentials_) {
        if (spec.expected_decrease == 0 || !evaluable(g0, p) || !evaluable(gap, p)) continue;
        const double change = potential_change(spec, g0, gap, pending_->first, pending_->second);
        report_.record(spec.label, -change - spec.expected_decrease, 1e-9, log_.K());
      }
    }
    log_.gaps.push_back(gap);
    pending_.reset();
    report_.merge(check_global_bounds(log_, p));
    report_.merge(check_local_bounds(log_, p));
  }
  return report_;
}

MonitorReport check_global_bounds(const MonitorLog& log, const ProblemD& problem) {
  MonitorReport out;
  const int K = log.K();
  if (K == 0) return out;
  if (!problem.f_star) {
    out.skip("global", "needs f_star");
    return out;
  }
  if (static_cast<int>(log.gaps.size()) < K + 1) return out;
  RunFacts f(log, problem);
  const RunContext& ctx = f.ctx;
  LogBound bound(out, problem);
  const double gap1 = log.gaps[0];
  const double lg1 = std::log(gap1);
  const Prefix prog(log.progress);
  const Prefix G(log.ell_grad_sq);
  const bool monotone = is_monotone(ctx.variant.action);
  const double mu = problem.mu;

  if (f.ratio) {
    // Product of per-iteration ratios telescopes to the gap ratio.
    double log_prod = 0;
    for (int k = 1; k <= K; ++k) {
      const double rk = log.progress[k - 1];
      const double gnext = log.gaps[k];
      if (!(rk > 0) || !(gnext > 0)) break;
      log_prod += std::log(rk);
      const double lhs = std::log(gnext) - lg1;
      out.record("reduction.ratio_product", -std::abs(log_prod - lhs), 1e-10 * std::max(1.0, std::abs(lhs)), k);
      const double amgm = k * std::log(prog.upto(k) / k);
      out.record("reduction.ratio_amgm", amgm - log_prod, 1e-10 * std::max(1.0, std::abs(log_prod)), k);
    }
  } else if (monotone) {
    for (int k = 1; k <= K; ++k) {
      const double neg = -prog.upto(k);
      if (log.delta) {
        const double d2 = *log.delta * *log.delta;
        const double rhs = neg > 0 ? std::min(std::log(d2 / neg), lg1) : lg1;
        bound("reduction.hyper_convex", log.gaps[k], rhs, k);
      }
      if (mu > 0) bound("reduction.hyper_strong", log.gaps[k], lg1 + k * safe_log(1 - 2 * mu * neg / k), k);
    }
  }

  if (!f.constant && !f.regret_constant) {
    out.skip(std::string("global.") + (f.ratio ? "ratio" : "hyper"), "no bound for this learner or schedule");
    return out;
  }

  for (const auto& s : log.series) {
    if (s.sequence) continue;
    if (!s.in_set) {
      out.skip("global." + std::string(f.ratio ? "ratio" : "hyper") + "." + s.name, "benchmark outside the set");
      continue;
    }
    const Prefix bench(s.values);
    const double d = param_distance_sq(ctx.P1, s.P);
    for (int k = 1; k <= K; ++k) {
      double extra;
      if (f.constant)
        extra = f.excess(d / 2, G.upto(k));
      else
        extra = *f.regret_constant * std::sqrt(double(k));
      const std::string suffix = (f.constant ? "" : "_sqrtk");
      if (f.ratio) {
        bound("global.ratio" + suffix + "." + s.name, log.gaps[k], lg1 + k * safe_log((bench.upto(k) + extra) / k), k);
      } else if (monotone) {
        const double m = std::max(0.0, (-bench.upto(k) - extra) / k);
        if (log.delta) {
          const double d2 = *log.delta * *log.delta;
          const double rhs = m > 0 ? std::min(std::log(d2 / (k * m)), lg1) : lg1;
          bound("global.hyper" + suffix + "_convex." + s.name, log.gaps[k], rhs, k);
        }
        if (mu > 0) bound("global.hyper" + suffix + "_strong." + s.name, log.gaps[k], lg1 + k * safe_log(1 - 2 * mu * m), k);
      }
    }
  }

  // Best of the (1/L)I and optimal-preconditioner branches.
  if (f.ratio && f.constant && mu > 0) {
    const auto smooth = Stepsize<double>::scaled_identity(ctx.pattern, problem.dim, 1 / problem.L);
    const auto star = optimal_preconditioner(problem, ctx.pattern);
    const bool smooth_ok = ctx.set.contains(smooth, 1e-9);
    const bool star_ok = star && ctx.set.contains(star->P, 1e-9);
    if (smooth_ok || star_ok) {
      const double d1 = param_distance_sq(ctx.P1, smooth);
      const double d2 = star_ok ? param_distance_sq(ctx.P1, star->P) : 0;
      for (int k = 1; k <= K; ++k) {
        double base = inf;
        if (smooth_ok) base = std::min(base, 1 - 1 / problem.kappa() + f.excess(d1 / 2, G.upto(k)) / k);
        if (star_ok) base = std::min(base, 1 - 1 / star->kappa + f.excess(d2 / 2, G.upto(k)) / k);
        if (base > 0) bound("global.ratio_rate", log.gaps[k], lg1 + k * std::log(base), k);
      }
    }
  }
  return out;
}

MonitorReport check_local_bounds(const MonitorLog& log, const ProblemD& problem) {
  MonitorReport out;
  const int K = log.K();
  if (K == 0 || !problem.f_star || static_cast<int>(log.gaps.size()) < K + 1) return out;
  RunFacts f(log, problem);
  const RunContext& ctx = f.ctx;
  LogBound bound(out, problem);
  const double gap1 = log.gaps[0];
  const double lg1 = std::log(gap1);
  const Prefix prog(log.progress);
  const Prefix G(log.ell_grad_sq);
  const bool monotone = is_monotone(ctx.variant.action);
  const double mu = problem.mu;
  const double L = problem.L;

  // Benchmark sequences with their path length.
  for (const auto& s : log.series) {
    if (!s.sequence) continue;
    if (!f.constant) {
      out.skip(std::string("local.") + (f.ratio ? "ratio." : "hyper.") + s.name, "needs a constant rate");
      continue;
    }
    if (!s.in_set) {
      out.skip(std::string("local.") + (f.ratio ? "ratio." : "hyper.") + s.name, "sequence leaves the set");
      continue;
    }
    const Prefix seq(s.values);
    for (int k = 1; k <= K; ++k) {
      const double dist_term = s.dist_sq_to_P1[k - 1] / 2 + log.max_drift[k - 1] * s.path_length[k - 1];
      const double extra = f.excess(dist_term, G.upto(k));
      if (f.ratio) {
        bound("local.ratio." + s.name, log.gaps[k], lg1 + k * safe_log((seq.upto(k) + extra) / k), k);
      } else if (monotone) {
        const double m = std::max(0.0, (-seq.upto(k) - extra) / k);
        if (log.delta) {
          const double d2 = *log.delta * *log.delta;
          const double rhs = m > 0 ? std::min(std::log(d2 / (k * m)), lg1) : lg1;
          bound("local.hyper_convex." + s.name, log.gaps[k], rhs, k);
        }
        if (mu > 0) bound("local.hyper_strong." + s.name, log.gaps[k], lg1 + k * safe_log(1 - 2 * mu * m), k);
      }
    }
  }

  // Superlinear envelopes against the inverse Hessian.
  const BenchmarkSeries* inv = log.find("inverse-hessian");
  const bool inv_ok = inv && inv->in_set && mu > 0 && problem.hessian_lipschitz;
  const std::string sl = f.ratio ? "superlinear.ratio" : "superlinear.hyper";
  if (!inv_ok) {
    out.skip(sl, "needs the inverse Hessian in the candidate set and a known Hessian Lipschitz constant");
  } else {
    const double H = *problem.hessian_lipschitz;
    const double kappa = problem.kappa();
    const double d = param_distance_sq(ctx.P1, inv->P);
    if (f.constant) {
      const bool linear_rate = H == 0 || (f.ratio ? has_lookahead(ctx.variant.action)
                                                  : ctx.variant.action == ActionKind::monotone_lookahead);
      if (!linear_rate || (!f.ratio && !monotone)) {
        out.skip(sl, "needs a lookahead action when H > 0");
      } else {
        for (int k = 1; k <= K; ++k) {
          double C;
          if (f.ratio)
            C = H * H * kappa * kappa / (2 * mu * mu * mu) * gap1 + f.excess(d / 2, G.upto(k));
          else
            C = H * H * kappa * kappa * kappa / (2 * mu * mu * mu) * gap1 + 2 * L * f.excess(d / 2, G.upto(k));
          bound(sl, log.gaps[k], lg1 + k * safe_log(C / k), k);
        }
      }
    } else if (f.regret_constant) {
      // Evaluated only; with H > 0 the constants exceed double range.
      if (H != 0) {
        out.skip(sl + "_sqrtk", "evaluated for H = 0 only");
      } else if (f.ratio || monotone) {
        const double C2 = f.ratio ? *f.regret_constant : 3 * *f.D * (L * *f.D + 1);
        for (int k = 1; k <= K; ++k) bound(sl + "_sqrtk", log.gaps[k], lg1 + k * std::log(C2 / std::sqrt(double(k))), k);
      }
    }
  }

  // At least one of: progress beats the benchmark, or a superlinear bound.
  const bool dichotomy_run =
      f.constant && mu > 0 &&
      (f.ratio ? has_lookahead(ctx.variant.action) : ctx.variant.action == ActionKind::monotone_lookahead);
  if (dichotomy_run) {
    const double kappa = problem.kappa();
    const double hyp = f.ratio ? 1 / (4 * L * L) : 1 / (2 * L);
    const double lg_start = std::log(log.grad_sq[0] / (2 * mu));
    for (const auto& s : log.series) {
      if (s.sequence) continue;
      const std::string name = std::string(f.ratio ? "dichotomy.ratio." : "dichotomy.hyper.") + s.name;
      if (f.eta > hyp * (1 + 1e-12)) out.note(name, "rate above the range the dichotomy is stated for");
      const Prefix bench(s.values);
      const double d = param_distance_sq(ctx.P1, s.P);
      for (int k = 1; k <= K; ++k) {
        const double sum_prog = prog.upto(k);
        const double sum_bench = bench.upto(k);
        const double tol1 = 1e-10 * std::max({1.0, std::abs(sum_prog), std::abs(sum_bench)});
        const double margin1 = sum_bench - sum_prog + tol1;
        const double factor = f.ratio ? kappa * kappa * d / (f.eta * k) : 2 * L * d / (f.eta * k);
        const double gnext = log.gaps[k];
        double margin2;
        if (!(gnext > 0))
          margin2 = problem.f_star_estimated ? -inf : inf;
        else if (!evaluable(gnext, problem))
          continue;
        else if (factor > 0)
          margin2 = lg_start + k * std::log(factor) - std::log(gnext) + 1e-9 * k;
        else
          margin2 = -inf;
        out.record(name, std::max(margin1, margin2), 0, k);
      }
    }
  }
  return out;
}

std::string summarize(const MonitorReport& report) {
  if (report.empty()) return "no checks run\n";
  std::ostringstream os;
  size_t width = 5;
  for (const auto& r : report.records()) width = std::max(width, r.name.size());
  os << std::left << std::setw(static_cast<int>(width)) << "check" << "  " << std::setw(8) << "checked"
     << "  " << std::setw(13) << "worst_slack" << "  status\n";
  for (const auto& r : report.records()) {
    os << std::left << std::setw(static_cast<int>(width)) << r.name << "  " << std::setw(8) << r.checked << "  "
       << std::setw(13) << std::setprecision(4) << r.worst_slack << "  "
       << (r.skipped ? "skip" : (r.pass() ? "pass" : "FAIL"));
    if (!r.note.empty()) os << "  (" << r.note << ")";
    os << "\n";
  }
  os << report.failures() << " failed of " << report.records().size() << "\n";
  return os.str();
}

std::string report_to_json(const MonitorReport& report) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : report.records()) {
    nlohmann::json j;
    j["name"] = r.name;
    j["checked"] = r.checked;
    if (std::isfinite(r.worst_slack))
      j["worst_slack"] = r.worst_slack;
    else
      j["worst_slack"] = nullptr;
    j["pass"] = r.pass();
    if (r.skipped) j["skipped"] = true;
    if (!r.note.empty()) j["note"] = r.note;
    arr.push_back(std::move(j));
  }
  return arr.dump(2);
}

}  // namespace osgm
