#include "osgm/verify.hpp"

#include "osgm/problem_io.hpp"
#include "osgm/solver.hpp"
#include "osgm/trace_io.hpp"

#include <Eigen/Eigenvalues>

#include <random>

namespace osgm {

namespace {

class Suite {
 public:
  explicit Suite(const SuiteOptions& o) : options_(o), rng_(o.seed) {}

  bool wants(const std::string& prefix) const {
    const std::string& f = options_.only;
    if (f.empty()) return true;
    return prefix.compare(0, f.size(), f) == 0 || f.compare(0, prefix.size(), prefix) == 0;
  }

  void record(const std::string& name, double slack, double tolerance) {
    if (wants(name) && name.compare(0, options_.only.size(), options_.only) == 0)
      report_.record(name, slack, tolerance);
  }

  void merge(const MonitorReport& other) { report_.merge(other.select(options_.only)); }

  // False when the filter lies inside one of the standalone sections, so the
  // monitored runs can be skipped.
  bool wants_runs() const {
    for (const char* section : {"problem.", "feedback.", "projection.", "trace.", "hdm."})
      if (options_.only.rfind(section, 0) == 0) return false;
    return true;
  }

  Vec random_vec(int n, double scale = 1) {
    std::normal_distribution<double> normal(0, scale);
    Vec v(n);
    for (int i = 0; i < n; ++i) v(i) = normal(rng_);
    return v;
  }

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }

  const SuiteOptions& options() const { return options_; }
  MonitorReport take() { return std::move(report_); }

 private:
  SuiteOptions options_;
  std::mt19937_64 rng_;
  MonitorReport report_;
};

std::vector<ProblemD> oracle_problems(std::uint64_t seed) {
  std::vector<ProblemD> out;
  out.push_back(make_tridiagonal<double>(20));
  out.push_back(make_tridiagonal_twin(20));
  out.push_back(make_piecewise_quadratic<double>());
  out.push_back(make_diag_range(10));
  out.push_back(make_random_spd(8, 50, seed));
  out.push_back(make_random_logistic(30, 4, 0.01, seed));
  return out;
}

void check_problems(Suite& s, const std::vector<ProblemD>& problems) {
  for (const ProblemD& p : problems) {
    const int n = p.dim;
    for (int t = 0; t < 100; ++t) {
      const Vec x = s.random_vec(n, 2), y = s.random_vec(n, 2);
      const double dx = (x - y).norm();
      const double dg = (p.gradient(x) - p.gradient(y)).norm();
      s.record("problem.smoothness." + p.name, p.L * dx - dg, 1e-8 * p.L * dx);
    }
    for (int t = 0; t < 50; ++t) {
      const Vec x = s.random_vec(n, 2);
      const Vec g = p.gradient(x);
      Vec fd(n);
      for (int i = 0; i < n; ++i) {
        const double h = 1e-6 * std::max(1.0, std::abs(x(i)));
        Vec a = x, b = x;
        a(i) += h;
        b(i) -= h;
        fd(i) = (p.value(a) - p.value(b)) / (2 * h);
      }
      s.record("problem.gradient_fd." + p.name, 1e-5 - (fd - g).norm() / std::max(1.0, g.norm()), 0);
    }
    if (p.quadratic && p.x_star && p.f_star) {
      s.record("problem.f_star_exact." + p.name, -std::abs(p.value(*p.x_star) - *p.f_star), 0);
      for (int t = 0; t < 50; ++t) {
        const Vec x = s.random_vec(n, 2);
        const double lhs = p.value(x) - *p.f_star;
        const double rhs = p.mu / 2 * (x - *p.x_star).squaredNorm();
        s.record("problem.quadratic_growth." + p.name, lhs - rhs, 1e-12 * std::max(1.0, lhs));
      }
    }
  }
  for (int n : {10, 50, 200}) {
    const ProblemD t = make_tridiagonal<double>(n);
    Eigen::SelfAdjointEigenSolver<Mat> es(tridiagonal_matrix<double>(n), Eigen::EigenvaluesOnly);
    const std::string name = "problem.tridiagonal_extremes." + std::to_string(n);
    s.record(name, 1e-10 - std::abs(t.L - es.eigenvalues().maxCoeff()), 0);
    s.record(name, 1e-10 - std::abs(t.mu - es.eigenvalues().minCoeff()), 0);
  }
}

Stepsize<double> random_stepsize(Suite& s, PatternKind pattern, int n, double L) {
  switch (pattern) {
    case PatternKind::scalar: return Stepsize<double>::scalar(s.uniform(0.2, 1.5) / L, n);
    case PatternKind::diagonal: {
      Vec d(n);
      for (int i = 0; i < n; ++i) d(i) = s.uniform(0.2, 1.5) / L;
      return Stepsize<double>::diagonal(d);
    }
    case PatternKind::full: {
      Mat M = Mat::Identity(n, n) / L;
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) M(i, j) += s.uniform(-0.3, 0.3) / L;
      return Stepsize<double>::full(M);
    }
  }
  return {};
}

// Central differences of P -> feedback over the pattern coefficients.
double feedback_fd_error(FeedbackKind kind, const ProblemD& p, const Vec& x, const Stepsize<double>& P) {
  const double fx = p.value(x);
  const Vec g = p.gradient(x);
  const auto sample = evaluate_feedback(kind, p, x, fx, g, P);
  if (!sample) return 0;
  const Mat analytic = contract_gradient(*sample, P.pattern()).dense_coeffs();
  const Eigen::Index m = P.num_coeffs();
  Vec fd(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(P.coeffs()[i])) / p.L;
    Stepsize<double> a = P, b = P;
    a.coeffs()[i] += h;
    b.coeffs()[i] -= h;
    fd(i) = (feedback_value(kind, p, x, fx, g, a) - feedback_value(kind, p, x, fx, g, b)) / (2 * h);
  }
  const Eigen::Map<const Vec> an(analytic.data(), m);
  return (fd - an).norm() / std::max(an.norm(), 1e-3 * p.L);
}

void check_feedback(Suite& s, const std::vector<ProblemD>& problems) {
  for (auto kind : {FeedbackKind::ratio, FeedbackKind::hypergradient})
    for (auto pattern : {PatternKind::scalar, PatternKind::diagonal, PatternKind::full}) {
      const std::string name = "feedback.gradient_fd." + to_string(kind) + "." + to_string(pattern);
      if (!s.wants(name)) continue;
      for (int t = 0; t < 30; ++t) {
        const ProblemD& p = problems[static_cast<size_t>(t) % problems.size()];
        const Vec x = (p.x_star ? *p.x_star : Vec(Vec::Zero(p.dim))) + s.random_vec(p.dim);
        const auto P = random_stepsize(s, pattern, p.dim, p.L);
        s.record(name, 1e-5 - feedback_fd_error(kind, p, x, P), 0);
      }
    }
  const ProblemD p = make_random_spd(6, 20, s.options().seed);
  for (auto kind : {FeedbackKind::ratio, FeedbackKind::hypergradient}) {
    const std::string name = "feedback.heavyball_fd." + to_string(kind);
    if (!s.wants(name)) continue;
    for (int t = 0; t < 10; ++t) {
      const Vec x = *p.x_star + s.random_vec(p.dim);
      const Vec x_prev = x + 0.1 * s.random_vec(p.dim);
      const auto P = random_stepsize(s, PatternKind::full, p.dim, p.L);
      const double beta = s.uniform(0, 0.9), omega = s.uniform(0, 1);
      const auto hb = heavyball_feedback(p, kind, x, x_prev, P, beta, omega);
      const double h = 1e-6;
      const double fd_beta = (heavyball_feedback(p, kind, x, x_prev, P, beta + h, omega).value -
                              heavyball_feedback(p, kind, x, x_prev, P, beta - h, omega).value) /
                             (2 * h);
      Mat fd(p.dim, p.dim);
      for (int j = 0; j < p.dim; ++j)
        for (int i = 0; i < p.dim; ++i) {
          const double hp = h / p.L;
          Mat A = P.matrix(), B = P.matrix();
          A(i, j) += hp;
          B(i, j) -= hp;
          fd(i, j) = (heavyball_feedback(p, kind, x, x_prev, Stepsize<double>::full(A), beta, omega).value -
                      heavyball_feedback(p, kind, x, x_prev, Stepsize<double>::full(B), beta, omega).value) /
                     (2 * hp);
        }
      s.record(name, 1e-5 - (fd - hb.grad_P).norm() / std::max(hb.grad_P.norm(), 1e-3), 0);
      s.record(name, 1e-5 - std::abs(fd_beta - hb.grad_beta) / std::max(std::abs(hb.grad_beta), 1e-3), 0);
    }
  }
}

void check_projections(Suite& s) {
  const int n = 5;
  const auto center = Stepsize<double>::scaled_identity(PatternKind::full, n, 0.5);
  const std::vector<std::pair<std::string, CandidateSet<double>>> sets = {
      {"box", CandidateSet<double>::box(-0.5, 1.0)},
      {"nonneg", CandidateSet<double>::nonnegative()},
      {"ball", CandidateSet<double>::ball(center, 0.7)}};
  for (const auto& [label, set] : sets) {
    if (!s.wants("projection.")) return;
    for (int t = 0; t < 50; ++t) {
      Mat A(n, n), B(n, n);
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          A(i, j) = s.uniform(-2, 2);
          B(i, j) = s.uniform(-2, 2);
        }
      const auto P = Stepsize<double>::full(A), Q = Stepsize<double>::full(B);
      const auto pP = project(P, set), pQ = project(Q, set);
      s.record("projection.feasible." + label, set.contains(pP) ? 0.0 : -1.0, 0);
      s.record("projection.idempotent." + label, -param_distance(project(pP, set), pP), 1e-14);
      s.record("projection.nonexpansive." + label, param_distance(P, Q) - param_distance(pP, pQ), 1e-12);
      // Variational inequality <P - proj P, Z - proj P> <= 0 for Z in the set.
      const auto Z = project(Stepsize<double>::full(Mat(A.transpose())), set);
      const double vi = ((P.matrix() - pP.matrix()).cwiseProduct(Z.matrix() - pP.matrix())).sum();
      s.record("projection.variational." + label, -vi, 1e-12);
    }
  }
}

void check_traces(Suite& s) {
  if (!s.wants("trace.")) return;
  const ProblemD p = make_random_spd(6, 30, s.options().seed);
  SolverConfig c;
  c.max_iters = 60;
  c.seed = s.options().seed;
  const auto a = run_osgm(p, c), b = run_osgm(p, c);
  const std::string csv = trace_to_csv(a.trace);
  s.record("trace.deterministic", csv == trace_to_csv(b.trace) ? 0.0 : -1.0, 0);
  s.record("trace.round_trip", parse_trace(csv) == a.trace ? 0.0 : -1.0, 0);
}

void check_hdm(Suite& s) {
  if (!s.wants("hdm.")) return;
  const ProblemD p = make_random_spd(6, 30, s.options().seed + 1);
  SolverConfig c;
  c.feedback = FeedbackKind::hypergradient;
  c.action = ActionKind::lookahead;
  c.unsafe = true;
  c.max_iters = 60;
  c.stop_gap = 0;
  c.stop_grad = 0;
  c.record_iterates = true;
  c.schedule = Schedule<double>::constant(1 / p.L);
  const auto osgm_run = run_osgm(p, c);
  const auto hdm_run = run_hdm(p, c);
  const size_t m = std::min(osgm_run.iterates.size(), hdm_run.iterates.size());
  for (size_t k = 0; k < m; ++k) {
    const double scale = std::max(1.0, osgm_run.iterates[k].norm());
    s.record("hdm.lookahead_equivalence", -(osgm_run.iterates[k] - hdm_run.iterates[k]).norm(), 1e-12 * scale);
  }
}

struct RunCase {
  ProblemD problem;
  std::vector<BenchmarkSequence> sequences;
};

void check_runs(Suite& s) {
  const std::uint64_t seed = s.options().seed;
  std::vector<RunCase> cases;
  cases.push_back({make_tridiagonal<double>(30), {}});
  cases.push_back({make_random_spd(10, 100, seed), {}});
  cases.push_back({make_piecewise_quadratic<double>(), {}});
  cases.push_back({make_random_logistic(40, 5, 0.01, seed), {}});
  for (auto feedback : {FeedbackKind::ratio, FeedbackKind::hypergradient})
    for (auto action : {ActionKind::vanilla, ActionKind::monotone, ActionKind::lookahead, ActionKind::monotone_lookahead})
      for (auto pattern : {PatternKind::scalar, PatternKind::diagonal, PatternKind::full})
        for (const RunCase& rc : cases) {
          SolverConfig c;
          c.feedback = feedback;
          c.action = action;
          c.pattern = pattern;
          c.unsafe = true;
          c.max_iters = s.options().iters;
          c.seed = seed;
          if (!has_lookahead(action)) c.set = CandidateSet<double>::box(-2 / rc.problem.L, 2 / rc.problem.L);
          if (rc.problem.name == "piecewise2d" && pattern != PatternKind::scalar) c.sequences = region_sequences(pattern);
          s.merge(run_osgm(rc.problem, c).report);
        }
  for (const RunCase& rc : cases) {
    SolverConfig c;
    c.learner = LearnerKind::adagrad;
    c.pattern = PatternKind::diagonal;
    c.max_iters = s.options().iters;
    s.merge(run_osgm(rc.problem, c).report);
  }
  for (const RunCase& rc : cases) {
    if (rc.problem.mu <= 0 || !rc.problem.f_star) continue;
    const auto P = Stepsize<double>::scaled_identity(PatternKind::full, rc.problem.dim, 1 / rc.problem.L);
    s.merge(run_gd(rc.problem, P, Vec::Ones(rc.problem.dim), s.options().iters).report);
  }
}

}  // namespace

MonitorReport run_invariant_suite(const SuiteOptions& options) {
  Suite s(options);
  const auto problems = oracle_problems(options.seed);
  if (s.wants("problem.")) check_problems(s, problems);
  if (s.wants("feedback.")) check_feedback(s, problems);
  check_projections(s);
  check_traces(s);
  check_hdm(s);
  if (s.wants_runs()) check_runs(s);
  return s.take();
}

}  // namespace osgm
