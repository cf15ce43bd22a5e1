#include "osgm/problem_io.hpp"
#include "osgm/solver.hpp"
#include "osgm/trace_io.hpp"

#include "reference.hpp"

#include <gtest/gtest.h>

using namespace osgm;

namespace {

ref::Step to_ref(ActionKind a) {
  switch (a) {
    case ActionKind::vanilla: return ref::Step::vanilla;
    case ActionKind::monotone: return ref::Step::monotone;
    case ActionKind::lookahead: return ref::Step::lookahead;
    case ActionKind::monotone_lookahead: return ref::Step::monotone_lookahead;
  }
  return ref::Step::vanilla;
}

ref::Shape to_ref(PatternKind p) {
  switch (p) {
    case PatternKind::scalar: return ref::Shape::scalar;
    case PatternKind::diagonal: return ref::Shape::diagonal;
    case PatternKind::full: return ref::Shape::full;
  }
  return ref::Shape::full;
}

SolverConfig plain(FeedbackKind f, ActionKind a, PatternKind p, double eta, int iters) {
  SolverConfig c;
  c.feedback = f;
  c.action = a;
  c.pattern = p;
  c.unsafe = true;
  c.schedule = Schedule<double>::constant(eta);
  c.max_iters = iters;
  c.stop_gap = 0;
  c.stop_grad = 0;
  c.record_iterates = true;
  return c;
}

}  // namespace

class AgainstReference : public ::testing::TestWithParam<std::tuple<FeedbackKind, ActionKind, PatternKind>> {};

TEST_P(AgainstReference, IteratesAgree) {
  const auto [feedback, action, pattern] = GetParam();
  const ProblemD p = make_random_spd(6, 20, 3);
  const double eta = feedback == FeedbackKind::ratio ? 1 / (2 * p.L * p.L) : 0.5 / p.L;
  const int K = 60;
  const RunResult r = run_osgm(p, plain(feedback, action, pattern, eta, K));
  const ref::Trajectory t =
      ref::run(p, feedback == FeedbackKind::ratio, to_ref(action), to_ref(pattern), eta, Vec::Ones(6), K);
  // The library stops once the gap reaches zero; the reference always runs K steps.
  size_t horizon = std::min(r.iterates.size(), t.x.size());
  // Hypergradient feedback divides by the squared gradient norm, which amplifies
  // rounding differences near the optimum, so those runs are compared until the
  // gap has fallen a hundredfold.
  if (feedback == FeedbackKind::hypergradient) {
    const double gap1 = p.value(t.x[0]) - *p.f_star;
    size_t k = 1;
    while (k < horizon && p.value(t.x[k]) - *p.f_star > 1e-2 * gap1) ++k;
    horizon = k;
  }
  ASSERT_GE(horizon, 5u);
  for (size_t k = 0; k < horizon; ++k)
    EXPECT_LE((r.iterates[k] - t.x[k]).norm(), 1e-10 * std::max(1.0, t.x[k].norm())) << "k = " << k;
  for (size_t k = 0; k + 1 < horizon; ++k)
    EXPECT_NEAR(*r.trace.rows[k].feedback, t.feedback[k], 1e-10 * std::max(1.0, std::abs(t.feedback[k])));
  if (r.iterates.size() == t.x.size() && feedback == FeedbackKind::ratio) {
    EXPECT_LE((r.final_P.dense() - t.P.back()).norm(), 1e-9 * std::max(1.0, t.P.back().norm()));
  }
}

INSTANTIATE_TEST_SUITE_P(
    AllCombinations, AgainstReference,
    ::testing::Combine(::testing::Values(FeedbackKind::ratio, FeedbackKind::hypergradient),
                       ::testing::Values(ActionKind::vanilla, ActionKind::monotone, ActionKind::lookahead,
                                         ActionKind::monotone_lookahead),
                       ::testing::Values(PatternKind::scalar, PatternKind::diagonal, PatternKind::full)),
    [](const auto& info) {
      std::string name = to_string(std::get<0>(info.param)) + "_" + to_string(std::get<1>(info.param)) + "_" +
                         to_string(std::get<2>(info.param));
      for (char& c : name)
        if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
      return name;
    });

TEST(Solver, OracleCallColumnMatchesACountingProblem) {
  const std::vector<std::pair<ActionKind, long>> per_iter = {{ActionKind::vanilla, 2},
                                                            {ActionKind::monotone, 3},
                                                            {ActionKind::lookahead, 4},
                                                            {ActionKind::monotone_lookahead, 5}};
  for (const auto& [action, cost] : per_iter) {
    const ProblemD base = make_random_spd(5, 10, 1);
    auto counts = std::make_shared<OracleCounts>();
    const ProblemD p = with_counter(base, counts);
    SolverConfig c = plain(FeedbackKind::ratio, action, PatternKind::diagonal, 1 / (2 * base.L * base.L), 30);
    c.monitors = false;
    const RunResult r = run_osgm(p, c);
    ASSERT_EQ(r.trace.rows.size(), 30u);
    EXPECT_EQ(r.trace.rows.back().oracle_calls, counts->values + counts->gradients) << to_string(action);
    for (size_t k = 0; k < r.trace.rows.size(); ++k)
      EXPECT_EQ(r.trace.rows[k].oracle_calls, 2 + cost * static_cast<long>(k + 1)) << to_string(action);
  }
}

TEST(Solver, HypergradientWithoutAMonotoneActionNeedsUnsafe) {
  const ProblemD p = make_tridiagonal<double>(5);
  SolverConfig c;
  c.feedback = FeedbackKind::hypergradient;
  c.action = ActionKind::lookahead;
  try {
    run_osgm(p, c);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("--unsafe"), std::string::npos);
  }
  c.unsafe = true;
  EXPECT_NO_THROW(run_osgm(p, c));
}

TEST(Solver, RejectsInconsistentConfigurations) {
  const ProblemD p = make_tridiagonal<double>(5);
  SolverConfig c;
  c.set = CandidateSet<double>::box(0.5, 1.0);
  EXPECT_THROW(run_osgm(p, c), ConfigError);
  c = SolverConfig{};
  c.P1 = Stepsize<double>::scalar(0.1, 5);
  EXPECT_THROW(run_osgm(p, c), ConfigError);
  c = SolverConfig{};
  c.x1 = Vec::Ones(4);
  EXPECT_THROW(run_osgm(p, c), ConfigError);
  ProblemD no_star = p;
  no_star.f_star.reset();
  EXPECT_THROW(run_osgm(no_star, SolverConfig{}), ConfigError);
  c = SolverConfig{};
  c.action = ActionKind::vanilla;
  try {
    run_osgm(p, c);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("eta"), std::string::npos);
  }
}

TEST(Solver, TerminalStatuses) {
  const ProblemD p = make_diag_range(3);
  SolverConfig c;
  c.x1 = Vec::Zero(3);
  const RunResult at_opt = run_osgm(p, c);
  EXPECT_EQ(at_opt.trace.status, TerminalStatus::converged);
  EXPECT_TRUE(at_opt.trace.rows.empty());

  ProblemD no_star = p;
  no_star.f_star.reset();
  c.feedback = FeedbackKind::hypergradient;
  c.action = ActionKind::monotone_lookahead;
  EXPECT_EQ(run_osgm(no_star, c).trace.status, TerminalStatus::stationary);

  c = SolverConfig{};
  c.max_iters = 3;
  EXPECT_EQ(run_osgm(p, c).trace.status, TerminalStatus::max_iters);

  c = plain(FeedbackKind::ratio, ActionKind::vanilla, PatternKind::scalar, 1e-300, 5000);
  c.P1 = Stepsize<double>::scalar(100 / p.L, 3);
  c.monitors = false;
  EXPECT_EQ(run_osgm(p, c).trace.status, TerminalStatus::diverged);
}

TEST(Solver, ConvergesOnEveryBuiltinWithTheGuaranteedVariants) {
  for (const ProblemD& p : {make_tridiagonal<double>(20), make_random_spd(8, 50, 2),
                            make_piecewise_quadratic<double>(), make_random_logistic(30, 4, 0.05, 1)}) {
    for (Variant v : {lookahead_osgm_r, monotone_lookahead_osgm_h}) {
      SolverConfig c;
      c.feedback = v.feedback;
      c.action = v.action;
      c.max_iters = 3000;
      c.stop_gap = 1e-8;
      const RunResult r = run_osgm(p, c);
      EXPECT_EQ(r.trace.status, TerminalStatus::converged) << p.name << " " << v.name();
      EXPECT_TRUE(r.report.all_pass()) << p.name << " " << v.name() << "\n" << summarize(r.report);
    }
  }
}

TEST(Solver, BacktrackingRaisesAnUnderestimatedConstantAndKeepsChecksValid) {
  const ProblemD p = make_random_spd(6, 30, 4);
  for (FeedbackKind f : {FeedbackKind::ratio, FeedbackKind::hypergradient}) {
    SolverConfig c;
    c.feedback = f;
    c.action = f == FeedbackKind::ratio ? ActionKind::lookahead : ActionKind::monotone_lookahead;
    c.backtrack = true;
    c.L_init = p.L / 64;
    c.max_iters = 2000;
    const RunResult r = run_osgm(p, c);
    EXPECT_TRUE(r.report.all_pass()) << summarize(r.report);
    EXPECT_EQ(r.trace.status, TerminalStatus::converged);
    ASSERT_TRUE(r.trace.header_value("backtrack"));
  }
}

TEST(Solver, AdagradUsesASmallConstantRateByDefault) {
  const ProblemD p = make_random_spd(4, 10, 5);
  SolverConfig c;
  c.learner = LearnerKind::adagrad;
  c.pattern = PatternKind::diagonal;
  c.max_iters = 5;
  const RunResult r = run_osgm(p, c);
  EXPECT_EQ(*r.trace.header_value("eta"), format_double(0.1 / p.L));
}

TEST(Solver, HdmMatchesLookaheadHypergradientOsgm) {
  const ProblemD p = make_random_spd(10, 50, 6);
  SolverConfig c = plain(FeedbackKind::hypergradient, ActionKind::lookahead, PatternKind::full, 1 / p.L, 100);
  const RunResult a = run_osgm(p, c);
  const RunResult b = run_hdm(p, c);
  ASSERT_EQ(a.iterates.size(), b.iterates.size());
  for (size_t k = 0; k < a.iterates.size(); ++k)
    EXPECT_LE((a.iterates[k] - b.iterates[k]).norm(), 1e-12 * std::max(1.0, a.iterates[k].norm()));
  c.set = CandidateSet<double>::nonnegative();
  EXPECT_THROW(run_hdm(p, c), ConfigError);
  c.set = {};
  c.pattern = PatternKind::scalar;
  EXPECT_THROW(run_hdm(p, c), ConfigError);
}

TEST(Solver, GradientDescentMatchesTheClosedFormAndContracts) {
  const ProblemD p = make_random_spd(5, 20, 7);
  const auto P = Stepsize<double>::scaled_identity(PatternKind::full, 5, 1 / p.L);
  const RunResult r = run_gd(p, P, Vec::Ones(5), 50, 0, 0);
  const Mat M = Mat::Identity(5, 5) - *p.hessian_at_opt / p.L;
  Vec e = Vec::Ones(5) - *p.x_star;
  for (int k = 0; k < 50; ++k) e = M * e;
  EXPECT_LE((r.final_x - *p.x_star - e).norm(), 1e-12);
  const auto* rec = r.report.find("gd.contraction");
  ASSERT_TRUE(rec);
  EXPECT_EQ(rec->checked, 50);
  EXPECT_TRUE(rec->pass());
}

TEST(HeavyBall, ZeroMomentumReproducesThePlainRun) {
  const ProblemD p = make_random_spd(5, 20, 8);
  for (FeedbackKind f : {FeedbackKind::ratio, FeedbackKind::hypergradient}) {
    SolverConfig c = plain(f, ActionKind::monotone_lookahead, PatternKind::full, 0.5 / p.L, 80);
    c.monitors = false;
    c.experimental = true;
    MomentumConfig m;
    m.learned = false;
    m.beta = 0;
    m.omega = 0;
    const RunResult a = run_osgm(p, c);
    const RunResult b = run_osgm_heavyball(p, c, m);
    EXPECT_EQ(a.trace.rows, b.trace.rows);
    EXPECT_EQ(*b.trace.header_value("mode"), "experimental-heuristic");
  }
}

TEST(HeavyBall, LearnedMomentumRunsAndNeedsTheExperimentalFlag) {
  const ProblemD p = make_tridiagonal<double>(30);
  SolverConfig c;
  c.max_iters = 500;
  EXPECT_THROW(run_osgm_heavyball(p, c, MomentumConfig{}), ConfigError);
  c.experimental = true;
  const RunResult r = run_osgm_heavyball(p, c, MomentumConfig{});
  ASSERT_TRUE(r.trace.final_f_gap);
  EXPECT_LT(*r.trace.final_f_gap, *r.trace.rows.front().f_gap);
  EXPECT_TRUE(r.report.empty());
}

TEST(Solver, IdenticalConfigurationsGiveIdenticalTraces) {
  const ProblemD p = make_random_logistic(30, 4, 0.01, 9);
  SolverConfig c;
  c.pattern = PatternKind::diagonal;
  c.max_iters = 200;
  EXPECT_EQ(run_osgm(p, c).trace, run_osgm(p, c).trace);
}
