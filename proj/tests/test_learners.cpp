#include "osgm/learner.hpp"
#include "osgm/problem_io.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace osgm;

namespace {

PatternGradient<double> diag_gradient(const Vec& d) {
  PatternGradient<double> g;
  g.pattern = PatternKind::diagonal;
  g.n = static_cast<int>(d.size());
  g.diag = d;
  return g;
}

}  // namespace

TEST(Schedule, RatesFollowTheirDefinitions) {
  EXPECT_DOUBLE_EQ(Schedule<double>::constant(0.3).eta(17), 0.3);
  EXPECT_DOUBLE_EQ(Schedule<double>::anytime(2.0).eta(4), 1.0);
  EXPECT_DOUBLE_EQ(Schedule<double>::fixed_horizon(2.0, 16).eta(3), 0.5);
  EXPECT_THROW(Schedule<double>::fixed_horizon(1.0, 0).eta(1), ConfigError);
}

TEST(Schedule, DefaultsPerVariant) {
  const ProblemD p = make_tridiagonal<double>(10);
  const auto none = CandidateSet<double>::unconstrained();
  EXPECT_DOUBLE_EQ(default_schedule(lookahead_osgm_r, p, none, PatternKind::full).eta(1), 1 / (2 * p.L * p.L));
  EXPECT_DOUBLE_EQ(default_schedule(monotone_lookahead_osgm_h, p, none, PatternKind::full).eta(1), 1 / p.L);
  EXPECT_THROW(default_schedule(vanilla_osgm_r, p, none, PatternKind::full), ConfigError);
  const auto box = CandidateSet<double>::box(-1, 1);
  const double D = 2.0 * 10;
  const auto s = default_schedule(vanilla_osgm_r, p, box, PatternKind::full);
  EXPECT_EQ(s.kind, Schedule<double>::Kind::anytime);
  EXPECT_DOUBLE_EQ(s.value, D / (2 * p.L * (p.L * D + 1)));
  EXPECT_DOUBLE_EQ(default_schedule(monotone_osgm_h, p, box, PatternKind::full).value, D / (p.L * D + 1));
}

TEST(Learner, OgdIsAProjectedGradientStep) {
  const auto set = CandidateSet<double>::box(0, 1);
  auto s = make_learner(LearnerKind::ogd, Stepsize<double>::diagonal(Vec::Constant(3, 0.5)),
                        Schedule<double>::constant(0.25), set);
  Vec d(3);
  d << -4, 1, 0.4;
  s = learner_step(std::move(s), diag_gradient(d));
  Vec expect(3);
  expect << 1.0, 0.25, 0.4;
  EXPECT_LE((s.current.diag() - expect).norm(), 1e-15);
  EXPECT_EQ(s.k, 2);
}

TEST(Learner, AdagradScalesByAccumulatedSquares) {
  auto s = make_learner(LearnerKind::adagrad, Stepsize<double>::diagonal(Vec::Zero(2)),
                        Schedule<double>::constant(1.0), CandidateSet<double>::unconstrained());
  s.eps = 0;
  Vec g1(2), g2(2);
  g1 << 3, -4;
  g2 << 4, 3;
  s = learner_step(std::move(s), diag_gradient(g1));
  EXPECT_NEAR(s.current.diag()(0), -1.0, 1e-15);
  EXPECT_NEAR(s.current.diag()(1), 1.0, 1e-15);
  s = learner_step(std::move(s), diag_gradient(g2));
  EXPECT_NEAR(s.current.diag()(0), -1.0 - 4.0 / 5.0, 1e-15);
  EXPECT_NEAR(s.current.diag()(1), 1.0 - 3.0 / 5.0, 1e-15);
  EXPECT_NEAR(s.accumulator->diag()(0), 25.0, 1e-12);
}

TEST(Learner, RejectsAnInitialStepsizeOutsideTheSet) {
  EXPECT_THROW(make_learner(LearnerKind::ogd, Stepsize<double>::scalar(2.0, 3), Schedule<double>::constant(1.0),
                            CandidateSet<double>::box(0, 1)),
               ConfigError);
}

TEST(Learner, RevisedScheduleNeverRaisesTheRate) {
  auto s = make_learner(LearnerKind::ogd, Stepsize<double>::scalar(0.0, 2), Schedule<double>::constant(0.1),
                        CandidateSet<double>::unconstrained());
  PatternGradient<double> g;
  g.pattern = PatternKind::scalar;
  g.n = 2;
  g.alpha = 1;
  s = learner_step(std::move(s), g);
  revise_schedule(s, Schedule<double>::constant(0.5));
  EXPECT_DOUBLE_EQ(s.eta(), 0.1);
  revise_schedule(s, Schedule<double>::constant(0.05));
  EXPECT_DOUBLE_EQ(s.eta(), 0.05);
}

// Online gradient descent on random linear losses: the tracker's slacks agree
// with the regret computed directly, and the bounds hold.
TEST(Regret, MatchesDirectComputationOnLinearLosses) {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> normal;
  const int n = 3, K = 200;
  const double eta = 0.05;
  const auto P1 = Stepsize<double>::diagonal(Vec::Zero(n));
  const auto B = Stepsize<double>::diagonal(Vec::Constant(n, 0.3));
  auto s = make_learner(LearnerKind::ogd, P1, Schedule<double>::constant(eta), CandidateSet<double>::unconstrained());
  RegretTracker<double> t(P1);
  double own = 0, bench = 0, gsq = 0;
  for (int k = 0; k < K; ++k) {
    Vec c(n);
    for (int i = 0; i < n; ++i) c(i) = normal(rng);
    const double ell = c.dot(s.current.diag());
    const double ell_b = c.dot(B.diag());
    own += ell;
    bench += ell_b;
    gsq += c.squaredNorm();
    const auto P_k = s.current;
    s = learner_step(std::move(s), diag_gradient(c));
    const auto steps = update_regret(t, ell, diag_gradient(c), eta, P_k, s.current, {{"B", B, ell_b}},
                                     CandidateSet<double>::unconstrained());
    ASSERT_EQ(steps.size(), 1u);
    EXPECT_GE(steps[0].slack, -steps[0].tolerance);
    const auto* track = t.find("B");
    const double direct = param_distance_sq(P1, B) / (2 * eta) + eta / 2 * gsq - (own - bench);
    EXPECT_NEAR(static_regret_slack(t, *track, eta), direct, 1e-9 * std::max(1.0, std::abs(direct)));
    EXPECT_GE(direct, 0);
  }
  EXPECT_DOUBLE_EQ(t.find("B")->path_length, 0.0);
}

TEST(Regret, DynamicBoundHoldsAgainstASwitchingSequence) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> normal;
  const int n = 2, K = 300;
  const double eta = 0.02;
  const auto P1 = Stepsize<double>::diagonal(Vec::Zero(n));
  auto s = make_learner(LearnerKind::ogd, P1, Schedule<double>::constant(eta), CandidateSet<double>::unconstrained());
  RegretTracker<double> t(P1);
  const auto A = Stepsize<double>::diagonal(Vec::Constant(n, 0.5));
  const auto C = Stepsize<double>::diagonal(Vec::Constant(n, -0.5));
  double path = 0;
  for (int k = 0; k < K; ++k) {
    const auto& B = (k / 50) % 2 == 0 ? A : C;
    if (k > 0 && k % 50 == 0) path += param_distance(A, C);
    Vec c(n);
    for (int i = 0; i < n; ++i) c(i) = normal(rng) + ((k / 50) % 2 == 0 ? -1 : 1);
    const double ell = c.dot(s.current.diag());
    const auto P_k = s.current;
    s = learner_step(std::move(s), diag_gradient(c));
    update_regret(t, ell, diag_gradient(c), eta, P_k, s.current, {{"seq", B, c.dot(B.diag())}},
                  CandidateSet<double>::unconstrained());
    EXPECT_GE(dynamic_regret_slack(t, *t.find("seq"), eta), -1e-9);
  }
  EXPECT_NEAR(t.find("seq")->path_length, path, 1e-12);
}

TEST(Regret, BenchmarksOutsideTheSetAreFlagged) {
  const auto set = CandidateSet<double>::box(0, 1);
  const auto P1 = Stepsize<double>::diagonal(Vec::Constant(2, 0.5));
  RegretTracker<double> t(P1);
  const auto outside = Stepsize<double>::diagonal(Vec::Constant(2, 2.0));
  const auto steps = update_regret(t, 0.0, diag_gradient(Vec::Zero(2)), 0.1, P1, P1, {{"far", outside, 0.0}}, set);
  EXPECT_TRUE(steps.empty());
  EXPECT_FALSE(t.find("far")->in_set);
}
