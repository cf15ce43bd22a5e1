#include "osgm/feedback.hpp"
#include "osgm/problem_io.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace osgm;

namespace {

Stepsize<double> random_stepsize(std::mt19937_64& rng, PatternKind pattern, int n, double L) {
  std::uniform_real_distribution<double> u(0.2, 1.5), v(-0.3, 0.3);
  switch (pattern) {
    case PatternKind::scalar: return Stepsize<double>::scalar(u(rng) / L, n);
    case PatternKind::diagonal: {
      Vec d(n);
      for (int i = 0; i < n; ++i) d(i) = u(rng) / L;
      return Stepsize<double>::diagonal(d);
    }
    case PatternKind::full: {
      Mat M = Mat::Identity(n, n) / L;
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) M(i, j) += v(rng) / L;
      return Stepsize<double>::full(M);
    }
  }
  return {};
}

// Feedback from its definition, with P given densely.
double feedback_oracle(FeedbackKind kind, const ProblemD& p, const Vec& x, const Mat& P) {
  const Vec g = p.gradient(x);
  const double fp = p.value(Vec(x - P * g));
  if (kind == FeedbackKind::ratio) return (fp - *p.f_star) / (p.value(x) - *p.f_star);
  return (fp - p.value(x)) / g.squaredNorm();
}

Vec random_vec(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> normal;
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

}  // namespace

class FeedbackGradient : public ::testing::TestWithParam<std::tuple<FeedbackKind, PatternKind>> {};

TEST_P(FeedbackGradient, MatchesCentralDifferences) {
  const auto [kind, pattern] = GetParam();
  const std::vector<ProblemD> problems = {make_tridiagonal<double>(8), make_random_spd(5, 30, 1),
                                          make_random_logistic(30, 4, 0.05, 2), make_piecewise_quadratic<double>()};
  std::mt19937_64 rng(21);
  for (int t = 0; t < 30; ++t) {
    const ProblemD& p = problems[static_cast<size_t>(t) % problems.size()];
    const Vec x = *p.x_star + random_vec(rng, p.dim);
    const Stepsize<double> P = random_stepsize(rng, pattern, p.dim, p.L);
    const auto s = evaluate_feedback(kind, p, x, p.value(x), p.gradient(x), P);
    ASSERT_TRUE(s);
    EXPECT_NEAR(s->value, feedback_oracle(kind, p, x, P.dense()), 1e-12 * std::max(1.0, std::abs(s->value)));
    const Mat analytic = contract_gradient(*s, pattern).dense_coeffs();
    const Eigen::Index m = P.num_coeffs();
    const Eigen::Map<const Vec> an(analytic.data(), m);
    Vec fd(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double h = 1e-6 / p.L;
      Stepsize<double> a = P, b = P;
      a.coeffs()[i] += h;
      b.coeffs()[i] -= h;
      fd(i) = (feedback_oracle(kind, p, x, a.dense()) - feedback_oracle(kind, p, x, b.dense())) / (2 * h);
    }
    EXPECT_LE((fd - an).norm(), 1e-5 * std::max(an.norm(), 1e-3)) << p.name << " trial " << t;
  }
}

INSTANTIATE_TEST_SUITE_P(AllKinds, FeedbackGradient,
                         ::testing::Combine(::testing::Values(FeedbackKind::ratio, FeedbackKind::hypergradient),
                                            ::testing::Values(PatternKind::scalar, PatternKind::diagonal,
                                                              PatternKind::full)),
    [](const auto& info) {
      std::string name = to_string(std::get<0>(info.param)) + "_" + to_string(std::get<1>(info.param));
      for (char& c : name)
        if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
      return name;
    });

TEST(Feedback, InverseHessianHasZeroRatioOnQuadratics) {
  const ProblemD p = make_random_spd(6, 50, 3);
  const Stepsize<double> Ainv = Stepsize<double>::full(p.hessian_at_opt->inverse());
  std::mt19937_64 rng(22);
  for (int t = 0; t < 20; ++t) {
    const auto s = ratio_feedback(p, Vec(*p.x_star + random_vec(rng, 6)), Ainv);
    ASSERT_TRUE(s);
    EXPECT_NEAR(s->value, 0.0, 1e-12);
  }
}

TEST(Feedback, ScalarHypergradientOnAQuadraticHasAClosedForm) {
  // h(alpha I) = -alpha + alpha^2 g^T A g / (2 ||g||^2).
  const ProblemD p = make_random_spd(5, 20, 4);
  const Mat& A = *p.hessian_at_opt;
  std::mt19937_64 rng(23);
  for (int t = 0; t < 20; ++t) {
    const Vec x = *p.x_star + random_vec(rng, 5);
    const Vec g = p.gradient(x);
    const double alpha = 0.7 / p.L;
    const auto s = hypergradient_feedback(p, x, Stepsize<double>::scalar(alpha, 5));
    ASSERT_TRUE(s);
    const double q = g.dot(A * g) / g.squaredNorm();
    EXPECT_NEAR(s->value, -alpha + alpha * alpha * q / 2, 1e-12);
    EXPECT_NEAR(contract_gradient(*s, PatternKind::scalar).alpha, -1 + alpha * q, 1e-10);
  }
}

TEST(Feedback, GradientsRespectTheSmoothnessConstants) {
  std::mt19937_64 rng(24);
  const ProblemD p = make_random_spd(5, 10, 5);
  const auto c = feedback_constants(p);
  for (auto kind : {FeedbackKind::ratio, FeedbackKind::hypergradient}) {
    for (int t = 0; t < 50; ++t) {
      const Vec x = *p.x_star + random_vec(rng, 5);
      const auto P = random_stepsize(rng, PatternKind::full, 5, p.L);
      const auto Q = random_stepsize(rng, PatternKind::full, 5, p.L);
      const double fx = p.value(x);
      const Vec g = p.gradient(x);
      const auto a = evaluate_feedback(kind, p, x, fx, g, P), b = evaluate_feedback(kind, p, x, fx, g, Q);
      const double lhs = (a->gradient_dense() - b->gradient_dense()).norm();
      const double L = kind == FeedbackKind::ratio ? c.ratio_smoothness : c.hyper_smoothness;
      EXPECT_LE(lhs, L * (P.dense() - Q.dense()).norm() * (1 + 1e-10));
    }
  }
}

TEST(Feedback, ReturnsNothingAtTheOptimum) {
  const ProblemD p = make_diag_range(3);
  const auto P = Stepsize<double>::scalar(0.5, 3);
  EXPECT_FALSE(ratio_feedback(p, Vec(Vec::Zero(3)), P));
  EXPECT_FALSE(hypergradient_feedback(p, Vec(Vec::Zero(3)), P));
}

TEST(Feedback, ChargesOneValueAndOneGradientCallForTheProposal) {
  const ProblemD base = make_diag_range(3);
  auto counts = std::make_shared<OracleCounts>();
  const ProblemD p = with_counter(base, counts);
  const Vec x = Vec::Ones(3);
  const double fx = base.value(x);
  const Vec g = base.gradient(x);
  const auto s = evaluate_feedback(FeedbackKind::ratio, p, x, fx, g, Stepsize<double>::scalar(0.3, 3));
  ASSERT_TRUE(s);
  EXPECT_EQ(counts->values.load(), 1);
  EXPECT_EQ(counts->gradients.load(), 1);
  EXPECT_EQ(s->value_calls, 1);
  EXPECT_EQ(s->gradient_calls, 1);
}

TEST(Feedback, ConstantsScaleWithTheDiameter) {
  const auto c = feedback_constants<double>(2.0, 3.0);
  EXPECT_DOUBLE_EQ(c.ratio_smoothness, 8.0);
  EXPECT_DOUBLE_EQ(c.hyper_smoothness, 2.0);
  EXPECT_DOUBLE_EQ(*c.ratio_lipschitz, 2 * 2.0 * (2.0 * 3.0 + 1));
  EXPECT_DOUBLE_EQ(*c.hyper_lipschitz, 2.0 * 3.0 + 1);
  EXPECT_FALSE(feedback_constants<double>(2.0).ratio_lipschitz);
}
