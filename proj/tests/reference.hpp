// Straightforward dense implementation of the online scaled gradient loop,
// kept independent of the library's learner and action code so solver runs
// can be compared against it.
#pragma once

#include "osgm/problem.hpp"

#include <Eigen/Dense>

#include <vector>

namespace ref {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Shape { scalar, diagonal, full };
enum class Step { vanilla, monotone, lookahead, monotone_lookahead };

struct Trajectory {
  std::vector<VectorXd> x;
  std::vector<MatrixXd> P;
  std::vector<double> feedback;
  std::vector<double> feedback_grad_sq;
};

// Restricts a dense feedback gradient to the shape's coefficients, returned
// as the dense matrix of the step direction together with its coefficient
// norm squared.
inline std::pair<MatrixXd, double> restrict(const MatrixXd& G, Shape shape) {
  const auto n = G.rows();
  switch (shape) {
    case Shape::scalar: {
      const double t = G.trace();
      return {t * MatrixXd::Identity(n, n), t * t};
    }
    case Shape::diagonal: {
      const VectorXd d = G.diagonal();
      return {MatrixXd(d.asDiagonal()), d.squaredNorm()};
    }
    case Shape::full: return {G, G.squaredNorm()};
  }
  return {};
}

// One iteration as seen by a visitor: iterate, stepsize before and after the
// update, feedback, its gradient's coefficient norm squared, and the next
// iterate.
struct Iteration {
  int k;
  const VectorXd& x;
  const MatrixXd& P;
  const MatrixXd& P_next;
  double feedback;
  double grad_sq;
  const VectorXd& x_next;
};

// Runs until iters steps are taken, the feedback is undefined, or the gap
// falls to stop_gap.
template <class Visit>
VectorXd visit(const osgm::ProblemD& p, bool ratio, Step step, Shape shape, double eta, VectorXd x, MatrixXd P,
               int iters, Visit&& on_step, double stop_gap = 0) {
  for (int k = 1; k <= iters; ++k) {
    const double fx = p.value(x);
    const VectorXd g = p.gradient(x);
    const double denom = ratio ? fx - *p.f_star : g.squaredNorm();
    if (!(denom > 0)) break;
    if (stop_gap > 0 && !(fx - *p.f_star > stop_gap)) break;
    const VectorXd half = x - P * g;
    const double fh = p.value(half);
    const VectorXd gh = p.gradient(half);
    const double fb = ratio ? (fh - *p.f_star) / denom : (fh - fx) / denom;
    const MatrixXd G = -gh * g.transpose() / denom;
    const auto [dir, gsq] = restrict(G, shape);
    const MatrixXd P_next = P - eta * dir;

    VectorXd cand = half;
    if (step == Step::lookahead || step == Step::monotone_lookahead) cand = half - gh / p.L;
    if ((step == Step::monotone || step == Step::monotone_lookahead) && !(p.value(cand) <= fx)) cand = x;
    on_step(Iteration{k, x, P, P_next, fb, gsq, cand});
    x = cand;
    P = P_next;
  }
  return x;
}

inline Trajectory run(const osgm::ProblemD& p, bool ratio, Step step, Shape shape, double eta, VectorXd x,
                      int iters) {
  Trajectory t;
  MatrixXd last = MatrixXd::Identity(p.dim, p.dim) / p.L;
  const VectorXd end = visit(p, ratio, step, shape, eta, x, last, iters, [&](const Iteration& s) {
    t.x.push_back(s.x);
    t.P.push_back(s.P);
    t.feedback.push_back(s.feedback);
    t.feedback_grad_sq.push_back(s.grad_sq);
    last = s.P_next;
  });
  t.x.push_back(end);
  t.P.push_back(last);
  return t;
}

}  // namespace ref
