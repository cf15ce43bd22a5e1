#pragma once

#include "osgm/landscape.hpp"
#include "osgm/learner.hpp"
#include "osgm/report.hpp"

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace osgm {

struct PotentialSpec {
  enum class Kind { phi_r, phi_h, omega_h };
  Kind kind = Kind::phi_r;
  double rho = 0;
  Stepsize<double> benchmark;
  double expected_decrease = 0;
  std::string label;
};

std::string to_string(PotentialSpec::Kind k);

// Potential value from a known gap f(x) - f*; nullopt when the gap is not
// positive (not evaluable past convergence).
std::optional<double> potential_value(const PotentialSpec& spec, double gap, const Stepsize<double>& P);
std::optional<double> eval_potential(const PotentialSpec& spec, const Vec& x, const Stepsize<double>& P,
                                     const ProblemD& problem);
// phi(x', P') - phi(x, P) evaluated without cancellation.
double potential_change(const PotentialSpec& spec, double gap, double gap_next, const Stepsize<double>& P,
                        const Stepsize<double>& P_next);

// Inverse of the Hessian at the optimum, restricted to the pattern; nullopt
// when absent or not representable.
std::optional<Stepsize<double>> inverse_hessian(const ProblemD& problem, PatternKind pattern);

// kappa_B with r_x(B) <= 1 - 1/kappa_B for all x: 1 for the inverse Hessian,
// kappa for (1/L)I, and a spectral computation for other stepsizes on
// quadratics.
std::optional<double> benchmark_condition(const ProblemD& problem, const Stepsize<double>& B);

struct OptimalPreconditioner {
  Stepsize<double> P;
  double kappa;
};
std::optional<OptimalPreconditioner> optimal_preconditioner(const ProblemD& problem, PatternKind pattern);

// A stepsize chosen per iteration, possibly depending on the iterate.
struct BenchmarkSequence {
  std::string name;
  std::function<Stepsize<double>(int k, const Vec& x)> at;
};

// Region-wise stepsizes on piecewise2d: the inverse Hessians diag(2,1),
// diag(2/3,1) and the Hessians diag(0.5,1), diag(1.5,1).
std::vector<BenchmarkSequence> region_sequences(PatternKind pattern);

struct RunContext {
  Variant variant;
  LearnerKind learner = LearnerKind::ogd;
  PatternKind pattern = PatternKind::full;
  CandidateSet<double> set;
  Stepsize<double> P1;
  Schedule<double> schedule;
  bool backtracking = false;
  std::vector<std::pair<std::string, Stepsize<double>>> benchmarks;
  std::vector<BenchmarkSequence> sequences;
};

struct BenchmarkSeries {
  std::string name;
  bool sequence = false;
  // Fixed value (benchmarks) or last value (sequences).
  Stepsize<double> P;
  std::vector<double> values;
  bool in_set = true;
  std::optional<double> kappa;
  // Sequences: prefix path length and ||P_hat_k - P1||^2, per k.
  std::vector<double> path_length;
  std::vector<double> dist_sq_to_P1;
};

struct MonitorLog {
  RunContext context;
  double L = 0;
  // Indexed by k - 1. gaps has K + 1 entries once finished.
  std::vector<double> gaps;
  std::vector<double> grad_sq;
  std::vector<double> feedback;
  std::vector<double> progress;
  std::vector<double> ell_grad_sq;
  std::vector<double> eta;
  // max_{j <= k} ||P_j - P1||.
  std::vector<double> max_drift;
  std::vector<BenchmarkSeries> series;
  std::optional<double> delta;
  bool eta_revised = false;

  int K() const { return static_cast<int>(feedback.size()); }
  const BenchmarkSeries* find(const std::string& name) const;
};

struct IterationView {
  int k;
  const Vec& x;
  double fx;
  const Vec& g;
  const FeedbackSample<double>& sample;
  const ActionOutcome<double>& outcome;
  const PatternGradient<double>& grad;
  const Stepsize<double>& P_k;
  const Stepsize<double>& P_next;
  double eta;
  double L;
};

// Per-run accumulator. Benchmark feedback is evaluated on the problem it was
// given, so callers that count oracle calls pass an uncounted copy.
class RunMonitor {
 public:
  RunMonitor(ProblemD problem, RunContext context, double L, std::optional<double> delta);
  void observe(const IterationView& it);
  MonitorReport finish(double f_final);
  const MonitorLog& log() const { return log_; }
  const MonitorReport& report() const { return report_; }

 private:
  ProblemD problem_;
  MonitorLog log_;
  MonitorReport report_;
  RegretTracker<double> tracker_;
  std::optional<mat_type<double>> hessian_inverse_;
  std::vector<PotentialSpec> potentials_;
  std::optional<std::pair<Stepsize<double>, Stepsize<double>>> pending_;
};

// Potentials whose per-iteration decrease the run's configuration guarantees.
std::vector<PotentialSpec> potential_specs(const ProblemD& problem, const RunContext& ctx, double L,
                                           std::optional<double> delta);

MonitorReport check_global_bounds(const MonitorLog& log, const ProblemD& problem);
MonitorReport check_local_bounds(const MonitorLog& log, const ProblemD& problem);

std::string summarize(const MonitorReport& report);
std::string report_to_json(const MonitorReport& report);

}  // namespace osgm
