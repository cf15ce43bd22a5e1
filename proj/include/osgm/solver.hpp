#pragma once

#include "osgm/diagnostics.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace osgm {

struct SolverConfig {
  FeedbackKind feedback = FeedbackKind::ratio;
  ActionKind action = ActionKind::lookahead;
  LearnerKind learner = LearnerKind::ogd;
  PatternKind pattern = PatternKind::full;
  CandidateSet<double> set;
  // Defaults to (1/L)I in the pattern.
  std::optional<Stepsize<double>> P1;
  // Defaults to the all-ones vector.
  std::optional<Vec> x1;
  // nullopt selects the variant's default schedule.
  std::optional<Schedule<double>> schedule;
  int max_iters = 1000;
  double stop_gap = 1e-10;
  double stop_grad = 1e-8;
  bool monitors = true;
  std::uint64_t seed = 0;
  // Allows hypergradient feedback without a monotone action.
  bool unsafe = false;

  bool backtrack = false;
  double L_init = 0;
  double backtrack_factor = 0.5;
  double adagrad_eps = 1e-12;

  bool record_iterates = false;
  std::vector<std::pair<std::string, Stepsize<double>>> benchmarks;
  std::vector<BenchmarkSequence> sequences;

  // Required by run_osgm_heavyball.
  bool experimental = false;

  Variant variant() const { return {feedback, action}; }
};

enum class TerminalStatus { converged, max_iters, stationary, diverged };
std::string to_string(TerminalStatus s);
TerminalStatus parse_status(const std::string& s);

struct TraceRow {
  int k = 0;
  std::optional<double> f_gap;
  double grad_norm = 0;
  std::optional<double> feedback;
  std::optional<double> progress;
  std::optional<double> eta;
  std::optional<double> drift;
  std::optional<double> potential_phi;
  std::optional<double> potential_omega;
  long oracle_calls = 0;

  bool operator==(const TraceRow&) const = default;
};

struct SolverTrace {
  // Ordered "# key=value" header entries.
  std::vector<std::pair<std::string, std::string>> header;
  std::vector<TraceRow> rows;
  TerminalStatus status = TerminalStatus::max_iters;
  std::optional<double> final_f_gap;
  double final_grad_norm = 0;

  const std::string* header_value(const std::string& key) const;
  void set_header(const std::string& key, const std::string& value);
  bool operator==(const SolverTrace&) const = default;
};

struct RunResult {
  SolverTrace trace;
  MonitorReport report;
  std::optional<MonitorLog> log;
  std::vector<Vec> iterates;
  Stepsize<double> final_P;
  Vec final_x;
};

// Throws ConfigError for invalid combinations.
void validate_config(const ProblemD& problem, const SolverConfig& config);
Schedule<double> resolve_schedule(const ProblemD& problem, const SolverConfig& config);

RunResult run_osgm(const ProblemD& problem, const SolverConfig& config);
// P is updated before the x step. Needs an unconstrained set and a diagonal
// or full pattern.
RunResult run_hdm(const ProblemD& problem, const SolverConfig& config);
RunResult run_gd(const ProblemD& problem, const Stepsize<double>& P, const Vec& x1, int max_iters,
                 double stop_gap = 1e-10, double stop_grad = 1e-8);

struct MomentumConfig {
  bool learned = true;
  double beta = 0;
  double omega = 1;
  // Learning rate for beta; defaults to the stepsize rate.
  std::optional<double> beta_eta;
};

// Heavy-ball extension. The feedback is the decrease of
// f - f* + omega/2 ||x - x_prev||^2 normalized by the denominator of the
// configured feedback. Experimental; no monitors run.
RunResult run_osgm_heavyball(const ProblemD& problem, const SolverConfig& config, const MomentumConfig& momentum);

// One heavy-ball feedback evaluation at (x, x_prev) for (P, beta): value and
// gradients in P (dense) and beta. Exposed for derivative checks.
struct HeavyBallFeedback {
  double value;
  Mat grad_P;
  double grad_beta;
};
HeavyBallFeedback heavyball_feedback(const ProblemD& problem, FeedbackKind kind, const Vec& x, const Vec& x_prev,
                                     const Stepsize<double>& P, double beta, double omega);

}  // namespace osgm
