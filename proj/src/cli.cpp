#include "osgm/cli.hpp"

#include "osgm/problem_io.hpp"
#include "osgm/solver.hpp"
#include "osgm/trace_io.hpp"
#include "osgm/verify.hpp"

#include "CLI11.hpp"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

namespace osgm {

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SharedFlags {
  std::string problem = "tridiagonal:50";
  std::string feedback = "ratio";
  std::string action = "lookahead";
  std::string learner = "ogd";
  std::string pattern = "full";
  std::string set = "none";
  std::string eta = "auto";
  int iters = 1000;
  double tol = 1e-10;
  std::uint64_t seed = 0;
  std::string trace;
  std::string monitors = "on";
  bool strict = false;
  bool unsafe = false;
};

void add_shared(CLI::App& app, SharedFlags& f) {
  app.add_option("--problem", f.problem, "built-in name:params or path to a JSON problem file");
  app.add_option("--feedback", f.feedback, "ratio | hyper")->check(CLI::IsMember({"ratio", "hyper"}));
  app.add_option("--action", f.action, "vanilla | monotone | lookahead | monotone-lookahead")
      ->check(CLI::IsMember({"vanilla", "monotone", "lookahead", "monotone-lookahead"}));
  app.add_option("--learner", f.learner, "ogd | adagrad")->check(CLI::IsMember({"ogd", "adagrad"}));
  app.add_option("--pattern", f.pattern, "scalar | diag | full")->check(CLI::IsMember({"scalar", "diag", "full"}));
  app.add_option("--set", f.set, "none | box:lo,hi | nonneg | ball:r");
  app.add_option("--eta", f.eta, "auto | constant learning rate");
  app.add_option("--iters", f.iters, "iteration budget")->check(CLI::NonNegativeNumber);
  app.add_option("--tol", f.tol, "stop when f - f* falls to this gap")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", f.seed, "seed for random problem instances");
  app.add_option("--trace", f.trace, "trace CSV output path");
  app.add_option("--monitors", f.monitors, "on | off")->check(CLI::IsMember({"on", "off"}));
  app.add_flag("--strict", f.strict, "exit 2 when a monitor check fails");
  app.add_flag("--unsafe", f.unsafe, "allow hypergradient feedback without a monotone action");
}

double flag_number(const std::string& s, const std::string& flag) {
  try {
    return parse_double(s);
  } catch (const ConfigError&) {
    throw UsageError(flag + ": expected a number, got '" + s + "'");
  }
}

// Set shape without the problem; the ball center needs L.
struct SetFlag {
  CandidateSet<double>::Kind kind = CandidateSet<double>::Kind::unconstrained;
  double lo = 0, hi = 0, radius = 0;
};

SetFlag parse_set(const std::string& s) {
  SetFlag out;
  using Kind = CandidateSet<double>::Kind;
  if (s == "none") return out;
  if (s == "nonneg") {
    out.kind = Kind::nonnegative;
    return out;
  }
  if (s.rfind("box:", 0) == 0) {
    const std::string body = s.substr(4);
    const auto comma = body.find(',');
    if (comma == std::string::npos) throw UsageError("--set box:lo,hi needs two bounds");
    out.kind = Kind::box;
    out.lo = flag_number(body.substr(0, comma), "--set");
    out.hi = flag_number(body.substr(comma + 1), "--set");
    if (!(out.lo <= out.hi)) throw UsageError("--set box:lo,hi needs lo <= hi");
    return out;
  }
  if (s.rfind("ball:", 0) == 0) {
    out.kind = Kind::ball;
    out.radius = flag_number(s.substr(5), "--set");
    if (!(out.radius > 0)) throw UsageError("--set ball:r needs r > 0");
    return out;
  }
  throw UsageError("--set: expected none, box:lo,hi, nonneg or ball:r, got '" + s + "'");
}

CandidateSet<double> make_set(const SetFlag& f, PatternKind pattern, const ProblemD& p) {
  using Kind = CandidateSet<double>::Kind;
  switch (f.kind) {
    case Kind::unconstrained: return CandidateSet<double>::unconstrained();
    case Kind::box: return CandidateSet<double>::box(f.lo, f.hi);
    case Kind::nonnegative: return CandidateSet<double>::nonnegative();
    case Kind::ball:
      return CandidateSet<double>::ball(Stepsize<double>::scaled_identity(pattern, p.dim, 1 / p.L), f.radius);
  }
  return {};
}

// Everything that can be checked without touching the problem.
struct RunPlan {
  SharedFlags flags;
  std::string method = "osgm";
  FeedbackKind feedback;
  ActionKind action;
  LearnerKind learner;
  PatternKind pattern;
  SetFlag set;
  std::optional<double> eta;
};

RunPlan plan_from(const SharedFlags& f, const std::string& method) {
  RunPlan plan;
  plan.flags = f;
  plan.method = method;
  plan.feedback = parse_feedback(f.feedback);
  plan.action = parse_action(f.action);
  plan.learner = parse_learner(f.learner);
  plan.pattern = parse_pattern(f.pattern);
  plan.set = parse_set(f.set);
  if (f.eta != "auto") {
    plan.eta = flag_number(f.eta, "--eta");
    if (!(*plan.eta > 0)) throw UsageError("--eta must be positive");
  }
  if (method == "osgm" && plan.feedback == FeedbackKind::hypergradient && !is_monotone(plan.action) && !f.unsafe)
    throw UsageError("--feedback hyper with --action " + f.action +
                     ": hypergradient feedback only yields a convergence guarantee when the action never "
                     "increases f, so pair it with --action monotone or monotone-lookahead, or pass --unsafe");
  if (method == "hdm" && plan.set.kind != CandidateSet<double>::Kind::unconstrained)
    throw UsageError("--method hdm takes no candidate set; use --set none");
  if (method == "hdm" && plan.pattern == PatternKind::scalar) throw UsageError("--method hdm needs --pattern diag or full");
  return plan;
}

SolverConfig config_for(const RunPlan& plan, const ProblemD& p) {
  SolverConfig c;
  c.feedback = plan.feedback;
  c.action = plan.action;
  c.learner = plan.learner;
  c.pattern = plan.pattern;
  c.set = make_set(plan.set, plan.pattern, p);
  if (plan.eta) c.schedule = Schedule<double>::constant(*plan.eta);
  c.max_iters = plan.flags.iters;
  c.stop_gap = plan.flags.tol;
  c.monitors = plan.flags.monitors == "on";
  c.seed = plan.flags.seed;
  c.unsafe = plan.flags.unsafe;
  if (p.name == "piecewise2d" && plan.pattern != PatternKind::scalar) c.sequences = region_sequences(plan.pattern);
  return c;
}

RunResult execute(const RunPlan& plan, const ProblemD& p, const MomentumConfig* momentum) {
  const SolverConfig c = config_for(plan, p);
  if (plan.method == "hdm") return run_hdm(p, c);
  if (plan.method == "gd") {
    const Vec x1 = Vec::Ones(p.dim);
    return run_gd(p, Stepsize<double>::scaled_identity(plan.pattern, p.dim, 1 / p.L), x1, c.max_iters, c.stop_gap,
                  c.stop_grad);
  }
  if (plan.method == "heavyball") {
    SolverConfig e = c;
    e.experimental = true;
    return run_osgm_heavyball(p, e, *momentum);
  }
  return run_osgm(p, c);
}

template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const UsageError& e) {
    err << "osgm: " << e.what() << "\n";
    return exit_usage;
  } catch (const ConfigError& e) {
    err << "osgm: " << e.what() << "\n";
    return exit_config;
  } catch (const OracleError& e) {
    err << "osgm: " << e.what() << "\n";
    return exit_config;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "osgm: " << e.what() << "\n";
    return exit_config;
  }
}

// CLI11 wants argv order with the program name first.
int parse_args(CLI::App& app, const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
               bool& done) {
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  done = false;
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    done = true;
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    err << "osgm: " << e.what() << "\n" << "run with --help for usage\n";
    done = true;
    return exit_usage;
  }
  return exit_ok;
}

std::string cell_file_name(const std::string& problem, const std::string& cell) {
  std::string s = problem + "__" + cell;
  for (char& c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  return s + ".csv";
}

std::optional<int> iterations_to(const SolverTrace& t, double target) {
  for (const auto& r : t.rows)
    if (r.f_gap && *r.f_gap <= target) return r.k - 1;
  if (t.final_f_gap && *t.final_f_gap <= target) return static_cast<int>(t.rows.size());
  return std::nullopt;
}

// Geometric-mean gap contraction over the last window rows.
std::optional<double> terminal_rate(const SolverTrace& t, int window = 10) {
  std::vector<double> gaps;
  for (const auto& r : t.rows)
    if (r.f_gap && *r.f_gap > 0) gaps.push_back(*r.f_gap);
  if (t.final_f_gap && *t.final_f_gap > 0) gaps.push_back(*t.final_f_gap);
  if (gaps.size() < 2) return std::nullopt;
  const int m = std::min<int>(window, static_cast<int>(gaps.size()) - 1);
  const double a = gaps[gaps.size() - 1 - static_cast<size_t>(m)], b = gaps.back();
  return std::pow(b / a, 1.0 / m);
}

struct BenchCell {
  std::string problem;
  std::string label;
  RunPlan plan;
};

struct CellOutcome {
  std::string status;
  long iters = 0;
  std::optional<int> to_target;
  std::optional<double> rate;
  std::optional<double> final_gap;
  long oracle_calls = 0;
  long monitor_failures = 0;
  std::string error;
};

std::string optional_text(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

}  // namespace

int cmd_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Run one experiment", "osgm run"};
  SharedFlags f;
  std::string method = "osgm", report_path;
  MomentumConfig momentum;
  bool fixed_beta = false;
  std::optional<double> lipschitz;
  add_shared(app, f);
  app.add_option("--method", method, "osgm | hdm | gd | heavyball")
      ->check(CLI::IsMember({"osgm", "hdm", "gd", "heavyball"}));
  app.add_option("--report", report_path, "monitor JSON output path (default: <trace>.monitors.json)");
  app.add_option("--beta", momentum.beta, "heavy-ball: initial momentum");
  app.add_option("--omega", momentum.omega, "heavy-ball: weight of the momentum term in the feedback");
  app.add_flag("--fixed-beta", fixed_beta, "heavy-ball: keep beta fixed");
  app.add_option("--lipschitz", lipschitz, "replace the problem's gradient Lipschitz constant")
      ->check(CLI::PositiveNumber);
  bool done = false;
  const int code = parse_args(app, args, out, err, done);
  if (done) return code;
  momentum.learned = !fixed_beta;

  return guarded(err, [&] {
    const RunPlan plan = plan_from(f, method);
    ProblemD p = load_problem(f.problem, f.seed);
    if (lipschitz) p.L = *lipschitz;
    const RunResult r = execute(plan, p, &momentum);
    const std::string csv = trace_to_csv(r.trace);
    if (!f.trace.empty()) {
      write_file_atomic(f.trace, csv);
      const std::string json_path = report_path.empty() ? f.trace + ".monitors.json" : report_path;
      write_file_atomic(json_path, report_to_json(r.report) + "\n");
    } else if (!report_path.empty()) {
      write_file_atomic(report_path, report_to_json(r.report) + "\n");
    }
    out << "problem " << p.name << ", " << r.trace.rows.size() << " iterations, status " << to_string(r.trace.status);
    if (r.trace.final_f_gap) out << ", final gap " << format_double(*r.trace.final_f_gap);
    out << "\n";
    if (!r.report.empty()) out << summarize(r.report);
    if (f.strict && !r.report.all_pass()) return exit_monitor_failure;
    return exit_ok;
  });
}

int cmd_verify(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Run the invariant suite", "osgm verify"};
  SuiteOptions o;
  std::string json_path;
  app.add_option("--seed", o.seed, "seed for the random instances");
  app.add_option("--only", o.only, "run only checks whose name starts with this prefix");
  app.add_option("--iters", o.iters, "iterations per monitored run")->check(CLI::PositiveNumber);
  app.add_option("--json", json_path, "write the ledger as JSON");
  bool done = false;
  const int code = parse_args(app, args, out, err, done);
  if (done) return code;
  return guarded(err, [&] {
    const MonitorReport r = run_invariant_suite(o);
    out << summarize(r);
    if (!json_path.empty()) write_file_atomic(json_path, report_to_json(r) + "\n");
    if (r.empty()) {
      err << "osgm: no checks match '" << o.only << "'\n";
      return exit_failed;
    }
    return r.all_pass() ? exit_ok : exit_failed;
  });
}

int cmd_bench(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Compare the variant matrix with GD and HDM", "osgm bench"};
  SharedFlags f;
  f.iters = 5000;
  f.monitors = "off";
  std::vector<std::string> problems;
  std::string csv_dir = "bench-out";
  double target = 1e-8;
  add_shared(app, f);
  app.add_option("--suite", problems, "problems to run (repeatable; default tridiagonal:100)");
  app.add_option("--csv", csv_dir, "directory for one trace per cell plus summary.csv");
  app.add_option("--target", target, "gap for the iterations-to-target column")->check(CLI::PositiveNumber);
  bool done = false;
  const int code = parse_args(app, args, out, err, done);
  if (done) return code;
  if (problems.empty()) problems.push_back(app.count("--problem") ? f.problem : "tridiagonal:100");

  return guarded(err, [&] {
    if (f.set != "none") parse_set(f.set);
    std::vector<BenchCell> cells;
    const std::vector<std::pair<std::string, Variant>> variants = {
        {"lookahead-osgm-r", lookahead_osgm_r},
        {"monotone-lookahead-osgm-h", monotone_lookahead_osgm_h},
        {"vanilla-osgm-r", vanilla_osgm_r},
        {"monotone-osgm-h", monotone_osgm_h}};
    for (const auto& problem : problems) {
      for (const auto& [label, v] : variants) {
        SharedFlags cf = f;
        cf.problem = problem;
        cf.feedback = v.feedback == FeedbackKind::ratio ? "ratio" : "hyper";
        cf.action = to_string(v.action);
        RunPlan plan = plan_from(cf, "osgm");
        if (!has_lookahead(v.action) && plan.set.kind == CandidateSet<double>::Kind::unconstrained) {
          plan.set.kind = CandidateSet<double>::Kind::box;
          plan.set.lo = -1;
          plan.set.hi = 1;
        }
        cells.push_back({problem, label, plan});
      }
      SharedFlags gf = f;
      gf.problem = problem;
      gf.set = "none";
      gf.eta = "auto";
      gf.monitors = "off";
      cells.push_back({problem, "gd", plan_from(gf, "gd")});
      gf.feedback = "hyper";
      gf.action = "lookahead";
      gf.unsafe = true;
      if (gf.pattern == "scalar") gf.pattern = "diag";
      cells.push_back({problem, "hdm", plan_from(gf, "hdm")});
    }

    std::filesystem::create_directories(csv_dir);
    std::vector<CellOutcome> outcomes(cells.size());
    std::atomic<size_t> next{0};
    std::mutex problem_mutex;
    std::map<std::string, std::shared_ptr<const ProblemD>> loaded;
    auto problem_for = [&](const std::string& name) {
      std::lock_guard<std::mutex> lock(problem_mutex);
      auto it = loaded.find(name);
      if (it != loaded.end()) return it->second;
      auto p = std::make_shared<const ProblemD>(load_problem(name, f.seed));
      loaded.emplace(name, p);
      return p;
    };
    auto worker = [&] {
      for (size_t i = next++; i < cells.size(); i = next++) {
        const BenchCell& cell = cells[i];
        CellOutcome& o = outcomes[i];
        try {
          const auto p = problem_for(cell.problem);
          const RunResult r = execute(cell.plan, *p, nullptr);
          write_file_atomic((std::filesystem::path(csv_dir) / cell_file_name(p->name, cell.label)).string(),
                            trace_to_csv(r.trace));
          o.status = to_string(r.trace.status);
          o.iters = static_cast<long>(r.trace.rows.size());
          o.to_target = iterations_to(r.trace, target);
          o.rate = terminal_rate(r.trace);
          o.final_gap = r.trace.final_f_gap;
          o.oracle_calls = r.trace.rows.empty() ? 2 : r.trace.rows.back().oracle_calls;
          o.monitor_failures = r.report.failures();
        } catch (const std::exception& e) {
          o.status = "error";
          o.error = e.what();
        }
      }
    };
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("OSGM_THREADS")) {
      const int t = std::atoi(env);
      if (t < 1) throw UsageError("OSGM_THREADS must be a positive integer");
      threads = static_cast<unsigned>(t);
    }
    threads = std::min<unsigned>(threads, static_cast<unsigned>(cells.size()));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    std::ostringstream summary;
    summary << "problem,method,status,iters,iters_to_target,terminal_rate,final_f_gap,oracle_calls,monitor_failures\n";
    bool all_completed = true;
    for (size_t i = 0; i < cells.size(); ++i) {
      const CellOutcome& o = outcomes[i];
      if (o.status == "error") all_completed = false;
      summary << cells[i].problem << ',' << cells[i].label << ',' << o.status << ',' << o.iters << ','
              << (o.to_target ? std::to_string(*o.to_target) : "") << ',' << optional_text(o.rate) << ','
              << optional_text(o.final_gap) << ',' << o.oracle_calls << ',' << o.monitor_failures << "\n";
    }
    write_file_atomic((std::filesystem::path(csv_dir) / "summary.csv").string(), summary.str());

    out << std::left << std::setw(22) << "problem" << std::setw(28) << "method" << std::setw(12) << "status"
        << std::setw(8) << "iters" << std::setw(12) << "to_target" << "terminal_rate\n";
    for (size_t i = 0; i < cells.size(); ++i) {
      const CellOutcome& o = outcomes[i];
      out << std::left << std::setw(22) << cells[i].problem << std::setw(28) << cells[i].label << std::setw(12)
          << o.status << std::setw(8) << o.iters << std::setw(12)
          << (o.to_target ? std::to_string(*o.to_target) : "-") << (o.rate ? format_double(*o.rate) : "-");
      if (!o.error.empty()) out << "  " << o.error;
      out << "\n";
    }
    return all_completed ? exit_ok : exit_failed;
  });
}

int osgm_main(int argc, char** argv) {
  const std::string usage =
      "usage: osgm <command> [flags]\n"
      "commands:\n"
      "  run      run one experiment and write its trace\n"
      "  verify   run the invariant suite\n"
      "  bench    compare the variant matrix with GD and HDM\n"
      "run 'osgm <command> --help' for the flags of a command\n";
  if (argc < 2) {
    std::cerr << usage;
    return exit_usage;
  }
  const std::string command = argv[1];
  const std::vector<std::string> args(argv + 2, argv + argc);
  if (command == "run") return cmd_run(args, std::cout, std::cerr);
  if (command == "verify") return cmd_verify(args, std::cout, std::cerr);
  if (command == "bench") return cmd_bench(args, std::cout, std::cerr);
  if (command == "--help" || command == "-h" || command == "help") {
    std::cout << usage;
    return exit_ok;
  }
  std::cerr << "osgm: unknown command '" << command << "'\n" << usage;
  return exit_usage;
}

}  // namespace osgm
