#include "osgm/cli.hpp"
#include "osgm/problem_io.hpp"
#include "osgm/trace_io.hpp"

#include "json.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace osgm;
namespace fs = std::filesystem;

namespace {

struct Output {
  int code;
  std::string out, err;
};

Output run_cmd(int (*cmd)(const std::vector<std::string>&, std::ostream&, std::ostream&),
               std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cmd(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Scratch : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("osgm_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  fs::path dir;
};

int binary_exit(const std::string& args) {
  const std::string cmd = std::string(OSGM_BINARY) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

using RunCommand = Scratch;

TEST_F(RunCommand, WritesATraceAndMonitorLedger) {
  const fs::path trace = dir / "run.csv";
  const auto r = run_cmd(cmd_run, {"--problem", "tridiagonal:20", "--iters", "500", "--tol", "0", "--trace",
                                   trace.string()});
  ASSERT_EQ(r.code, exit_ok) << r.err;
  const SolverTrace t = parse_trace(slurp(trace));
  EXPECT_EQ(t.rows.size(), 500u);
  const ProblemD p = load_problem("tridiagonal:20");
  EXPECT_EQ(*t.header_value("eta"), format_double(1 / (2 * p.L * p.L)));
  EXPECT_EQ(*t.header_value("variant"), "Lookahead OSGM-R");
  for (size_t k = 0; k < t.rows.size(); ++k) EXPECT_EQ(t.rows[k].k, static_cast<int>(k + 1));
  const auto ledger = nlohmann::json::parse(slurp(trace.string() + ".monitors.json"));
  ASSERT_TRUE(ledger.is_array());
  EXPECT_FALSE(ledger.empty());
  for (const auto& rec : ledger) EXPECT_TRUE(rec["pass"].get<bool>()) << rec.dump();
}

TEST_F(RunCommand, IdenticalInvocationsWriteIdenticalTraces) {
  const std::vector<std::string> base = {"--problem", "random-spd:6:30", "--seed", "11", "--pattern", "diag",
                                         "--iters", "200"};
  auto a = base, b = base;
  a.insert(a.end(), {"--trace", (dir / "a.csv").string()});
  b.insert(b.end(), {"--trace", (dir / "b.csv").string()});
  ASSERT_EQ(run_cmd(cmd_run, a).code, exit_ok);
  ASSERT_EQ(run_cmd(cmd_run, b).code, exit_ok);
  EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
}

TEST_F(RunCommand, ExitCodesDistinguishUsageConfigurationAndMonitorFailures) {
  const auto guard = run_cmd(cmd_run, {"--feedback", "hyper", "--action", "vanilla"});
  EXPECT_EQ(guard.code, exit_usage);
  EXPECT_NE(guard.err.find("--unsafe"), std::string::npos);
  EXPECT_EQ(run_cmd(cmd_run, {"--feedback", "hyper", "--action", "vanilla", "--unsafe", "--eta", "0.01",
                              "--iters", "20"})
                .code,
            exit_ok);
  EXPECT_EQ(run_cmd(cmd_run, {"--pattern", "dense"}).code, exit_usage);
  EXPECT_EQ(run_cmd(cmd_run, {"--set", "box:1"}).code, exit_usage);
  EXPECT_EQ(run_cmd(cmd_run, {"--problem", "no-such-problem"}).code, exit_config);
  EXPECT_EQ(run_cmd(cmd_run, {"--problem", (dir / "missing.json").string()}).code, exit_config);
  std::ofstream(dir / "bad.json") << "{\n  \"kind\": \"quadratic\",\n  \"matrix\": [[1, 0], [0 1]]\n}\n";
  const auto bad = run_cmd(cmd_run, {"--problem", (dir / "bad.json").string()});
  EXPECT_EQ(bad.code, exit_config);
  EXPECT_NE(bad.err.find("line 3"), std::string::npos) << bad.err;
  const auto help = run_cmd(cmd_run, {"--help"});
  EXPECT_EQ(help.code, exit_ok);
  EXPECT_NE(help.out.find("--feedback"), std::string::npos);

  // An underestimated smoothness constant breaks the guarantees the monitors check.
  const std::vector<std::string> wrong_L = {"--problem", "tridiagonal:20", "--iters", "200", "--lipschitz", "1"};
  EXPECT_EQ(run_cmd(cmd_run, wrong_L).code, exit_ok);
  auto strict = wrong_L;
  strict.push_back("--strict");
  const auto s = run_cmd(cmd_run, strict);
  EXPECT_EQ(s.code, exit_monitor_failure) << s.out;
  EXPECT_NE(s.out.find("FAIL"), std::string::npos);
}

TEST_F(RunCommand, AlternativeMethodsRun) {
  for (const std::string m : {"hdm", "gd", "heavyball"}) {
    const auto r = run_cmd(cmd_run, {"--method", m, "--problem", "tridiagonal:10", "--iters", "50", "--trace",
                                     (dir / (m + ".csv")).string()});
    EXPECT_EQ(r.code, exit_ok) << m << ": " << r.err;
    EXPECT_EQ(*parse_trace(slurp(dir / (m + ".csv"))).header_value("method"), m);
  }
  EXPECT_EQ(run_cmd(cmd_run, {"--method", "hdm", "--set", "nonneg"}).code, exit_usage);
}

TEST(VerifyCommand, OnlyFilterSelectsByPrefix) {
  const auto r = run_cmd(cmd_verify, {"--only", "problem.tridiagonal_extremes"});
  EXPECT_EQ(r.code, exit_ok) << r.out << r.err;
  EXPECT_NE(r.out.find("problem.tridiagonal_extremes"), std::string::npos);
  EXPECT_EQ(r.out.find("projection."), std::string::npos);
  EXPECT_EQ(run_cmd(cmd_verify, {"--only", "no.such.check"}).code, exit_failed);
}

using BenchCommand = Scratch;

TEST_F(BenchCommand, WritesOneTracePerCellAndAReproducibleSummary) {
  const fs::path a = dir / "a", b = dir / "b";
  ::setenv("OSGM_THREADS", "1", 1);
  const auto ra = run_cmd(cmd_bench, {"--suite", "tridiagonal:10", "--suite", "diag-range:5", "--iters", "200",
                                      "--csv", a.string()});
  ::setenv("OSGM_THREADS", "3", 1);
  const auto rb = run_cmd(cmd_bench, {"--suite", "tridiagonal:10", "--suite", "diag-range:5", "--iters", "200",
                                      "--csv", b.string()});
  ::unsetenv("OSGM_THREADS");
  ASSERT_EQ(ra.code, exit_ok) << ra.out << ra.err;
  ASSERT_EQ(rb.code, exit_ok);
  int files = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    ++files;
    EXPECT_EQ(slurp(e.path()), slurp(b / e.path().filename())) << e.path();
  }
  EXPECT_EQ(files, 2 * 6 + 1);
  const std::string summary = slurp(a / "summary.csv");
  EXPECT_EQ(summary.rfind("problem,method,status,iters,iters_to_target,terminal_rate,final_f_gap,oracle_calls,"
                          "monitor_failures\n",
                          0),
            0u);
  EXPECT_EQ(std::count(summary.begin(), summary.end(), '\n'), 13);
  EXPECT_NE(summary.find("tridiagonal:10,hdm,"), std::string::npos);
  const SolverTrace t = parse_trace(slurp(a / "tridiagonal_10__monotone-lookahead-osgm-h.csv"));
  EXPECT_FALSE(t.rows.empty());
}

TEST(Binary, DispatchesSubcommandsAndReportsExitCodes) {
  EXPECT_EQ(binary_exit("--help"), exit_ok);
  EXPECT_EQ(binary_exit(""), exit_usage);
  EXPECT_EQ(binary_exit("frobnicate"), exit_usage);
  EXPECT_EQ(binary_exit("run --problem tridiagonal:5 --iters 10"), exit_ok);
  EXPECT_EQ(binary_exit("run --problem nowhere"), exit_config);
  EXPECT_EQ(binary_exit("run --feedback hyper --action lookahead"), exit_usage);
}
