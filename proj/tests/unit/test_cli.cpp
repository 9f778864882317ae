#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "treecast/cli.hpp"

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  Run r;
  r.code = treecast::cli::run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::filesystem::path temp_file(const std::string& name, const std::string& body) {
  const auto p = std::filesystem::temp_directory_path() / ("treecast_test_" + name);
  std::ofstream(p) << body;
  return p;
}

std::vector<std::string> data_lines(const std::string& csv) {
  std::vector<std::string> lines;
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#' || line.rfind("experiment,", 0) == 0) continue;
    lines.push_back(line);
  }
  return lines;
}

}  // namespace

TEST(Cli, EpsilonOutOfRangeIsADomainError) {
  const auto r = run({"eps-k", "--eps", "0.6"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("epsilon"), std::string::npos);
}

TEST(Cli, HugeSupportIsABudgetError) { EXPECT_EQ(run({"critical", "--r", "2", "--k", "40"}).code, 3); }

TEST(Cli, BudgetFlagAndEnvironment) {
  EXPECT_EQ(run({"delta", "--r", "2", "--eps", "0.1", "--depth", "8", "--exact", "--budget", "100"}).code, 3);
  EXPECT_EQ(run({"delta", "--r", "2", "--eps", "0.1", "--depth", "6", "--exact", "--budget", "100"}).code, 0);
  setenv("TREECAST_BUDGET", "100", 1);
  EXPECT_EQ(run({"delta", "--r", "2", "--eps", "0.1", "--depth", "8", "--exact"}).code, 3);
  setenv("TREECAST_BUDGET", "junk", 1);
  EXPECT_EQ(run({"delta", "--r", "2", "--eps", "0.1", "--depth", "2", "--exact"}).code, 2);
  unsetenv("TREECAST_BUDGET");
}

TEST(Cli, EpsAndPAreExclusive) {
  EXPECT_EQ(run({"eps-k", "--eps", "0.1", "--p", "0.8"}).code, 2);
  EXPECT_EQ(run({"eps-k"}).code, 2);
  EXPECT_EQ(run({"bogus"}).code, 2);
  EXPECT_EQ(run({"eps-k", "--eps", "0.1", "--k", "3..1"}).code, 2);
}

TEST(Cli, EpsKRows) {
  const auto r = run({"eps-k", "--r", "2", "--eps", "0.3", "--k", "1..3", "--reproducible"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("# config: ", 0), 0U);
  EXPECT_EQ(data_lines(r.out).size(), 12U);
  EXPECT_NE(r.out.find("eps-k,r=2;eps=0.3;k=1,eps_k,0.3,,,exact"), std::string::npos);
  const auto p = run({"eps-k", "--r", "2", "--p", "0.4", "--k", "1", "--reproducible"});
  EXPECT_NE(p.out.find("eps_k,0.3,"), std::string::npos);
}

TEST(Cli, TimestampOnlyWithoutReproducible) {
  EXPECT_NE(run({"eps-k", "--eps", "0.1"}).out.find("# generated: "), std::string::npos);
  EXPECT_EQ(run({"eps-k", "--eps", "0.1", "--reproducible"}).out.find("# generated: "), std::string::npos);
}

TEST(Cli, FkStatsFlagsTheRegime) {
  const auto r = run({"fk-stats", "--r", "4", "--p", "0.3", "--k", "6", "--samples", "50", "--reproducible"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("regime_p2r_lt_1_lt_pr,1,"), std::string::npos);
  EXPECT_NE(r.out.find("in-regime"), std::string::npos);
  const auto out = run({"fk-stats", "--r", "4", "--p", "0.6", "--k", "3", "--samples", "20", "--reproducible"});
  ASSERT_EQ(out.code, 0);
  EXPECT_NE(out.out.find("out-of-regime"), std::string::npos);
}

TEST(Cli, DeltaExactJson) {
  const auto r = run({"delta", "--r", "2", "--eps", "0.1", "--depth", "4", "--exact", "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  ASSERT_EQ(j.size(), 5U);
  EXPECT_NEAR(j[4]["value"].get<double>(), treecast::delta_exact(4, 2, 0.1), 1e-15);
  EXPECT_EQ(j[4]["provenance"], "exact");
  EXPECT_EQ(j[4]["config"]["depth"], 4);
}

TEST(Cli, ConfigFileFlagsWin) {
  const auto cfg = temp_file("cfg.json", R"({"r": 3, "eps": 0.2, "depth": 2, "exact": true})");
  const auto a = run({"delta", "--config", cfg.string(), "--reproducible"});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_NE(a.out.find("r=3;eps=0.2"), std::string::npos);
  const auto b = run({"delta", "--config", cfg.string(), "--p", "0.5", "--reproducible"});
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_NE(b.out.find("r=3;eps=0.25"), std::string::npos);
  const auto bad = temp_file("bad.json", R"({"colour": 3})");
  EXPECT_EQ(run({"delta", "--config", bad.string()}).code, 2);
}

TEST(Cli, SweepIsOneRowPerCellAndDeterministic) {
  const auto grid = temp_file("grid.json", R"({"r": 2, "scheme": ["identity", "descent-majority:2"],
      "eps": [0.1, 0.2, 0.3], "depth": [2, 4], "replicates": 200, "seed": 5})");
  const auto a = run({"sweep", grid.string(), "--reproducible"});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(data_lines(a.out).size(), 12U);
  EXPECT_EQ(a.out, run({"sweep", grid.string(), "--reproducible"}).out);
  setenv("TREECAST_THREADS", "1", 1);
  EXPECT_EQ(a.out, run({"sweep", grid.string(), "--reproducible"}).out);
  unsetenv("TREECAST_THREADS");
  EXPECT_NE(a.out, run({"sweep", grid.string(), "--reproducible", "--seed", "6"}).out);
}

TEST(Cli, VerifyReportsGates) {
  const auto r = run({"verify", "lemma33", "--reproducible"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find(",gate,"), std::string::npos);
  EXPECT_EQ(run({"verify", "nope"}).code, 2);
}

TEST(Cli, VerifyFailureExitsFour) {
  // the anti-concentration suite has genuine counterexamples
  EXPECT_EQ(run({"verify", "lemma48", "--reproducible"}).code, 4);
}

TEST(Cli, OutFileAndCsvQuoting) {
  const auto path = std::filesystem::temp_directory_path() / "treecast_test_out.csv";
  ASSERT_EQ(run({"verify", "thm41", "--out", path.string(), "--reproducible"}).code, 0);
  std::ifstream in(path);
  const std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_NE(body.find("experiment,parameters"), std::string::npos);
  EXPECT_EQ(treecast::csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(treecast::csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(treecast::csv_field("plain"), "plain");
}

TEST(Cli, KListParsing) {
  using treecast::cli::parse_k_list;
  EXPECT_EQ(parse_k_list("1..4"), (std::vector<int>{1, 2, 3, 4}));
  EXPECT_EQ(parse_k_list("2"), (std::vector<int>{2}));
  EXPECT_EQ(parse_k_list("1,3"), (std::vector<int>{1, 3}));
  EXPECT_EQ(parse_k_list("1..2,5"), (std::vector<int>{1, 2, 5}));
  EXPECT_THROW(parse_k_list("0"), treecast::DomainError);
  EXPECT_THROW(parse_k_list("a"), treecast::DomainError);
}

#ifdef TREECAST_CLI_PATH
TEST(Cli, ExecutableExitCodes) {
  const std::string exe = TREECAST_CLI_PATH;
  const auto code = [](const std::string& cmd) {
    const int s = std::system((cmd + " > /dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  EXPECT_EQ(code(exe + " eps-k --eps 0.6"), 2);
  EXPECT_EQ(code(exe + " critical --r 2 --k 40"), 3);
  EXPECT_EQ(code(exe + " eps-k --r 2 --eps 0.3 --k 1..2"), 0);
}
#endif
