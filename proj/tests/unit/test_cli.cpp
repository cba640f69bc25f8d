#include <gtest/gtest.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

const std::string kCli = GNNSERVE_CLI_PATH;

int run(const std::string& args) {
  const int rc = std::system((kCli + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<double>> read_csv(const fs::path& p) {
  std::vector<std::vector<double>> rows;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("gnnserve_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    ASSERT_EQ(run("gen-graph --out " + p("ds") + " --nodes 600 --avg-degree 6 --features 8 --request " + p("req") +
                  " --batch 8 --seed 4"),
              0);
    ASSERT_EQ(run("precompute --dataset " + p("ds") + " --layers 2 --hidden 8 --model gat --seed 4"), 0);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }
  static std::string p(const std::string& name) { return (dir_ / name).string(); }
  static std::string serve(const std::string& extra) {
    return "serve --dataset " + p("ds") + " --request " + p("req") + " " + extra;
  }

  static fs::path dir_;
};

fs::path Cli::dir_;

}  // namespace

TEST_F(Cli, UnknownFlagExitsWithTwo) {
  EXPECT_EQ(run("serve --dataset " + p("ds") + " --no-such-flag"), 2);
  EXPECT_EQ(run("no-such-command"), 2);
}

TEST_F(Cli, RuntimeErrorExitsWithOne) {
  EXPECT_EQ(run("serve --dataset " + p("missing")), 1);
  EXPECT_EQ(run(serve("--strategy warp")), 1);
}

TEST_F(Cli, VerifySingleRank) { EXPECT_EQ(run("verify --suite cgp-equivalence --p 1 --graphs 1"), 0); }

TEST_F(Cli, VerifyAllSuites) { EXPECT_EQ(run("verify --suite all --p 2 --graphs 1"), 0); }

TEST_F(Cli, CgpWithFullBudgetMatchesFull) {
  ASSERT_EQ(run(serve("--strategy full --out " + p("full.csv"))), 0);
  ASSERT_EQ(run(serve("--strategy srpe-cgp --gamma 1.0 --p 2 --out " + p("cgp.csv"))), 0);
  const auto a = read_csv(p("full.csv")), b = read_csv(p("cgp.csv"));
  ASSERT_EQ(a.size(), 8u);
  ASSERT_EQ(a.size(), b.size());
  double err = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].size(), b[i].size());
    EXPECT_EQ(a[i][0], b[i][0]);
    for (std::size_t j = 1; j < a[i].size(); ++j) err = std::max(err, std::abs(a[i][j] - b[i][j]));
  }
  EXPECT_LT(err, 1e-5);
}

TEST_F(Cli, PolicyTableHasEveryCell) {
  ASSERT_EQ(run("bench-policy --dataset " + p("ds") + " --batches 2 --batch 4 --out " + p("pol.csv")), 0);
  std::ifstream in(p("pol.csv"));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "policy,budget,mean_residual");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 16u);
}

TEST_F(Cli, RepeatedRunsAreBitwiseIdentical) {
  for (const std::string flags : {"--strategy sampled --fanouts 3,2", "--strategy srpe --policy random --gamma 0.3",
                                  "--strategy srpe-cgp --gamma 0.5 --p 3",
                                  "--strategy srpe-cgp --gamma 0.5 --p 2 --transport tcp"}) {
    ASSERT_EQ(run(serve(flags + " --seed 9 --out " + p("r1.csv"))), 0) << flags;
    ASSERT_EQ(run(serve(flags + " --seed 9 --out " + p("r2.csv"))), 0) << flags;
    EXPECT_EQ(slurp(p("r1.csv")), slurp(p("r2.csv"))) << flags;
    EXPECT_FALSE(slurp(p("r1.csv")).empty());
  }
}

TEST_F(Cli, SimAndTcpAgree) {
  ASSERT_EQ(run(serve("--strategy srpe-cgp --gamma 0.5 --p 2 --out " + p("sim.csv"))), 0);
  ASSERT_EQ(run(serve("--strategy srpe-cgp --gamma 0.5 --p 2 --transport tcp --out " + p("tcp.csv"))), 0);
  EXPECT_EQ(slurp(p("sim.csv")), slurp(p("tcp.csv")));
}

TEST_F(Cli, MultiProcessTcpMatchesSim) {
  const int base = 20000 + ::getpid() % 20000;
  const std::string peers = "127.0.0.1:" + std::to_string(base) + ",127.0.0.1:" + std::to_string(base + 1);
  const std::string common = serve("--strategy srpe-cgp --gamma 0.5 --p 2 --transport tcp --world-size 2 --peers " + peers);
  const std::string cmd = "(" + kCli + " " + common + " --rank 1 >/dev/null 2>&1 &) ; " + kCli + " " + common +
                          " --rank 0 --out " + p("mp.csv") + " >/dev/null 2>&1";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  ASSERT_EQ(run(serve("--strategy srpe-cgp --gamma 0.5 --p 2 --out " + p("sim2.csv"))), 0);
  EXPECT_EQ(slurp(p("mp.csv")), slurp(p("sim2.csv")));
}

TEST_F(Cli, PartitionWritesOwnerMap) {
  ASSERT_EQ(run("partition --dataset " + p("ds") + " --p 3 --out " + p("parts.csv")), 0);
  EXPECT_TRUE(fs::exists(p("parts.csv")));
  EXPECT_TRUE(fs::exists(p("parts.csv") + ".owners"));
}

TEST_F(Cli, ThroughputTableIsMonotone) {
  ASSERT_EQ(run("bench-throughput --dataset " + p("ds") + " --rates 1,10,100,1000,100000 --duration-s 2 --requests 2 "
                "--batch 4 --out " + p("tp.csv")),
            0);
  std::ifstream in(p("tp.csv"));
  std::string line;
  std::getline(in, line);
  double prev = -1.0;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    const double completed = std::stod(cells[3]);
    EXPECT_GE(completed, prev);
    prev = completed;
    ++rows;
  }
  EXPECT_EQ(rows, 5u);
}
