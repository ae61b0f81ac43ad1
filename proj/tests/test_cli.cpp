#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int status = 0;
  std::string output;
};

// Runs the CLI with stdout and stderr captured together.
CliResult cli(const std::string& args) {
  const std::string command = std::string("\"") + MHSLAM_CLI + "\" " + args + " 2>&1";
  CliResult r;
  FILE* pipe = popen(command.c_str(), "r");
  if (pipe == nullptr) {
    r.status = -1;
    return r;
  }
  char buffer[512];
  while (std::fgets(buffer, sizeof(buffer), pipe) != nullptr) {
    r.output += buffer;
  }
  r.status = pclose(pipe);
  return r;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           (std::string("mhslam_cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, SimulateSolveEval) {
  const std::string small = " --frames 40 --inner-frames 20 --seed 4";
  CliResult sim = cli("simulate" + small + " --out " + path("d.g2o") + " --gt-out " + path("gt.g2o"));
  ASSERT_EQ(sim.status, 0) << sim.output;
  ASSERT_TRUE(fs::exists(path("d.g2o")));
  ASSERT_TRUE(fs::exists(path("gt.g2o")));

  for (const char* strategy : {"maxmix", "average", "random"}) {
    const std::string est = path(std::string("est_") + strategy + ".txt");
    CliResult solve = cli("solve --in " + path("d.g2o") + " --out " + est + " --strategy " + strategy);
    ASSERT_EQ(solve.status, 0) << solve.output;
    ASSERT_TRUE(fs::exists(est));
  }

  CliResult eval = cli("eval --est " + path("est_maxmix.txt") + " --gt " + path("gt.g2o") + " --out-prefix " + path("r"));
  ASSERT_EQ(eval.status, 0) << eval.output;
  EXPECT_TRUE(fs::exists(path("r_running.csv")));
  EXPECT_TRUE(fs::exists(path("r_landmarks.csv")));
}

TEST_F(Cli, SimulateIsDeterministic) {
  ASSERT_EQ(cli("simulate --frames 40 --inner-frames 20 --seed 9 --out " + path("a") + " --gt-out " + path("ga")).status, 0);
  ASSERT_EQ(cli("simulate --frames 40 --inner-frames 20 --seed 9 --out " + path("b") + " --gt-out " + path("gb")).status, 0);
  std::ifstream a(path("a")), b(path("b"));
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_FALSE(sa.str().empty());
}

TEST_F(Cli, MissingInputNamesThePath) {
  const std::string missing = path("does_not_exist.g2o");
  CliResult r = cli("solve --in " + missing + " --out " + path("x.txt"));
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.output.find(missing), std::string::npos) << r.output;
}

TEST_F(Cli, ParseErrorReportsLine) {
  {
    std::ofstream bad(path("bad.g2o"));
    bad << "# header\nVERTEX_SE3:QUAT 0 0 0 0 0 0 0 1\nNOPE 1\n";
  }
  CliResult r = cli("solve --in " + path("bad.g2o") + " --out " + path("x.txt"));
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.output.find("line 3"), std::string::npos) << r.output;
}

TEST_F(Cli, MetricsOfExactPairsIsPerfect) {
  {
    std::ofstream pairs(path("pairs.txt"));
    pairs << "0 0 1 0 0 0 1  0 0 1 0 0 0 1\n";
    pairs << "0.5 -0.2 2 0 0.6 0 0.8  0.5 -0.2 2 0 0.6 0 0.8\n";
  }
  for (const char* metric : {"add", "adds"}) {
    CliResult r = cli(std::string("metrics --model ") + MHSLAM_TEST_DATA + "/square.xyz --pairs " + path("pairs.txt") +
                " --metric " + metric);
    ASSERT_EQ(r.status, 0) << r.output;
    EXPECT_NE(r.output.find("AUC 1\n"), std::string::npos) << r.output;
  }
}

TEST_F(Cli, BadArguments) {
  EXPECT_NE(cli("").status, 0);
  EXPECT_NE(cli("frobnicate").status, 0);
  EXPECT_NE(cli("solve --out " + path("x")).status, 0);
  EXPECT_NE(cli("solve --in a --out b --strategy median").status, 0);
  EXPECT_NE(cli("metrics --model m --pairs p --metric chamfer").status, 0);
  EXPECT_NE(cli("compare --seeds 1,x --out-prefix " + path("c")).status, 0);
  EXPECT_NE(cli("simulate --frames 10 --inner-frames 20 --out " + path("a") + " --gt-out " + path("b")).status, 0);
}
