#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "triage/bundle.hpp"
#include "triage/cli.hpp"
#include "triage/csv.hpp"

namespace triage {
namespace {

namespace fs = std::filesystem;

const std::string kSource = TRIAGE_SOURCE_DIR;
const std::string kFraud = kSource + "/scenarios/fraud.scn";

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "triage");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliRun r;
  r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() /
            ("triage-" + std::string(info->test_suite_name()) + "-" + info->name() + "-" + std::to_string(::getpid()));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::vector<std::vector<std::string>> read_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) rows.push_back(csv::split_row(line));
  return rows;
}

// Every numeric cell must already be in 9-significant-digit form.
void expect_canonical_numbers(const std::string& text) {
  const auto rows = read_csv(text);
  ASSERT_FALSE(rows.empty());
  for (std::size_t r = 1; r < rows.size(); ++r)
    for (const auto& cell : rows[r]) {
      double x;
      if (csv::parse_number(cell, x)) EXPECT_EQ(csv::number(x), cell);
    }
}

std::vector<std::string> tiny_training() {
  return {"--episodes", "4", "--steps", "40", "--rollouts", "20", "--horizon", "40"};
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// ---------------------------------------------------------------------------
// csv

TEST(Csv, NumberFormatting) {
  EXPECT_EQ(csv::number(1.0 / 3.0), "0.333333333");
  EXPECT_EQ(csv::number(-0.0), "0");
  EXPECT_EQ(csv::number(178.90488325812868), "178.904883");
  EXPECT_EQ(csv::number(1e-20), "1e-20");
  EXPECT_EQ(csv::number(20.0), "20");
  EXPECT_EQ(csv::number(std::size_t{7}), "7");
}

TEST(Csv, QuotingRoundTrip) {
  const std::vector<std::string> cells{"plain", "with,comma", "with \"quote\"", ""};
  std::ostringstream os;
  csv::write_row(os, cells);
  EXPECT_EQ(os.str(), "plain,\"with,comma\",\"with \"\"quote\"\"\",\n");
  std::string line = os.str();
  line.pop_back();
  EXPECT_EQ(csv::split_row(line), cells);
  EXPECT_THROW(csv::split_row("\"open"), csv::CsvError);
}

TEST(Csv, MatrixReadWrite) {
  const UtilityMatrix m = csv::parse_matrix("x,rock,paper\nrock,0,-1\npaper,1.5,0\n");
  EXPECT_EQ(m.row_labels, (std::vector<std::string>{"rock", "paper"}));
  EXPECT_EQ(m.col_labels, (std::vector<std::string>{"rock", "paper"}));
  EXPECT_EQ(m.values(1, 0), 1.5);
  std::ostringstream os;
  csv::write_matrix(os, m);
  const UtilityMatrix back = csv::parse_matrix(os.str());
  EXPECT_EQ(back.values, m.values);
  EXPECT_EQ(back.row_labels, m.row_labels);

  const UtilityMatrix bare = csv::parse_matrix("3,1\n1,2\n");
  EXPECT_EQ(bare.values.rows(), 2);
  EXPECT_EQ(bare.row_labels[1], "row2");
  EXPECT_EQ(bare.col_labels[0], "col1");
  EXPECT_THROW(csv::parse_matrix(""), csv::CsvError);
  EXPECT_THROW(csv::parse_matrix("x,a,b\nr,1\n"), csv::CsvError);
  EXPECT_THROW(csv::parse_matrix("x,a\nr,abc\n"), csv::CsvError);
}

// ---------------------------------------------------------------------------
// bundle

TEST(Bundle, RoundTrip) {
  TempDir dir;
  const ScenarioConfig cfg = builtin_fraud();
  Rng rng(3);
  auto net = std::make_shared<const nn::Mlp>(nn::init_policy_net(3, 16, 3, rng));
  StrategyBundle b;
  b.scenario = "fraud";
  b.value = -201.25;
  b.defender = {{make_uniform_defender(), make_priority_defender(cfg), make_neural(net, Player::Defender, "defender-oracle-1")},
                {0.1, 0.2, 0.7}};
  b.attacker = {{make_uniform_attacker(), make_greedy_attacker()}, {1.0 / 3, 2.0 / 3}};
  save_bundle(b, dir.path());
  EXPECT_TRUE(fs::exists(dir / "defender-oracle-1.net"));
  for (const fs::path& where : {dir.path(), dir / "bundle.json"}) {
    const StrategyBundle back = load_bundle(where);
    EXPECT_EQ(back.scenario, "fraud");
    EXPECT_EQ(back.value, -201.25);
    EXPECT_EQ(back.defender.weights, b.defender.weights);
    EXPECT_EQ(back.attacker.weights, b.attacker.weights);
    ASSERT_EQ(back.defender.pures.size(), 3u);
    EXPECT_EQ(std::get<StaticPriorityDefender>(back.defender.pures[1].kind).order,
              std::get<StaticPriorityDefender>(b.defender.pures[1].kind).order);
    const auto& nb = std::get<NeuralPolicy>(back.defender.pures[2].kind);
    EXPECT_EQ(nb.role, Player::Defender);
    for (std::size_t l = 0; l < net->layers().size(); ++l) EXPECT_EQ(nb.net->layers()[l], net->layers()[l]);
    EXPECT_TRUE(std::holds_alternative<GreedyAttacker>(back.attacker.pures[1].kind));
  }
  EXPECT_THROW(load_bundle(dir / "missing"), BundleError);
  write_file(dir / "bundle.json", "{\"scenario\":\"x\",\"value\":0,\"defender\":[],\"attacker\":[]}");
  EXPECT_THROW(load_bundle(dir.path()), BundleError);
}

// ---------------------------------------------------------------------------
// solve

TEST(CliSolve, RockPaperScissors) {
  TempDir dir;
  write_file(dir / "rps.csv", "x,rock,paper,scissors\nrock,0,-1,1\npaper,1,0,-1\nscissors,-1,1,0\n");
  const CliRun r = run_cli({"solve", (dir / "rps.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream is(r.out);
  std::string key;
  double value;
  is >> key >> value;
  EXPECT_EQ(key, "value:");
  EXPECT_NEAR(value, 0.0, 1e-9);
  EXPECT_NE(r.out.find("  rock 0.333333333\n"), std::string::npos);
  EXPECT_NE(r.out.find("  scissors 0.333333333\n"), std::string::npos);
}

TEST(CliSolve, TwoByTwoAndDegenerate) {
  TempDir dir;
  write_file(dir / "m.csv", "3,1\n1,2\n");
  CliRun r = run_cli({"solve", (dir / "m.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "value: 1.66666667");
  write_file(dir / "one.csv", "-4.5\n");
  r = run_cli({"solve", (dir / "one.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "value: -4.5\nexploitability: 0\ndefender:\n  row1 1\nattacker:\n  col1 1\n");
}

TEST(CliSolve, Errors) {
  TempDir dir;
  write_file(dir / "bad.csv", "x,a,b\nr,1,oops\n");
  CliRun r = run_cli({"solve", (dir / "bad.csv").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("oops"), std::string::npos);
  r = run_cli({"solve", (dir / "absent.csv").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("absent.csv"), std::string::npos);
}

// ---------------------------------------------------------------------------
// scenario

TEST(CliScenario, ValidateExportPrune) {
  TempDir dir;
  CliRun r = run_cli({"scenario", "validate", kFraud});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "ok: fraud (3 alert types, 3 attacks, B=20, D=2)\n");

  r = run_cli({"scenario", "export", "fraud"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, slurp(kFraud));
  r = run_cli({"scenario", "export", "ids", "--out", (dir / "ids.scn").string()});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(slurp(dir / "ids.scn"), slurp(kSource + "/scenarios/ids.scn"));
  EXPECT_EQ(run_cli({"scenario", "export", "nope"}).code, 2);

  r = run_cli({"scenario", "prune", kSource + "/scenarios/ids-raw.scn", "--epsilon", "0", "--out",
               (dir / "p.scn").string()});
  EXPECT_EQ(r.code, 0) << r.err;
  ScenarioConfig pruned = load_scenario((dir / "p.scn").string());
  pruned.name = "ids";
  EXPECT_EQ(pruned, builtin_ids());
}

TEST(CliScenario, InvalidFileNamesTheField) {
  TempDir dir;
  std::string text = slurp(kFraud);
  const auto at = text.find("\"discount\": 0.95");
  ASSERT_NE(at, std::string::npos);
  text.replace(at, 16, "\"discount\": 1.2");
  write_file(dir / "bad.scn", text);
  const CliRun r = run_cli({"scenario", "validate", (dir / "bad.scn").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("discount"), std::string::npos);
}

// ---------------------------------------------------------------------------
// train

TEST(CliTrain, MissingScenarioExitsTwoAndNamesPath) {
  TempDir dir;
  const CliRun r = run_cli({"train", "--scenario", "/no/such/file.scn", "--out", (dir / "run").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("/no/such/file.scn"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "run"));
}

TEST(CliTrain, BinaryReportsMissingScenario) {
  const std::string cmd = std::string(TRIAGE_CLI_PATH) + " train --scenario /no/such/file.scn --out /tmp/unused 2>&1";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  ASSERT_NE(pipe, nullptr);
  std::string output;
  char buf[256];
  while (std::fgets(buf, sizeof(buf), pipe)) output += buf;
  const int status = ::pclose(pipe);
  EXPECT_EQ(WEXITSTATUS(status), 2);
  EXPECT_NE(output.find("/no/such/file.scn"), std::string::npos);
}

TEST(CliTrain, WritesRunDirectory) {
  TempDir dir;
  const fs::path out = dir / "f7";
  const CliRun r = run_cli(concat({"train", "--scenario", kFraud, "--seed", "7", "--out", out.string()}, tiny_training()));
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"manifest.json", "iterations.csv", "training.csv", "utility.csv", "strategies/bundle.json"})
    EXPECT_TRUE(fs::exists(out / f)) << f;

  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  EXPECT_EQ(manifest["subcommand"], "train");
  EXPECT_EQ(manifest["scenario_path"], kFraud);
  EXPECT_EQ(manifest["master_seed"], 7);
  EXPECT_EQ(manifest["version"], cli::kVersion);
  EXPECT_EQ(manifest["config"]["oracle"]["episodes"], 4);
  EXPECT_EQ(manifest["config"]["def_budget"][0], 20.0);
  EXPECT_EQ(manifest["scenario"]["name"], "fraud");

  const auto iters = read_csv(slurp(out / "iterations.csv"));
  EXPECT_EQ(iters[0][0], "iteration");
  EXPECT_GE(iters.size(), 2u);
  const auto training = read_csv(slurp(out / "training.csv"));
  EXPECT_EQ(training[0], (std::vector<std::string>{"oracle_call", "iteration", "player", "episode",
                                                   "mean_reward", "critic_loss", "epsilon"}));
  EXPECT_EQ(training.size(), 1 + 2 * 4 * (iters.size() - 1));
  for (const char* f : {"iterations.csv", "training.csv", "utility.csv"}) expect_canonical_numbers(slurp(out / f));

  const StrategyBundle b = load_bundle(out);
  EXPECT_EQ(b.scenario, "fraud");
  const UtilityMatrix u = csv::parse_matrix(slurp(out / "utility.csv"));
  EXPECT_EQ(u.row_labels.size(), b.defender.pures.size());
  EXPECT_EQ(u.col_labels.size(), b.attacker.pures.size());
}

TEST(CliTrain, DefaultsEchoTheReferenceConfiguration) {
  cli::RunOptions o;
  o.scenario = kFraud;
  const auto m = cli::detail::manifest("train", o, builtin_fraud());
  const auto& hp = m["config"]["oracle"];
  EXPECT_EQ(hp["episodes"], 500);
  EXPECT_EQ(hp["steps"], 400);
  EXPECT_EQ(hp["policy_lr"], 0.001);
  EXPECT_EQ(hp["value_lr"], 0.002);
  EXPECT_EQ(hp["discount"], 0.95);
  EXPECT_EQ(hp["buffer_capacity"], 40000);
  EXPECT_EQ(m["config"]["max_iterations"], 30);
  EXPECT_EQ(m["config"]["horizon"], 400);
}

TEST(CliTrain, CsvsIndependentOfThreads) {
  TempDir dir;
  for (const char* threads : {"1", "3"}) {
    const CliRun r = run_cli(concat({"train", "--scenario", kFraud, "--seed", "11", "--threads", threads, "--out",
                                  (dir / (std::string("t") + threads)).string()},
                                 tiny_training()));
    ASSERT_EQ(r.code, 0) << r.err;
  }
  for (const char* f : {"iterations.csv", "training.csv", "utility.csv", "strategies/bundle.json"})
    EXPECT_EQ(slurp(dir / "t1" / f), slurp(dir / "t3" / f)) << f;
}

TEST(CliTrain, RejectsBudgetLists) {
  TempDir dir;
  const CliRun r = run_cli({"train", "--scenario", kFraud, "--def-budget", "10,20", "--out", (dir / "x").string()});
  EXPECT_EQ(r.code, 2);
}

// ---------------------------------------------------------------------------
// eval

TEST(CliEval, NoAttackerLosesNothing) {
  const CliRun r = run_cli({"eval", "--scenario", kFraud, "--defender", "uniform", "--attacker", "none", "--def-budget",
                         "10,20", "--att-budget", "1,2", "--seeds", "2", "--rollouts", "10", "--horizon", "30"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = read_csv(r.out);
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"defender", "attacker_model", "B", "D", "mean_loss", "ci95", "seeds"}));
  const std::vector<std::pair<std::string, std::string>> grid{{"10", "1"}, {"10", "2"}, {"20", "1"}, {"20", "2"}};
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i][0], "uniform");
    EXPECT_EQ(rows[i][1], "none");
    EXPECT_EQ(rows[i][2], grid[i - 1].first);
    EXPECT_EQ(rows[i][3], grid[i - 1].second);
    EXPECT_EQ(rows[i][4], "0");
    EXPECT_EQ(rows[i][5], "0");
    EXPECT_EQ(rows[i][6], "2");
  }
}

TEST(CliEval, CellsDoNotDependOnTheSweep) {
  const std::vector<std::string> common{"--scenario", kFraud, "--defender", "priority", "--attacker", "uniform,greedy",
                                        "--seeds", "2", "--rollouts", "20", "--horizon", "50"};
  const CliRun sweep = run_cli(concat(concat({"eval"}, common), {"--def-budget", "10,20"}));
  const CliRun single = run_cli(concat(concat({"eval"}, common), {"--def-budget", "20"}));
  ASSERT_EQ(sweep.code, 0) << sweep.err;
  const auto a = read_csv(sweep.out);
  const auto b = read_csv(single.out);
  ASSERT_EQ(a.size(), 5u);
  ASSERT_EQ(b.size(), 3u);
  EXPECT_EQ(a[3], b[1]);
  EXPECT_EQ(a[4], b[2]);
  expect_canonical_numbers(sweep.out);
}

TEST(CliEval, WritesManifestAndCsvIndependentOfThreads) {
  TempDir dir;
  std::vector<std::string> outputs;
  for (const char* threads : {"1", "2"}) {
    const fs::path out = dir / (std::string("e") + threads);
    const CliRun r = run_cli({"eval", "--scenario", kFraud, "--defender", "uniform", "--attacker", "oracle,greedy", "--seeds",
                           "2", "--rollouts", "20", "--horizon", "40", "--episodes", "3", "--steps", "40", "--threads",
                           threads, "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(out / "manifest.json"));
    outputs.push_back(slurp(out / "eval.csv"));
  }
  EXPECT_EQ(outputs[0], outputs[1]);
  EXPECT_EQ(read_csv(outputs[0]).size(), 3u);
}

TEST(CliEval, BundleAndTrainedDefenders) {
  TempDir dir;
  const fs::path run = dir / "run";
  ASSERT_EQ(run_cli(concat({"train", "--scenario", kFraud, "--out", run.string()}, tiny_training())).code, 0);
  CliRun r = run_cli({"eval", "--scenario", kFraud, "--defender", run.string(), "--attacker", "uniform", "--seeds", "1",
                   "--rollouts", "10", "--horizon", "30"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto rows = read_csv(r.out);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1][0], "bundle");

  // Budget misestimation: trained against D=1, evaluated at D=2.
  r = run_cli(concat({"eval", "--scenario", kFraud, "--defender", "arl", "--attacker", "greedy", "--seeds", "1",
                      "--att-budget", "2", "--train-att-budget", "1"},
                     tiny_training()));
  ASSERT_EQ(r.code, 0) << r.err;
  rows = read_csv(r.out);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1][0], "arl");
  EXPECT_EQ(rows[1][3], "2");
}

TEST(CliEval, UsageErrors) {
  EXPECT_EQ(run_cli({"eval", "--scenario", kFraud, "--defender", "bogus"}).code, 2);
  EXPECT_EQ(run_cli({"eval", "--scenario", kFraud, "--defender", "uniform", "--attacker", "random"}).code, 2);
  EXPECT_EQ(run_cli({"eval", "--scenario", kFraud, "--defender", "uniform", "--train-att-budget", "1"}).code, 2);
  EXPECT_EQ(run_cli({"eval", "--scenario", kFraud, "--defender", "uniform", "--def-budget", "-1"}).code, 2);
  EXPECT_EQ(run_cli({"eval", "--defender", "uniform"}).code, 2);
}

TEST(Cli, TopLevel) {
  EXPECT_EQ(run_cli({}).code, 2);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 2);
  const CliRun help = run_cli({"--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("train"), std::string::npos);
  const CliRun version = run_cli({"--version"});
  EXPECT_EQ(version.code, 0);
  EXPECT_NE(version.out.find(cli::kVersion), std::string::npos);
}

}  // namespace
}  // namespace triage
