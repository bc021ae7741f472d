#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "omcs/experiment.hpp"

using namespace omcs;
namespace fs = std::filesystem;

namespace {

ProblemParams params(int b, std::vector<double> theta) {
  ProblemParams p{b, static_cast<int>(theta.size()), std::move(theta)};
  p.validate();
  return p;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("omcs_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Data lines of a report CSV: comments dropped, header first.
std::vector<std::string> csv_lines(const fs::path& p) {
  std::vector<std::string> out;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') out.push_back(line);
  return out;
}

struct CliResult {
  int code;
  std::string out;
};

CliResult cli(const std::string& args, const fs::path& dir) {
  const char* exe = std::getenv("OMCS_CLI");
  if (!exe) return {-1, ""};
  const fs::path out = dir / "stdout.txt";
  const std::string cmd = std::string("\"") + exe + "\" " + args + " > \"" + out.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out)};
}

}  // namespace

TEST(GenHardGfq, DegenerateGrid) {
  const auto f = gen_hard_gfq(params(3, {1}), 0.1);
  EXPECT_EQ(f.instance.size(), 6u);
  EXPECT_EQ(f.prefix_ends, std::vector<std::size_t>{6});
  for (const auto& a : f.instance.agents) EXPECT_DOUBLE_EQ(a.value, 1.0);
}

TEST(GenHardGfq, LevelLayoutAndDropOut) {
  const int b = 2;
  const auto f = gen_hard_gfq(params(b, {2, 4}), 1.0);
  const auto& ag = f.instance.agents;
  ASSERT_GE(ag.size(), 3u * b);
  for (int c = 0; c < b; ++c) {
    EXPECT_EQ(ag[c].labels, std::vector<ClassId>{1});
    EXPECT_EQ(ag[b + c].labels, std::vector<ClassId>{2});
    EXPECT_EQ(ag[2 * b + c].labels, (std::vector<ClassId>{1, 2}));
    EXPECT_DOUBLE_EQ(ag[2 * b + c].value, 1.0);
  }
  std::size_t at3 = 0;
  for (const auto& a : ag) {
    if (a.value != 3.0) continue;
    ++at3;
    EXPECT_EQ(a.labels, std::vector<ClassId>{2});
  }
  EXPECT_EQ(at3, static_cast<std::size_t>(b));
  for (std::size_t k = 0; k < f.prefix_ends.size(); ++k) EXPECT_NO_THROW(f.prefix(k).validate());
}

TEST(GenHardPf, Examples) {
  const auto f = gen_hard_pf(params(1, {2}), 0.5);
  ASSERT_EQ(f.instance.size(), 3u);
  EXPECT_DOUBLE_EQ(f.instance.agents[0].value, 1.0);
  EXPECT_DOUBLE_EQ(f.instance.agents[1].value, 1.5);
  EXPECT_DOUBLE_EQ(f.instance.agents[2].value, 2.0);

  const auto g = gen_hard_pf(params(2, {3, 3}), 0.5);
  ASSERT_EQ(g.instance.size(), 2u * 2 * 5);
  EXPECT_EQ(g.instance.agents[10].labels, std::vector<ClassId>{2});
  EXPECT_DOUBLE_EQ(g.instance.agents[10].value, 1.0);
  EXPECT_DOUBLE_EQ(g.instance.agents[9].value, 3.0);

  const auto h = gen_hard_pf(params(2, {3, 4}), 5.0);
  EXPECT_EQ(h.prefix_ends.size(), 2u);
  for (std::size_t k = 0; k < h.prefix_ends.size(); ++k) EXPECT_NO_THROW(h.prefix(k).validate());
}

TEST(GenSynthetic, ReproducibleAndLabelModels) {
  const auto p3 = params(5, {5, 10, 15});
  const auto a = gen_synthetic(p3, 200, 4, LabelModel::parse("multi(0.3)"));
  const auto b = gen_synthetic(p3, 200, 4, LabelModel::parse("multi(0.3)"));
  ASSERT_EQ(a.size(), 200u);
  for (std::size_t t = 0; t < a.size(); ++t) {
    EXPECT_EQ(a.agents[t].value, b.agents[t].value);
    EXPECT_EQ(a.agents[t].labels, b.agents[t].labels);
  }
  EXPECT_NO_THROW(a.validate());
  for (const auto& ag : gen_synthetic(params(5, {4}), 50, 1, LabelModel::parse("single-uniform")).agents)
    EXPECT_EQ(ag.labels, std::vector<ClassId>{1});
  for (const auto& ag : gen_synthetic(p3, 50, 1, LabelModel::parse("multi(1.0)")).agents) {
    EXPECT_EQ(ag.labels, (std::vector<ClassId>{1, 2, 3}));
    EXPECT_LE(ag.value, 5.0);
  }
  EXPECT_THROW(LabelModel::parse("pairs"), ParseError);
  EXPECT_THROW(LabelModel::parse("multi(2)"), ParseError);
}

TEST(RunExperiment, CrCsvSchemaConfigEchoAndDeterminism) {
  const auto cfg = Config::parse_string(
      "experiment = cr\ninstance = hard-gfq\ndelta = 0.25\nB = 3\ntheta = [2, 4]\nquotas = [1, 0]\n"
      "policies = [d-gfq, r-gfq, frac-gfq]\ntrials = 500\nseed = 5\n");
  const auto d1 = scratch("cr1"), d2 = scratch("cr2");
  const auto r1 = run_experiment(cfg, d1);
  run_experiment(cfg, d2);
  for (const char* f : {"cr.csv", "cdf.csv", "cdf.svg"}) {
    ASSERT_TRUE(fs::exists(d1 / f)) << f;
    EXPECT_EQ(slurp(d1 / f), slurp(d2 / f)) << f;
  }
  const auto text = slurp(d1 / "cr.csv");
  EXPECT_NE(text.find("# seed = 5"), std::string::npos);
  EXPECT_NE(text.find("# instance = hard-gfq"), std::string::npos);
  const auto lines = csv_lines(d1 / "cr.csv");
  EXPECT_EQ(lines.front(), "policy,case,prefix,opt,mean_alg,stderr,ratio");
  EXPECT_EQ(lines.size(), 1 + r1.cr.size());
  for (const auto& r : r1.cr) {
    EXPECT_NEAR(r.ratio, r.opt / r.mean_alg, 1e-12);
    if (r.policy != "r-gfq") {
      EXPECT_EQ(r.stderr_alg, 0.0);
    }
  }
  const auto svg = slurp(d1 / "cdf.svg");
  EXPECT_EQ(svg.rfind("<?xml", 0), 0u);
  EXPECT_NE(svg.find("<svg "), std::string::npos);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_NE(svg.find("seed = 5"), std::string::npos);
}

TEST(RunExperiment, RandomizedBeatsDeterministicOnSmallBudgets) {
  for (const char* setup : {"B = 2\ntheta = [4]\nquotas = [0]\n", "B = 4\ntheta = [3, 6]\nquotas = [1, 1]\n",
                            "B = 5\ntheta = [2, 4]\nquotas = [1, 1]\n"}) {
    const auto cfg = Config::parse_string(std::string("experiment = cr\ninstance = hard-gfq\ndelta = 0.05\n") + setup +
                                          "policies = [d-gfq, r-gfq]\ntrials = 4000\nseed = 1\n");
    const auto res = run_experiment(cfg, scratch("small_b"));
    std::map<std::string, double> worst;
    for (const auto& r : res.cr) worst[r.policy] = std::max(worst[r.policy], r.ratio);
    EXPECT_LE(worst["r-gfq"], worst["d-gfq"]) << setup;
  }
}

TEST(RunExperiment, UtilitiesSchema) {
  const auto cfg = Config::parse_string(
      "experiment = utilities\ninstance = synthetic\nT = 120\nB = 10\ntheta = [5, 10, 15]\nquotas = [2, 2, 2]\n"
      "label_model = multi(0.2)\npolicies = [opt, r-gfq, pf, lila-pf]\ntrials = 200\nseed = 2\n");
  const auto d = scratch("util");
  const auto res = run_experiment(cfg, d);
  const auto lines = csv_lines(d / "utilities.csv");
  EXPECT_EQ(lines.front(), "policy,class,mean_utility,stderr,mean_units");
  EXPECT_EQ(res.utilities.size(), 4u * 3u);
  EXPECT_EQ(lines.size(), 1 + res.utilities.size());
  for (const auto& r : res.utilities) {
    EXPECT_GE(r.mean_utility, 0.0);
    if (r.policy == "r-gfq") {
      EXPECT_GE(r.mean_units, 2.0 - 1e-12);
    }
  }
}

TEST(RunExperiment, FairnessSweepCrossingPattern) {
  const auto cfg = Config::parse_string(
      "experiment = fairness-xi\ninstance = synthetic\nlabel_model = multi(0.2)\nT = 300\nB = 30\n"
      "theta = [5, 10, 15]\nadvice_reference = fair\nxi_grid = [0, 0.5, 1]\ntrials = 1000\nseed = 7\n");
  const auto d = scratch("fair");
  const auto res = run_experiment(cfg, d);
  EXPECT_EQ(csv_lines(d / "fairness.csv").front(), "xi,epsilon,rho,empirical_pf");
  std::map<std::pair<double, double>, double> pf;
  std::vector<double> eps;
  for (const auto& r : res.fairness) {
    pf[{r.xi, r.epsilon}] = r.empirical_pf;
    if (std::find(eps.begin(), eps.end(), r.epsilon) == eps.end()) eps.push_back(r.epsilon);
  }
  ASSERT_EQ(eps.size(), 3u);
  const double lo = eps.front(), hi = eps.back();
  auto at = [&](double xi, double e) { return pf.at(std::make_pair(xi, e)); };
  EXPECT_LT(at(0.0, lo), at(0.0, hi));
  EXPECT_GT(at(1.0, lo), at(1.0, hi));
  EXPECT_LT(at(0.0, lo), at(1.0, lo));
}

TEST(RunExperiment, ErrorsAreSurfaced) {
  const auto d = scratch("err");
  EXPECT_THROW(run_experiment(Config::parse_string("B = 2\ntheta = [3]\npolicies = [greedy]\n"), d), InvariantError);
  EXPECT_THROW(run_experiment(Config::parse_string("experiment = plots\nB = 2\ntheta = [3]\n"), d), InvariantError);
  EXPECT_THROW(run_experiment(Config::parse_string("B = 2\ntheta = [3]\ninstance = stdin\n"), d), InvariantError);
  EXPECT_THROW(run_experiment(Config::parse_string("B = 2\ntheta = [3, 4]\nquotas = [2, 1]\n"), d), InfeasibleError);
}

TEST(Cli, GenSolveRunReport) {
  if (!std::getenv("OMCS_CLI")) GTEST_SKIP() << "OMCS_CLI not set";
  const auto d = scratch("cli");

  auto r = cli("gen --kind hard-gfq -B 2 --theta 2,4 --quotas 1,0 --delta 0.5 --out " + (d / "i.jsonl").string(), d);
  ASSERT_EQ(r.code, 0) << r.out;
  const auto file = read_instance_file((d / "i.jsonl").string());
  EXPECT_EQ(file.instance.params.budget, 2);
  ASSERT_TRUE(file.quotas.has_value());
  EXPECT_EQ(file.quotas->quotas, (std::vector<int>{1, 0}));
  EXPECT_EQ(file.instance.size(), gen_hard_gfq(params(2, {2, 4}), 0.5).instance.size());

  r = cli("solve-thresholds -B 2 --theta 2", d);
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_NEAR(j["deterministic"]["alpha"].get<double>(), 2.0, 1e-6);
  EXPECT_EQ(j["deterministic"]["lambdas"].size(), 3u);
  EXPECT_LE(j["deterministic"]["residual"].get<double>(), 1e-8);
  EXPECT_TRUE(j["fractional"].contains("regime"));

  {
    std::ofstream c(d / "run.conf");
    c << "experiment = cr\ninstance = file\npath = " << (d / "i.jsonl").string()
      << "\nB = 2\ntheta = [2, 4]\nquotas = [1, 0]\npolicies = [d-gfq, r-gfq]\ntrials = 100\n";
  }
  r = cli("run --config " + (d / "run.conf").string() + " --out " + (d / "out").string() + " --seed 9 --trials 50", d);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(slurp(d / "out" / "cr.csv").find("# seed = 9"), std::string::npos);
  EXPECT_NE(slurp(d / "out" / "cr.csv").find("# trials = 50"), std::string::npos);

  r = cli("report --out " + (d / "out").string(), d);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("d-gfq"), std::string::npos);
  EXPECT_NE(r.out.find("r-gfq"), std::string::npos);
}

TEST(Cli, ErrorsAndRoundingCheck) {
  if (!std::getenv("OMCS_CLI")) GTEST_SKIP() << "OMCS_CLI not set";
  const auto d = scratch("cli_err");
  {
    std::ofstream c(d / "bad.conf");
    c << "B = 2\ntheta = [3]\npolicies = [nope]\n";
  }
  auto r = cli("run --config " + (d / "bad.conf").string() + " --out " + (d / "o").string(), d);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("nope"), std::string::npos);
  r = cli("report --out " + (d / "empty").string(), d);
  EXPECT_NE(r.code, 0);
  r = cli("solve-thresholds -B 2 --theta 3,2", d);
  EXPECT_EQ(r.code, 2);
  r = cli("validate-rounding --streams 2 -T 50 -B 4 --trials 5000 --seed 3", d);
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("PASS stream 1"), std::string::npos);
}
