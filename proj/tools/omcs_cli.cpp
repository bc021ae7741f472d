#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "omcs/omcs.hpp"

namespace {

struct ParamsArgs {
  int budget = 5;
  std::vector<double> theta{2.0};
  std::vector<int> quotas;

  void add(CLI::App* app) {
    app->add_option("-B,--budget", budget, "number of units B");
    app->add_option("--theta", theta, "fluctuation ratios, nondecreasing")->delimiter(',');
    app->add_option("--quotas", quotas, "per-class quotas m_j")->delimiter(',');
  }

  omcs::ProblemParams params() const {
    omcs::ProblemParams p{budget, static_cast<int>(theta.size()), theta};
    p.validate();
    return p;
  }

  omcs::GfqSpec spec() const {
    omcs::GfqSpec s = quotas.empty() ? omcs::GfqSpec::none(static_cast<int>(theta.size())) : omcs::GfqSpec{quotas};
    s.validate(params());
    return s;
  }
};

int cmd_gen(const std::string& kind, const ParamsArgs& pa, double delta, std::size_t count, const std::string& labels,
            std::uint64_t seed, const std::string& out) {
  const auto params = pa.params();
  omcs::Instance inst;
  if (kind == "hard-gfq") inst = omcs::gen_hard_gfq(params, delta).instance;
  else if (kind == "hard-pf") inst = omcs::gen_hard_pf(params, delta).instance;
  else if (kind == "synthetic") inst = omcs::gen_synthetic(params, count, seed, omcs::LabelModel::parse(labels));
  else throw omcs::InvariantError("unknown generator '" + kind + "'");
  std::optional<omcs::GfqSpec> q;
  if (!pa.quotas.empty()) q = pa.spec();
  if (out.empty() || out == "-") omcs::write_instance(std::cout, inst, q);
  else omcs::write_instance_file(out, inst, q);
  std::cerr << "wrote " << inst.size() << " agents\n";
  return 0;
}

int cmd_solve(const ParamsArgs& pa) {
  const auto params = pa.params();
  const auto spec = pa.spec();
  const auto table = omcs::solve_thresholds(params, spec);
  nlohmann::json j;
  j["deterministic"] = table.to_json();
  j["deterministic"]["case"] = omcs::to_string(table.case_id);
  j["deterministic"]["residual"] = omcs::threshold_residual(table, params, spec);
  j["fractional"] = omcs::build_frac_threshold(params, spec).to_json();
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_run(const std::string& config_path, const std::string& out, std::optional<std::uint64_t> seed,
            std::optional<std::size_t> trials) {
  auto cfg = omcs::Config::load(config_path);
  if (seed) cfg.set("seed", std::to_string(*seed));
  if (trials) cfg.set("trials", std::to_string(*trials));
  const auto res = omcs::run_experiment(cfg, out);
  for (const auto& f : res.files) std::cout << f << '\n';
  return 0;
}

int cmd_validate_rounding(std::size_t streams, std::size_t length, int budget, std::size_t trials, std::uint64_t seed) {
  bool ok = true;
  omcs::Rng gen(omcs::derive_seed(seed, 0xfeedULL));
  for (std::size_t s = 0; s < streams; ++s) {
    omcs::FracStream fs;
    fs.budget = budget;
    double z = 0.0;
    for (std::size_t t = 0; t < length; ++t) {
      const double x = std::min(0.1 * omcs::uniform01(gen), budget - z);
      z += x;
      fs.x.push_back(x);
      fs.values.push_back(1.0 + 4.0 * omcs::uniform01(gen));
    }
    const auto rep = omcs::validate_lossless(fs, trials, omcs::derive_seed(seed, s));
    std::cout << (rep.pass ? "PASS" : "FAIL") << " stream " << s << " value_z=" << std::setprecision(3)
              << rep.max_value_z << " availability_z=" << rep.max_availability_z << '\n';
    ok = ok && rep.pass;
  }
  return ok ? 0 : 1;
}

// Summarizes the CSV outputs found in a run directory.
int cmd_report(const std::string& dir) {
  namespace fs = std::filesystem;
  bool any = false;
  auto rows = [](const fs::path& p) {
    std::vector<std::vector<std::string>> out;
    std::ifstream in(p);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      if (header) {
        header = false;
        continue;
      }
      std::vector<std::string> f;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) f.push_back(cell);
      out.push_back(f);
    }
    return out;
  };
  if (fs::exists(fs::path(dir) / "cr.csv")) {
    any = true;
    std::map<std::string, std::pair<double, std::size_t>> worst;
    for (const auto& r : rows(fs::path(dir) / "cr.csv")) {
      auto& w = worst[r.at(0)];
      w.first = std::max(w.first, std::stod(r.at(6)));
      ++w.second;
    }
    std::cout << "competitive ratio (worst over cases)\n";
    for (const auto& [pol, w] : worst) std::cout << "  " << std::setw(10) << pol << "  " << w.first << "  (" << w.second << " cases)\n";
  }
  if (fs::exists(fs::path(dir) / "utilities.csv")) {
    any = true;
    std::cout << "per-class utilities\n";
    for (const auto& r : rows(fs::path(dir) / "utilities.csv"))
      std::cout << "  " << std::setw(10) << r.at(0) << "  class " << r.at(1) << "  " << r.at(2) << " +- " << r.at(3) << '\n';
  }
  if (fs::exists(fs::path(dir) / "fairness.csv")) {
    any = true;
    std::cout << "empirical PF ratio by (xi, epsilon)\n";
    for (const auto& r : rows(fs::path(dir) / "fairness.csv"))
      std::cout << "  xi=" << r.at(0) << "  eps=" << r.at(1) << "  rho=" << r.at(2) << "  pf=" << r.at(3) << '\n';
  }
  if (!any) {
    std::cerr << "no report CSVs in " << dir << '\n';
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online multi-class selection with group fairness"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::size_t trials = 0;
  std::string config_path, out;

  auto* gen = app.add_subcommand("gen", "generate an instance file");
  ParamsArgs gen_params;
  gen_params.add(gen);
  std::string kind = "synthetic", labels = "single-uniform";
  double delta = 0.1;
  std::size_t count = 100;
  gen->add_option("--kind", kind, "hard-gfq | hard-pf | synthetic");
  gen->add_option("--delta", delta, "value grid step for hard instances");
  gen->add_option("-T,--count", count, "arrivals for synthetic instances");
  gen->add_option("--labels", labels, "single-uniform | multi(p)");
  gen->add_option("--seed", seed);
  gen->add_option("--out", out, "output path, '-' for stdout");

  auto* solve = app.add_subcommand("solve-thresholds", "print deterministic and fractional thresholds as JSON");
  ParamsArgs solve_params;
  solve_params.add(solve);

  auto* run = app.add_subcommand("run", "run an experiment from a config file");
  std::uint64_t run_seed = 0;
  std::size_t run_trials = 0;
  run->add_option("--config", config_path)->required();
  run->add_option("--out", out, "output directory")->required();
  auto* seed_opt = run->add_option("--seed", run_seed, "overrides the config seed");
  auto* trials_opt = run->add_option("--trials", run_trials, "overrides the config trial count");

  auto* vr = app.add_subcommand("validate-rounding", "Monte Carlo check of lossless rounding on random streams");
  std::size_t streams = 5, length = 200;
  int vr_budget = 10;
  trials = 100000;
  vr->add_option("--streams", streams);
  vr->add_option("-T,--length", length);
  vr->add_option("-B,--budget", vr_budget);
  vr->add_option("--trials", trials);
  vr->add_option("--seed", seed);

  auto* report = app.add_subcommand("report", "summarize a run directory");
  report->add_option("--out", out, "run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_gen(kind, gen_params, delta, count, labels, seed, out);
    if (*solve) return cmd_solve(solve_params);
    if (*run)
      return cmd_run(config_path, out, *seed_opt ? std::optional(run_seed) : std::nullopt,
                     *trials_opt ? std::optional(run_trials) : std::nullopt);
    if (*vr) return cmd_validate_rounding(streams, length, vr_budget, trials, seed);
    if (*report) return cmd_report(out);
  } catch (const omcs::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
