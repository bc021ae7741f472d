#pragma once

// Experiment runner behind the CLI. Three experiments:
//
//   cr           empirical competitive ratios per policy over the stopping
//                prefixes of a hard stream, or over a batch of generated
//                instances; CSV rows plus a CDF chart.
//   utilities    per-class mean utilities and units for each policy on one
//                instance.
//   fairness-xi  empirical proportional-fairness ratio of the expected
//                learning-augmented allocation over an (xi, epsilon) grid.
//
// Every output file starts with the full configuration as '#' comments.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "omcs/config.hpp"
#include "omcs/error.hpp"
#include "omcs/frac_gfq.hpp"
#include "omcs/generators.hpp"
#include "omcs/gfq_thresholds.hpp"
#include "omcs/instance_io.hpp"
#include "omcs/lila.hpp"
#include "omcs/model.hpp"
#include "omcs/oracles.hpp"
#include "omcs/parallel.hpp"
#include "omcs/pf_setaside.hpp"
#include "omcs/svg.hpp"
#include "omcs/trace.hpp"

namespace omcs {

struct PolicySettings {
  GfqSpec spec;
  double b_frac = 0.0;
  double epsilon = 1.25;
  double xi = 0.0;
  std::string advice_reference = "opt";  // opt | fair
  std::uint64_t seed = 0;
};

struct PolicyHandle {
  bool randomized = false;
  bool uses_quotas = false;
  RandomizedPolicy run;
};

inline const std::vector<std::string>& known_policies() {
  static const std::vector<std::string> ids = {"opt", "d-gfq", "r-gfq", "frac-gfq", "pf", "pf-frac", "lila-pf", "lila-gfq"};
  return ids;
}

// Builds a policy bound to one instance (advice depends on the instance).
inline PolicyHandle make_policy(const std::string& id, const Instance& instance, const PolicySettings& s) {
  const ProblemParams& p = instance.params;
  PolicyHandle h;
  if (id == "opt") {
    const Allocation a = s.spec.total() > 0 ? offline_opt_gfq_clipped(instance, s.spec).alloc : offline_opt(instance).alloc;
    h.uses_quotas = s.spec.total() > 0;
    h.run = [a](const Instance&, Rng&) { return a; };
  } else if (id == "d-gfq") {
    const ThresholdTable table = solve_thresholds(p, s.spec);
    h.uses_quotas = true;
    h.run = [p, spec = s.spec, table](const Instance& in, Rng&) { return run_d_setaside(p, spec, table, in); };
  } else if (id == "r-gfq") {
    const FracThreshold phi = build_frac_threshold(p, s.spec);
    h.randomized = h.uses_quotas = true;
    h.run = [p, spec = s.spec, phi](const Instance& in, Rng& rng) { return run_r_setaside(p, spec, phi, in, rng); };
  } else if (id == "frac-gfq") {
    h.uses_quotas = true;
    h.run = [p, spec = s.spec](const Instance& in, Rng&) { return run_frac_gfq(p, spec, in); };
  } else if (id == "pf") {
    const PfConfig cfg = PfConfig::build(p, s.b_frac);
    h.randomized = true;
    h.run = [cfg](const Instance& in, Rng& rng) { return run_pf_setaside(cfg, in, rng); };
  } else if (id == "pf-frac") {
    const PfConfig cfg = PfConfig::build(p, s.b_frac);
    h.run = [cfg](const Instance& in, Rng&) { return run_pf_fractional(cfg, in); };
  } else if (id == "lila-pf") {
    Allocation ref = s.advice_reference == "fair" ? nash_greedy_allocation(instance) : offline_opt(instance).alloc;
    const AdviceStream adv = make_advice_pf(instance, s.xi, s.seed, &ref);
    h.randomized = true;
    h.run = [adv, eps = s.epsilon](const Instance& in, Rng& rng) { return run_lila_pf(in, eps, adv, rng).alloc; };
  } else if (id == "lila-gfq") {
    const AdviceStream adv = make_advice_gfq(instance, s.spec, s.xi, s.seed);
    h.randomized = h.uses_quotas = true;
    h.run = [adv, spec = s.spec, eps = s.epsilon](const Instance& in, Rng& rng) {
      return run_lila_gfq(in, spec, eps, adv, rng).alloc;
    };
  } else {
    throw InvariantError("unknown policy id '" + id + "'");
  }
  return h;
}

struct CrRow {
  std::string policy;
  std::size_t case_index = 0;
  std::size_t prefix = 0;  // arrivals in the evaluated instance
  double opt = 0.0;
  double mean_alg = 0.0;
  double stderr_alg = 0.0;
  double ratio = 1.0;
};

struct UtilityRow {
  std::string policy;
  ClassId cls = 1;
  double mean_utility = 0.0;
  double stderr_utility = 0.0;
  double mean_units = 0.0;
};

struct FairnessRow {
  double xi = 0.0;
  double epsilon = 0.0;
  double rho = 0.0;
  double empirical_pf = 0.0;
};

struct ExperimentResult {
  std::string kind;
  std::vector<CrRow> cr;
  std::vector<UtilityRow> utilities;
  std::vector<FairnessRow> fairness;
  std::vector<std::string> files;
};

// Empirical ratio OPT / E[ALG]; an empty or zero-value case counts as 1.
inline double empirical_ratio(double opt, double alg) {
  if (opt <= 0.0) return 1.0;
  if (alg <= 0.0) return kInf;
  return opt / alg;
}

struct ExperimentSetup {
  ProblemParams params;
  PolicySettings settings;
  std::vector<std::string> policies;
  std::size_t trials = 1000;
  std::uint64_t seed = 0;
};

inline ExperimentSetup read_setup(const Config& c) {
  ExperimentSetup s;
  s.params.budget = static_cast<int>(c.integer("B"));
  s.params.theta = c.num_list("theta");
  s.params.num_classes = static_cast<int>(c.integer("K", static_cast<long>(s.params.theta.size())));
  s.params.validate();
  std::vector<int> m;
  for (double q : c.num_list("quotas", std::vector<double>(s.params.theta.size(), 0.0))) m.push_back(static_cast<int>(q));
  s.settings.spec = GfqSpec{m};
  s.settings.spec.validate(s.params);
  s.settings.b_frac = c.num("b_frac", 0.0);
  s.settings.epsilon = c.num("epsilon", 1.25);
  s.settings.xi = c.num("xi", 0.0);
  s.settings.advice_reference = c.str("advice_reference", "opt");
  s.trials = static_cast<std::size_t>(c.integer("trials", 1000));
  s.seed = static_cast<std::uint64_t>(c.integer("seed", 0));
  s.settings.seed = s.seed;
  s.policies = c.list("policies", {"d-gfq", "r-gfq"});
  for (const auto& p : s.policies)
    if (std::find(known_policies().begin(), known_policies().end(), p) == known_policies().end())
      throw InvariantError("unknown policy id '" + p + "'");
  return s;
}

// The instances an experiment evaluates: one family with stopping prefixes,
// or a batch of independent instances (each evaluated whole).
struct Workload {
  std::vector<Instance> cases;
};

inline Workload build_workload(const Config& c, const ExperimentSetup& s) {
  const std::string source = c.str("instance", "synthetic");
  Workload w;
  if (source == "hard-gfq" || source == "hard-pf") {
    const double delta = c.num("delta", 0.1);
    const InstanceFamily f = source == "hard-gfq" ? gen_hard_gfq(s.params, delta) : gen_hard_pf(s.params, delta);
    for (std::size_t k = 0; k < f.prefix_ends.size(); ++k) w.cases.push_back(f.prefix(k));
  } else if (source == "synthetic") {
    const auto n = static_cast<std::size_t>(c.integer("instances", 1));
    const auto t = static_cast<std::size_t>(c.integer("T", 10L * s.params.budget));
    const LabelModel model = LabelModel::parse(c.str("label_model", "single-uniform"));
    for (std::size_t i = 0; i < n; ++i) w.cases.push_back(gen_synthetic(s.params, t, derive_seed(s.seed, i), model));
  } else if (source == "file") {
    auto f = read_instance_file(c.str("path"));
    w.cases.push_back(std::move(f.instance));
  } else if (source == "trace") {
    ColumnMap cols;
    cols.label = c.str("label_column", "class");
    if (c.has("value_column")) cols.value = c.str("value_column");
    if (c.has("units_column")) cols.units = c.str("units_column");
    cols.scale = c.num("value_scale", 1.0);
    cols.offset = c.num("value_offset", 0.0);
    cols.skip_bad = c.boolean("skip_bad", false);
    cols.seed = s.seed;
    w.cases.push_back(ingest_trace_file(c.str("path"), cols, s.params).instance);
  } else {
    throw InvariantError("unknown instance source '" + source + "'");
  }
  return w;
}

namespace detail {

inline std::string config_header(const Config& c) {
  std::ostringstream os;
  std::istringstream in(c.dump());
  std::string line;
  while (std::getline(in, line)) os << "# " << line << '\n';
  return os.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& body, ExperimentResult& r) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path.string());
  out << body;
  r.files.push_back(path.string());
}

inline std::vector<std::pair<double, double>> empirical_cdf(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i < xs.size(); ++i) out.emplace_back(xs[i], static_cast<double>(i + 1) / xs.size());
  return out;
}

}  // namespace detail

inline std::vector<CrRow> run_cr(const ExperimentSetup& s, const Workload& w) {
  std::vector<CrRow> rows(s.policies.size() * w.cases.size());
  parallel_for(w.cases.size(), [&](std::size_t ci) {
    const Instance& inst = w.cases[ci];
    const bool quotas = s.settings.spec.total() > 0;
    const double opt = quotas ? offline_opt_gfq_clipped(inst, s.settings.spec).value : offline_opt(inst).value;
    for (std::size_t pi = 0; pi < s.policies.size(); ++pi) {
      PolicySettings ps = s.settings;
      ps.seed = derive_seed(s.seed, ci);
      const PolicyHandle h = make_policy(s.policies[pi], inst, ps);
      const McResult mc = mc_expectation(h.run, inst, h.randomized ? s.trials : 1, derive_seed(s.seed ^ 0x5eedULL, ci));
      CrRow& r = rows[pi * w.cases.size() + ci];
      r.policy = s.policies[pi];
      r.case_index = ci;
      r.prefix = inst.size();
      r.opt = opt;
      r.mean_alg = mc.mean_value;
      r.stderr_alg = mc.stderr_value;
      r.ratio = empirical_ratio(opt, mc.mean_value);
    }
  }, 1);
  return rows;
}

inline std::vector<UtilityRow> run_utilities(const ExperimentSetup& s, const Instance& inst) {
  std::vector<UtilityRow> rows;
  for (const auto& id : s.policies) {
    const PolicyHandle h = make_policy(id, inst, s.settings);
    const std::size_t trials = h.randomized ? s.trials : 1;
    const McResult mc = mc_expectation(h.run, inst, trials, s.seed);
    // Units per class from a second pass with the same seeds.
    std::vector<double> units(static_cast<std::size_t>(inst.params.num_classes), 0.0);
    for (std::size_t i = 0; i < trials; ++i) {
      Rng rng(derive_seed(s.seed, i));
      const auto c = class_counts(inst, h.run(inst, rng));
      for (std::size_t j = 0; j < c.size(); ++j) units[j] += c[j] / static_cast<double>(trials);
    }
    for (ClassId j = 1; j <= inst.params.num_classes; ++j) {
      const auto k = static_cast<std::size_t>(j - 1);
      rows.push_back({id, j, mc.mean_utilities[k], mc.stderr_utilities[k], units[k]});
    }
  }
  return rows;
}

inline std::vector<FairnessRow> run_fairness_xi(const ExperimentSetup& s, const Instance& inst,
                                                const std::vector<double>& xis, const std::vector<double>& epsilons) {
  const double beta = alpha_beta(0.0, inst.params).beta;
  const Allocation ref =
      s.settings.advice_reference == "opt" ? offline_opt(inst).alloc : nash_greedy_allocation(inst);
  std::vector<FairnessRow> rows;
  for (std::size_t xi_i = 0; xi_i < xis.size(); ++xi_i) {
    const AdviceStream adv = make_advice_pf(inst, xis[xi_i], derive_seed(s.seed, xi_i), &ref);
    for (double eps : epsilons) {
      const RandomizedPolicy pol = [&](const Instance& in, Rng& rng) { return run_lila_pf(in, eps, adv, rng).alloc; };
      const McResult mc = mc_expectation(pol, inst, s.trials, derive_seed(s.seed, 1000 + xi_i));
      rows.push_back({xis[xi_i], eps, compute_rho(eps, beta), empirical_pf_from_utilities(inst, mc.mean_utilities)});
    }
  }
  return rows;
}

inline std::string cr_csv(const Config& c, const std::vector<CrRow>& rows) {
  std::ostringstream os;
  os << detail::config_header(c) << "policy,case,prefix,opt,mean_alg,stderr,ratio\n" << std::setprecision(12);
  for (const auto& r : rows)
    os << r.policy << ',' << r.case_index << ',' << r.prefix << ',' << r.opt << ',' << r.mean_alg << ','
       << r.stderr_alg << ',' << r.ratio << '\n';
  return os.str();
}

inline ExperimentResult run_experiment(const Config& c, const std::filesystem::path& out_dir) {
  const ExperimentSetup s = read_setup(c);
  ExperimentResult res;
  res.kind = c.str("experiment", "cr");
  std::filesystem::create_directories(out_dir);
  const std::string header = detail::config_header(c);

  if (res.kind == "cr") {
    const Workload w = build_workload(c, s);
    res.cr = run_cr(s, w);
    detail::write_file(out_dir / "cr.csv", cr_csv(c, res.cr), res);

    std::ostringstream cdf;
    cdf << header << "policy,ratio,cdf\n" << std::setprecision(12);
    Chart chart{"Empirical competitive ratio CDF", "OPT / E[ALG]", "fraction of cases", {}, c.dump()};
    for (const auto& pol : s.policies) {
      std::vector<double> ratios;
      for (const auto& r : res.cr)
        if (r.policy == pol) ratios.push_back(r.ratio);
      Series ser{pol, {}, {}, true};
      for (const auto& [x, f] : detail::empirical_cdf(ratios)) {
        cdf << pol << ',' << x << ',' << f << '\n';
        ser.x.push_back(x);
        ser.y.push_back(f);
      }
      chart.series.push_back(std::move(ser));
    }
    detail::write_file(out_dir / "cdf.csv", cdf.str(), res);
    detail::write_file(out_dir / "cdf.svg", render_svg(chart), res);
  } else if (res.kind == "utilities") {
    const Workload w = build_workload(c, s);
    if (w.cases.empty()) throw InvariantError("utilities experiment needs an instance");
    res.utilities = run_utilities(s, w.cases.front());
    std::ostringstream os;
    os << header << "policy,class,mean_utility,stderr,mean_units\n" << std::setprecision(12);
    Chart chart{"Per-class utility", "class", "mean utility", {}, c.dump()};
    for (const auto& pol : s.policies) {
      Series ser{pol, {}, {}, false};
      for (const auto& r : res.utilities) {
        if (r.policy != pol) continue;
        os << r.policy << ',' << r.cls << ',' << r.mean_utility << ',' << r.stderr_utility << ',' << r.mean_units << '\n';
        ser.x.push_back(r.cls);
        ser.y.push_back(r.mean_utility);
      }
      chart.series.push_back(std::move(ser));
    }
    detail::write_file(out_dir / "utilities.csv", os.str(), res);
    detail::write_file(out_dir / "utilities.svg", render_svg(chart), res);
  } else if (res.kind == "fairness-xi") {
    const Workload w = build_workload(c, s);
    if (w.cases.empty()) throw InvariantError("fairness-xi experiment needs an instance");
    const auto xis = c.num_list("xi_grid", {0.0, 0.25, 0.5, 0.75, 1.0});
    const auto beta = alpha_beta(0.0, s.params).beta;
    const auto eps = c.num_list("epsilon_grid", {0.25 * (beta - 1.0), 0.5 * (beta - 1.0), beta - 1.0});
    res.fairness = run_fairness_xi(s, w.cases.front(), xis, eps);
    std::ostringstream os;
    os << header << "xi,epsilon,rho,empirical_pf\n" << std::setprecision(12);
    Chart chart{"Fairness vs adversarial probability", "xi", "empirical PF ratio", {}, c.dump()};
    for (double e : eps) {
      std::ostringstream name;
      name << "eps=" << std::setprecision(3) << e;
      Series ser{name.str(), {}, {}, false};
      for (const auto& r : res.fairness) {
        if (r.epsilon != e) continue;
        ser.x.push_back(r.xi);
        ser.y.push_back(r.empirical_pf);
      }
      chart.series.push_back(std::move(ser));
    }
    for (const auto& r : res.fairness) os << r.xi << ',' << r.epsilon << ',' << r.rho << ',' << r.empirical_pf << '\n';
    detail::write_file(out_dir / "fairness.csv", os.str(), res);
    detail::write_file(out_dir / "fairness.svg", render_svg(chart), res);
  } else {
    throw InvariantError("unknown experiment '" + res.kind + "' (expected cr, utilities or fairness-xi)");
  }
  return res;
}

}  // namespace omcs
