#pragma once

// Learning-augmented wrappers: each arrival gets a robust decision and an
// advice decision, and the advice is followed with probability rho.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "omcs/error.hpp"
#include "omcs/frac_gfq.hpp"
#include "omcs/model.hpp"
#include "omcs/oracles.hpp"
#include "omcs/pf_setaside.hpp"
#include "omcs/rng.hpp"

namespace omcs {

// rho = (bound/(1+eps) - 1) / (bound - 1) for eps in [0, bound - 1].
inline double compute_rho(double epsilon, double bound) {
  if (!(bound > 1.0)) throw InvariantError("compute_rho: bound must exceed 1");
  if (!(epsilon >= 0.0 && epsilon <= bound - 1.0 + 1e-12))
    throw InvariantError("epsilon " + std::to_string(epsilon) + " outside [0, " + std::to_string(bound - 1.0) + "]");
  if (epsilon == 0.0) return 1.0;
  if (epsilon >= bound - 1.0) return 0.0;
  return std::clamp((bound / (1.0 + epsilon) - 1.0) / (bound - 1.0), 0.0, 1.0);
}

enum class AdviceKind { perfect, adversarial_mixture, external };

struct AdviceStream {
  std::vector<int> decisions;
  AdviceKind kind = AdviceKind::external;
  double xi = 0.0;

  Allocation as_allocation() const {
    Allocation a = Allocation::zeros(decisions.size());
    for (std::size_t t = 0; t < decisions.size(); ++t) a.decisions[t] = decisions[t];
    return a;
  }
};

inline void write_advice(std::ostream& out, const AdviceStream& advice) {
  for (int x : advice.decisions) out << nlohmann::json{{"x", x}}.dump() << '\n';
}

inline AdviceStream read_advice(std::istream& in) {
  AdviceStream a;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    int x;
    try {
      x = nlohmann::json::parse(line).at("x").get<int>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("advice line " + std::to_string(line_no) + ": " + e.what());
    }
    if (x != 0 && x != 1) throw ParseError("advice line " + std::to_string(line_no) + ": x must be 0 or 1");
    a.decisions.push_back(x);
  }
  return a;
}

inline AdviceStream read_advice_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  return read_advice(in);
}

// Greedy Nash-welfare allocation: seeds every reachable class with its best
// agent, then repeatedly adds the agent with the largest gain in
// sum_j log U_j. A fair reference allocation for advice experiments.
inline Allocation nash_greedy_allocation(const Instance& instance) {
  const auto k = static_cast<std::size_t>(instance.params.num_classes);
  const std::size_t n = instance.size();
  Allocation alloc = Allocation::zeros(n);
  std::vector<double> u(k, 0.0);
  int left = instance.params.budget;
  auto take = [&](std::size_t t) {
    alloc.decisions[t] = 1.0;
    for (ClassId j : instance.agents[t].labels) u[static_cast<std::size_t>(j - 1)] += instance.agents[t].value;
    --left;
  };
  for (ClassId j = 1; j <= instance.params.num_classes && left > 0; ++j) {
    if (u[static_cast<std::size_t>(j - 1)] > 0.0) continue;
    std::size_t best = n;
    for (std::size_t t = 0; t < n; ++t)
      if (alloc.decisions[t] == 0.0 && instance.agents[t].has_label(j) &&
          (best == n || instance.agents[t].value > instance.agents[best].value))
        best = t;
    if (best != n) take(best);
  }
  while (left > 0) {
    std::size_t best = n;
    double best_gain = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      if (alloc.decisions[t] != 0.0) continue;
      double g = 0.0;
      for (ClassId j : instance.agents[t].labels) {
        const double uj = u[static_cast<std::size_t>(j - 1)];
        g += uj > 0.0 ? std::log1p(instance.agents[t].value / uj) : kInf;
      }
      if (best == n || g > best_gain) {
        best = t;
        best_gain = g;
      }
    }
    if (best == n) break;
    take(best);
  }
  return alloc;
}

// Per-agent mixture of a reference allocation (kept with probability 1 - xi)
// and the all-zero allocation.
inline AdviceStream make_advice_pf(const Instance& instance, double xi, std::uint64_t seed,
                                   const Allocation* reference = nullptr) {
  if (!(xi >= 0.0 && xi <= 1.0)) throw InvariantError("xi must lie in [0, 1]");
  const Allocation best = reference ? *reference : offline_opt(instance).alloc;
  check_aligned(instance, best);
  const Allocation worst = worst_allocation(instance);
  Rng rng(derive_seed(seed, 0x61647669ULL));
  AdviceStream a;
  a.kind = xi == 0.0 ? AdviceKind::perfect : AdviceKind::adversarial_mixture;
  a.xi = xi;
  for (std::size_t t = 0; t < instance.size(); ++t)
    a.decisions.push_back(static_cast<int>(bernoulli(rng, xi) ? worst.decisions[t] : best.decisions[t]));
  return a;
}

// Quota-feasible advice: the same mixture between the constrained optimum
// and the cheapest feasible allocation, then repaired. Missing quota units
// go to the earliest eligible agents; if the mixture overshoots B, the
// latest accepted agents that no quota depends on are dropped.
inline AdviceStream make_advice_gfq(const Instance& instance, const GfqSpec& spec, double xi, std::uint64_t seed) {
  if (!(xi >= 0.0 && xi <= 1.0)) throw InvariantError("xi must lie in [0, 1]");
  const Allocation best = offline_opt_gfq(instance, spec).alloc;
  const Allocation worst = worst_feasible_gfq(instance, spec);
  Rng rng(derive_seed(seed, 0x61647669ULL));
  AdviceStream a;
  a.kind = xi == 0.0 ? AdviceKind::perfect : AdviceKind::adversarial_mixture;
  a.xi = xi;
  for (std::size_t t = 0; t < instance.size(); ++t)
    a.decisions.push_back(static_cast<int>(bernoulli(rng, xi) ? worst.decisions[t] : best.decisions[t]));

  const auto k = static_cast<std::size_t>(instance.params.num_classes);
  std::vector<int> have(k, 0);
  for (std::size_t t = 0; t < instance.size(); ++t)
    if (a.decisions[t])
      for (ClassId j : instance.agents[t].labels) ++have[static_cast<std::size_t>(j - 1)];
  for (std::size_t t = 0; t < instance.size(); ++t) {
    if (a.decisions[t]) continue;
    bool helps = false;
    for (ClassId j : instance.agents[t].labels) helps |= have[static_cast<std::size_t>(j - 1)] < spec.quota_of(j);
    if (!helps) continue;
    a.decisions[t] = 1;
    for (ClassId j : instance.agents[t].labels) ++have[static_cast<std::size_t>(j - 1)];
  }
  int count = 0;
  for (int x : a.decisions) count += x;
  for (std::size_t t = instance.size(); t-- > 0 && count > instance.params.budget;) {
    if (!a.decisions[t]) continue;
    bool needed = false;
    for (ClassId j : instance.agents[t].labels) needed |= have[static_cast<std::size_t>(j - 1)] <= spec.quota_of(j);
    if (needed) continue;
    a.decisions[t] = 0;
    --count;
    for (ClassId j : instance.agents[t].labels) --have[static_cast<std::size_t>(j - 1)];
  }
  if (count > instance.params.budget) throw InfeasibleError("advice repair cannot fit quotas within budget");
  return a;
}

// How the advice/robust coin is drawn: once per arrival, or once per run.
enum class MixMode { per_step, per_run };

struct LilaRun {
  Allocation alloc;
  int truncated = 0;     // mixed acceptances rejected by the budget guard
  int from_advice = 0;   // arrivals whose emitted decision came from the advice
};

// Emits advice with probability rho, else the robust decision.
template <class Urbg>
int lila_step(int robust, int advice, double rho, Urbg& rng) {
  return bernoulli(rng, rho) ? advice : robust;
}

namespace detail {

template <class Robust, class Urbg>
LilaRun mix_streams(const Instance& instance, const AdviceStream& advice, double rho, MixMode mode, Robust&& robust,
                    Urbg& rng) {
  if (advice.decisions.size() != instance.size())
    throw AlignmentError("advice has " + std::to_string(advice.decisions.size()) + " decisions, instance has " +
                         std::to_string(instance.size()) + " agents");
  LilaRun run{Allocation::zeros(instance.size()), 0, 0};
  const bool run_coin = mode == MixMode::per_run ? bernoulli(rng, rho) : false;
  int used = 0;
  for (std::size_t t = 0; t < instance.size(); ++t) {
    // The robust policy advances on its own decision whatever is emitted.
    const int r = robust(instance.agents[t]);
    const bool follow = mode == MixMode::per_run ? run_coin : bernoulli(rng, rho);
    int x = follow ? advice.decisions[t] : r;
    run.from_advice += follow;
    if (x && used >= instance.params.budget) {
      x = 0;
      ++run.truncated;
    }
    used += x;
    run.alloc.decisions[t] = x;
  }
  return run;
}

}  // namespace detail

// Proportional-fairness variant; the robust track is the set-aside policy
// with b = 0 and rho uses beta(0).
template <class Urbg>
LilaRun run_lila_pf(const Instance& instance, double epsilon, const AdviceStream& advice, Urbg& rng,
                    MixMode mode = MixMode::per_step) {
  const PfConfig cfg = PfConfig::build(instance.params, 0.0);
  const double rho = compute_rho(epsilon, alpha_beta(0.0, instance.params).beta);
  Urbg robust_rng(rng());
  PfSetAside robust(cfg);
  return detail::mix_streams(instance, advice, rho, mode,
                             [&](const Agent& a) { return robust.step(a, robust_rng).integral; }, rng);
}

// Quota variant; the robust track is the randomized set-aside policy and rho
// uses its fractional ratio. Per-run mixing keeps every sample path
// quota-feasible, since each of the two streams is.
template <class Urbg>
LilaRun run_lila_gfq(const Instance& instance, const GfqSpec& spec, double epsilon, const AdviceStream& advice,
                     Urbg& rng, MixMode mode = MixMode::per_run) {
  const FracThreshold phi = build_frac_threshold(instance.params, spec);
  const double rho = compute_rho(epsilon, phi.alpha);
  Urbg robust_rng(rng());
  RSetAside robust(instance.params, spec, phi);
  return detail::mix_streams(instance, advice, rho, mode, [&](const Agent& a) { return robust.step(a, robust_rng); },
                             rng);
}

// Robustness bound of the quota variant:
//   (1+eps)(alpha-1) / (eps + (alpha-1-eps) M / (C_K theta_K + D_K)).
inline double lila_gfq_robustness_bound(const ProblemParams& params, const GfqSpec& spec, double epsilon) {
  const auto k = GfqConstants::build(params, spec);
  const double alpha = build_frac_threshold(params, spec).alpha;
  const double denom_scale = k.C.back() * params.theta_max() + k.D.back();
  return (1.0 + epsilon) * (alpha - 1.0) / (epsilon + (alpha - 1.0 - epsilon) * spec.total() / denom_scale);
}

}  // namespace omcs
