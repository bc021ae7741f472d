#pragma once

// Offline ground truth: the utility-maximizing allocation with and without
// quotas, the cheapest quota-feasible allocation, and a Monte Carlo driver
// for randomized policies.
//
// Quota-constrained problems are solved exactly. Up to kExhaustiveLimit
// arrivals every subset is enumerated. Beyond that, agents are grouped by
// label set: within a group only the best (or cheapest) members are ever
// worth choosing, and an optimal allocation is always a minimal quota
// cover plus the best remaining agents. A minimal cover takes at most
// max_{j in S} m_j agents from group S, so enumerating per-group cover
// counts is exact and small for the class counts used here.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <vector>

#include "omcs/error.hpp"
#include "omcs/model.hpp"
#include "omcs/parallel.hpp"
#include "omcs/rng.hpp"

namespace omcs {

inline constexpr std::size_t kExhaustiveLimit = 20;

struct OptResult {
  double value = 0.0;
  Allocation alloc;
};

// Sum of the B largest valuations; ties go to the earliest arrival.
inline OptResult offline_opt(const Instance& instance) {
  const std::size_t n = instance.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return instance.agents[a].value > instance.agents[b].value;
  });
  OptResult r{0.0, Allocation::zeros(n)};
  const auto take = std::min<std::size_t>(n, static_cast<std::size_t>(instance.params.budget));
  for (std::size_t k = 0; k < take; ++k) r.alloc.decisions[order[k]] = 1.0;
  // Sum in arrival order so equal allocations give bit-identical values.
  r.value = total_value(instance, r.alloc);
  return r;
}

// The advice model's "worst" allocation without quotas: accept nobody.
inline Allocation worst_allocation(const Instance& instance) { return Allocation::zeros(instance.size()); }

namespace detail {

inline void require_coverable(const Instance& instance, const GfqSpec& spec) {
  spec.validate(instance.params);
  for (ClassId j = 1; j <= instance.params.num_classes; ++j) {
    const auto have = std::count_if(instance.agents.begin(), instance.agents.end(),
                                    [j](const Agent& a) { return a.has_label(j); });
    if (have < spec.quota_of(j))
      throw InfeasibleError("class " + std::to_string(j) + " needs " + std::to_string(spec.quota_of(j)) +
                            " units but only " + std::to_string(have) + " agents carry its label");
  }
}

enum class Sense { maximize, minimize };

// Subset enumeration with budget and remaining-coverage pruning.
class ExhaustiveGfq {
 public:
  ExhaustiveGfq(const Instance& instance, const GfqSpec& spec, Sense sense)
      : inst_(instance), spec_(spec), sense_(sense), n_(instance.size()),
        need_(spec.quotas), remaining_(n_ + 1, std::vector<int>(spec.quotas.size(), 0)),
        chosen_(n_, 0) {
    for (std::size_t t = n_; t-- > 0;) {
      remaining_[t] = remaining_[t + 1];
      for (ClassId j : inst_.agents[t].labels) ++remaining_[t][static_cast<std::size_t>(j - 1)];
    }
  }

  OptResult solve() {
    dfs(0, 0, 0.0);
    if (!found_) throw InfeasibleError("no quota-feasible allocation within budget");
    OptResult r{0.0, Allocation::zeros(n_)};
    for (std::size_t t = 0; t < n_; ++t) r.alloc.decisions[t] = best_[t];
    r.value = total_value(inst_, r.alloc);
    return r;
  }

 private:
  bool covered() const {
    return std::all_of(need_.begin(), need_.end(), [](int k) { return k <= 0; });
  }

  void dfs(std::size_t t, int used, double value) {
    for (std::size_t j = 0; j < need_.size(); ++j)
      if (need_[j] > remaining_[t][j]) return;
    if (t == n_) {
      if (!covered()) return;
      const bool better = !found_ || (sense_ == Sense::maximize ? value > best_value_ : value < best_value_);
      if (better) {
        found_ = true;
        best_value_ = value;
        best_ = chosen_;
      }
      return;
    }
    const Agent& a = inst_.agents[t];
    // Include first so ties resolve toward earlier arrivals.
    const bool include_first = sense_ == Sense::maximize;
    for (int pass = 0; pass < 2; ++pass) {
      const bool include = (pass == 0) == include_first;
      if (include) {
        if (used >= inst_.params.budget) continue;
        chosen_[t] = 1;
        for (ClassId j : a.labels) --need_[static_cast<std::size_t>(j - 1)];
        dfs(t + 1, used + 1, value + a.value);
        for (ClassId j : a.labels) ++need_[static_cast<std::size_t>(j - 1)];
        chosen_[t] = 0;
      } else {
        dfs(t + 1, used, value);
      }
    }
  }

  const Instance& inst_;
  const GfqSpec& spec_;
  Sense sense_;
  std::size_t n_;
  std::vector<int> need_;
  std::vector<std::vector<int>> remaining_;
  std::vector<char> chosen_;
  std::vector<char> best_;
  double best_value_ = 0.0;
  bool found_ = false;
};

// Exact solver over per-label-set cover counts.
class GroupedGfq {
 public:
  static constexpr std::uint64_t kNodeLimit = 20'000'000;

  GroupedGfq(const Instance& instance, const GfqSpec& spec, Sense sense)
      : inst_(instance), spec_(spec), sense_(sense) {
    std::map<std::vector<ClassId>, std::size_t> index;
    for (std::size_t t = 0; t < inst_.size(); ++t) {
      const auto& labels = inst_.agents[t].labels;
      auto [it, inserted] = index.try_emplace(labels, groups_.size());
      if (inserted) groups_.push_back(Group{labels, {}, 0});
      groups_[it->second].members.push_back(t);
    }
    for (auto& g : groups_) {
      std::stable_sort(g.members.begin(), g.members.end(), [&](std::size_t a, std::size_t b) {
        const double va = inst_.agents[a].value, vb = inst_.agents[b].value;
        return sense_ == Sense::maximize ? va > vb : va < vb;
      });
      int cap = 0;
      for (ClassId j : g.labels) cap = std::max(cap, spec_.quota_of(j));
      g.cover_cap = std::min<std::size_t>(g.members.size(), static_cast<std::size_t>(cap));
    }
    counts_.assign(groups_.size(), 0);
    need_ = spec_.quotas;
    budget_ = inst_.params.budget;
    cover_limit_ = std::min(budget_, spec_.total());
  }

  OptResult solve() {
    dfs(0, 0);
    if (!found_) throw InfeasibleError("no quota-feasible allocation within budget");
    OptResult r{0.0, Allocation::zeros(inst_.size())};
    materialize(best_counts_, r.alloc);
    r.value = total_value(inst_, r.alloc);
    return r;
  }

 private:
  struct Group {
    std::vector<ClassId> labels;
    std::vector<std::size_t> members;  // best first
    std::size_t cover_cap;
  };

  void dfs(std::size_t g, int used) {
    if (++nodes_ > kNodeLimit) throw SolverError("quota oracle search exceeded node limit");
    if (g == groups_.size()) {
      if (std::any_of(need_.begin(), need_.end(), [](int k) { return k > 0; })) return;
      const double v = evaluate(used);
      const bool better = !found_ || (sense_ == Sense::maximize ? v > best_value_ : v < best_value_);
      if (better) {
        found_ = true;
        best_value_ = v;
        best_counts_ = counts_;
      }
      return;
    }
    const Group& grp = groups_[g];
    for (std::size_t f = 0; f <= grp.cover_cap && used + static_cast<int>(f) <= cover_limit_; ++f) {
      counts_[g] = f;
      for (ClassId j : grp.labels) need_[static_cast<std::size_t>(j - 1)] -= static_cast<int>(f);
      dfs(g + 1, used + static_cast<int>(f));
      for (ClassId j : grp.labels) need_[static_cast<std::size_t>(j - 1)] += static_cast<int>(f);
    }
    counts_[g] = 0;
  }

  // Cover value plus, when maximizing, the best remaining agents up to B.
  double evaluate(int used) const {
    double v = 0.0;
    for (std::size_t g = 0; g < groups_.size(); ++g)
      for (std::size_t k = 0; k < counts_[g]; ++k) v += inst_.agents[groups_[g].members[k]].value;
    if (sense_ == Sense::minimize) return v;
    std::vector<std::size_t> pos(counts_);
    for (int left = budget_ - used; left > 0; --left) {
      std::size_t best_g = groups_.size();
      double best_v = -1.0;
      for (std::size_t g = 0; g < groups_.size(); ++g) {
        if (pos[g] >= groups_[g].members.size()) continue;
        const double cand = inst_.agents[groups_[g].members[pos[g]]].value;
        if (cand > best_v) {
          best_v = cand;
          best_g = g;
        }
      }
      if (best_g == groups_.size()) break;
      v += best_v;
      ++pos[best_g];
    }
    return v;
  }

  void materialize(const std::vector<std::size_t>& counts, Allocation& alloc) const {
    std::vector<std::size_t> pos(counts);
    int used = 0;
    for (std::size_t g = 0; g < groups_.size(); ++g)
      for (std::size_t k = 0; k < counts[g]; ++k, ++used) alloc.decisions[groups_[g].members[k]] = 1.0;
    if (sense_ == Sense::minimize) return;
    for (int left = budget_ - used; left > 0; --left) {
      std::size_t best_g = groups_.size();
      double best_v = -1.0;
      std::size_t best_t = 0;
      for (std::size_t g = 0; g < groups_.size(); ++g) {
        if (pos[g] >= groups_[g].members.size()) continue;
        const std::size_t t = groups_[g].members[pos[g]];
        const double cand = inst_.agents[t].value;
        if (cand > best_v || (cand == best_v && t < best_t)) {
          best_v = cand;
          best_g = g;
          best_t = t;
        }
      }
      if (best_g == groups_.size()) break;
      alloc.decisions[best_t] = 1.0;
      ++pos[best_g];
    }
  }

  const Instance& inst_;
  const GfqSpec& spec_;
  Sense sense_;
  std::vector<Group> groups_;
  std::vector<std::size_t> counts_, best_counts_;
  std::vector<int> need_;
  int budget_ = 0;
  int cover_limit_ = 0;
  std::uint64_t nodes_ = 0;
  double best_value_ = 0.0;
  bool found_ = false;
};

}  // namespace detail

// Exhaustive subset search; practical for T <= kExhaustiveLimit.
inline OptResult offline_opt_gfq_exhaustive(const Instance& instance, const GfqSpec& spec) {
  detail::require_coverable(instance, spec);
  return detail::ExhaustiveGfq(instance, spec, detail::Sense::maximize).solve();
}

inline OptResult offline_opt_gfq_grouped(const Instance& instance, const GfqSpec& spec) {
  detail::require_coverable(instance, spec);
  return detail::GroupedGfq(instance, spec, detail::Sense::maximize).solve();
}

// Maximum total value subject to the budget and every quota.
inline OptResult offline_opt_gfq(const Instance& instance, const GfqSpec& spec) {
  if (instance.size() <= kExhaustiveLimit) return offline_opt_gfq_exhaustive(instance, spec);
  return offline_opt_gfq_grouped(instance, spec);
}

// Constrained optimum on a stream that may be too short for the quotas:
// each quota is clipped to the number of arrivals carrying that label.
inline OptResult offline_opt_gfq_clipped(const Instance& instance, const GfqSpec& spec) {
  GfqSpec clipped = spec;
  for (ClassId j = 1; j <= instance.params.num_classes; ++j) {
    const auto have = std::count_if(instance.agents.begin(), instance.agents.end(),
                                    [j](const Agent& a) { return a.has_label(j); });
    auto& m = clipped.quotas[static_cast<std::size_t>(j - 1)];
    m = std::min<int>(m, static_cast<int>(have));
  }
  return offline_opt_gfq(instance, clipped);
}

inline Allocation worst_feasible_gfq_exhaustive(const Instance& instance, const GfqSpec& spec) {
  detail::require_coverable(instance, spec);
  return detail::ExhaustiveGfq(instance, spec, detail::Sense::minimize).solve().alloc;
}

// Greedy cheapest cover: repeatedly take the agent with the lowest value
// per still-unmet class it covers.
inline Allocation worst_feasible_gfq_greedy(const Instance& instance, const GfqSpec& spec) {
  detail::require_coverable(instance, spec);
  Allocation alloc = Allocation::zeros(instance.size());
  std::vector<int> need = spec.quotas;
  auto unmet = [&](const Agent& a) {
    int k = 0;
    for (ClassId j : a.labels) k += need[static_cast<std::size_t>(j - 1)] > 0;
    return k;
  };
  while (std::any_of(need.begin(), need.end(), [](int k) { return k > 0; })) {
    std::size_t best = instance.size();
    double best_cost = kInf;
    for (std::size_t t = 0; t < instance.size(); ++t) {
      if (alloc.decisions[t] != 0.0) continue;
      const int k = unmet(instance.agents[t]);
      if (k == 0) continue;
      const double cost = instance.agents[t].value / k;
      if (cost < best_cost) {
        best_cost = cost;
        best = t;
      }
    }
    if (best == instance.size()) throw InfeasibleError("greedy cover ran out of agents");
    alloc.decisions[best] = 1.0;
    for (ClassId j : instance.agents[best].labels) --need[static_cast<std::size_t>(j - 1)];
  }
  if (alloc.count() > instance.params.budget) throw InfeasibleError("greedy cover exceeds budget");
  return alloc;
}

// Quota-feasible integral allocation of minimum total value (no padding).
inline Allocation worst_feasible_gfq(const Instance& instance, const GfqSpec& spec) {
  if (instance.size() <= kExhaustiveLimit) return worst_feasible_gfq_exhaustive(instance, spec);
  detail::require_coverable(instance, spec);
  try {
    return detail::GroupedGfq(instance, spec, detail::Sense::minimize).solve().alloc;
  } catch (const SolverError&) {
    return worst_feasible_gfq_greedy(instance, spec);
  }
}

// A randomized policy run: maps an instance and a private engine to an allocation.
using RandomizedPolicy = std::function<Allocation(const Instance&, Rng&)>;

struct McResult {
  std::size_t trials = 0;
  double mean_value = 0.0;
  double stderr_value = 0.0;
  std::vector<double> mean_utilities;
  std::vector<double> stderr_utilities;
};

namespace detail {

// Mean and standard error of the mean from per-trial samples, summed in index order.
inline std::pair<double, double> mean_stderr(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

}  // namespace detail

// Runs `policy` `trials` times; trial i uses an engine seeded with
// derive_seed(seed, i). Deterministic in (policy, instance, trials, seed).
inline McResult mc_expectation(const RandomizedPolicy& policy, const Instance& instance, std::size_t trials,
                               std::uint64_t seed) {
  if (trials == 0) throw InvariantError("trials must be >= 1");
  const auto k = static_cast<std::size_t>(instance.params.num_classes);
  std::vector<double> values(trials);
  std::vector<std::vector<double>> utils(k, std::vector<double>(trials));
  parallel_for(trials, [&](std::size_t i) {
    Rng rng(derive_seed(seed, i));
    const Allocation a = policy(instance, rng);
    values[i] = total_value(instance, a);
    const auto u = class_utilities(instance, a);
    for (std::size_t j = 0; j < k; ++j) utils[j][i] = u[j];
  });
  McResult r;
  r.trials = trials;
  std::tie(r.mean_value, r.stderr_value) = detail::mean_stderr(values);
  for (std::size_t j = 0; j < k; ++j) {
    const auto [m, s] = detail::mean_stderr(utils[j]);
    r.mean_utilities.push_back(m);
    r.stderr_utilities.push_back(s);
  }
  return r;
}

struct PrefixMc {
  std::vector<double> mean;    // per prefix end
  std::vector<double> stderr_;
};

// Mean cumulative value at each prefix end. Online policies decide a prefix
// exactly as they decide the full stream, so one run per trial suffices.
inline PrefixMc mc_prefix_values(const RandomizedPolicy& policy, const Instance& instance,
                                 const std::vector<std::size_t>& prefix_ends, std::size_t trials,
                                 std::uint64_t seed) {
  if (trials == 0) throw InvariantError("trials must be >= 1");
  const std::size_t p = prefix_ends.size();
  std::vector<double> samples(trials * p);
  parallel_for(trials, [&](std::size_t i) {
    Rng rng(derive_seed(seed, i));
    const Allocation a = policy(instance, rng);
    double run = 0.0;
    std::size_t t = 0;
    for (std::size_t k = 0; k < p; ++k) {
      for (; t < prefix_ends[k]; ++t) run += instance.agents[t].value * a.decisions[t];
      samples[i * p + k] = run;
    }
  });
  PrefixMc out{std::vector<double>(p), std::vector<double>(p)};
  std::vector<double> column(trials);
  for (std::size_t k = 0; k < p; ++k) {
    for (std::size_t i = 0; i < trials; ++i) column[i] = samples[i * p + k];
    std::tie(out.mean[k], out.stderr_[k]) = detail::mean_stderr(column);
  }
  return out;
}

}  // namespace omcs
