#pragma once

// Domain types for online multi-class selection and the metrics shared by
// every policy: per-class utility, quota satisfaction and the empirical
// proportional-fairness ratio.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "omcs/error.hpp"

namespace omcs {

// Absolute tolerance for real comparisons.
inline constexpr double kTol = 1e-9;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Class indices are 1-based everywhere in the public API.
using ClassId = int;

struct Agent {
  double value = 1.0;
  std::vector<ClassId> labels;  // sorted, unique, each in [1, K]

  bool has_label(ClassId j) const {
    return std::binary_search(labels.begin(), labels.end(), j);
  }
};

struct ProblemParams {
  int budget = 1;                // B
  int num_classes = 1;           // K
  std::vector<double> theta;     // fluctuation ratios, nondecreasing, each >= 1

  // theta for a 1-based class id; theta_0 := 1.
  double theta_of(ClassId j) const { return j == 0 ? 1.0 : theta.at(static_cast<std::size_t>(j - 1)); }
  double theta_max() const { return theta.back(); }

  void validate() const {
    if (budget < 1) throw InvariantError("budget B must be >= 1");
    if (num_classes < 1) throw InvariantError("num_classes K must be >= 1");
    if (static_cast<int>(theta.size()) != num_classes)
      throw InvariantError("theta must have exactly K entries");
    for (std::size_t j = 0; j < theta.size(); ++j) {
      if (!(theta[j] >= 1.0) || !std::isfinite(theta[j]))
        throw InvariantError("theta_" + std::to_string(j + 1) + " must be a finite real >= 1");
      if (j > 0 && theta[j] < theta[j - 1])
        throw InvariantError("theta must be nondecreasing");
    }
  }
};

// Group fairness by quantity: class j must receive at least quotas[j-1] units.
struct GfqSpec {
  std::vector<int> quotas;

  int total() const { return std::accumulate(quotas.begin(), quotas.end(), 0); }
  int quota_of(ClassId j) const { return quotas.at(static_cast<std::size_t>(j - 1)); }
  int max_before(ClassId j) const {  // max_{i<j} m_i, 0 for j = 1
    int m = 0;
    for (ClassId i = 1; i < j; ++i) m = std::max(m, quota_of(i));
    return m;
  }

  static GfqSpec none(int num_classes) { return GfqSpec{std::vector<int>(static_cast<std::size_t>(num_classes), 0)}; }

  void validate(const ProblemParams& params) const {
    if (static_cast<int>(quotas.size()) != params.num_classes)
      throw InvariantError("quotas must have exactly K entries");
    for (int m : quotas)
      if (m < 0) throw InvariantError("quotas must be nonnegative");
    if (total() > params.budget)
      throw InfeasibleError("sum of quotas M=" + std::to_string(total()) +
                            " exceeds budget B=" + std::to_string(params.budget));
  }
};

// Throws InvariantError describing why `agent` is invalid under `params`.
inline void validate_agent(const Agent& agent, const ProblemParams& params, std::size_t index) {
  const auto where = "agent " + std::to_string(index) + ": ";
  if (agent.labels.empty()) throw InvariantError(where + "label set is empty");
  for (std::size_t k = 0; k < agent.labels.size(); ++k) {
    const ClassId j = agent.labels[k];
    if (j < 1 || j > params.num_classes)
      throw InvariantError(where + "unknown class index " + std::to_string(j));
    if (k > 0 && agent.labels[k - 1] >= j)
      throw InvariantError(where + "labels must be sorted and unique");
  }
  double cap = kInf;
  for (ClassId j : agent.labels) cap = std::min(cap, params.theta_of(j));
  if (!std::isfinite(agent.value) || agent.value < 1.0 - kTol || agent.value > cap + kTol)
    throw InvariantError(where + "value " + std::to_string(agent.value) + " outside [1, " +
                         std::to_string(cap) + "]");
}

// Sorts and deduplicates a label list in place.
inline std::vector<ClassId> normalize_labels(std::vector<ClassId> labels) {
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  return labels;
}

struct Instance {
  ProblemParams params;
  std::vector<Agent> agents;

  std::size_t size() const { return agents.size(); }

  void validate() const {
    params.validate();
    for (std::size_t t = 0; t < agents.size(); ++t) validate_agent(agents[t], params, t);
  }

  // First `n` arrivals as their own instance.
  Instance prefix(std::size_t n) const {
    Instance out{params, {}};
    out.agents.assign(agents.begin(), agents.begin() + static_cast<std::ptrdiff_t>(std::min(n, agents.size())));
    return out;
  }
};

struct Allocation {
  std::vector<double> decisions;
  bool integral = false;

  std::size_t size() const { return decisions.size(); }
  double count() const { return std::accumulate(decisions.begin(), decisions.end(), 0.0); }

  static Allocation zeros(std::size_t n, bool integral = true) {
    return Allocation{std::vector<double>(n, 0.0), integral};
  }

  void validate(int budget) const {
    for (std::size_t t = 0; t < decisions.size(); ++t) {
      const double x = decisions[t];
      if (integral ? (x != 0.0 && x != 1.0) : !(x >= -kTol && x <= 1.0 + kTol))
        throw InvariantError("decision " + std::to_string(t) + " out of range: " + std::to_string(x));
    }
    const double used = count();
    if (integral ? used > budget : used > budget + kTol)
      throw InvariantError("allocation uses " + std::to_string(used) + " units, budget is " +
                           std::to_string(budget));
  }
};

inline void check_aligned(const Instance& instance, const Allocation& alloc) {
  if (alloc.size() != instance.size())
    throw AlignmentError("allocation has " + std::to_string(alloc.size()) + " decisions, instance has " +
                         std::to_string(instance.size()) + " agents");
}

// Total utility sum_t v_t x_t.
inline double total_value(const Instance& instance, const Allocation& alloc) {
  check_aligned(instance, alloc);
  double s = 0.0;
  for (std::size_t t = 0; t < instance.size(); ++t) s += instance.agents[t].value * alloc.decisions[t];
  return s;
}

// U_j = sum_t v_t x_t 1{j in labels_t}; index j-1 holds class j.
inline std::vector<double> class_utilities(const Instance& instance, const Allocation& alloc) {
  check_aligned(instance, alloc);
  std::vector<double> u(static_cast<std::size_t>(instance.params.num_classes), 0.0);
  for (std::size_t t = 0; t < instance.size(); ++t) {
    const double x = alloc.decisions[t];
    if (x == 0.0) continue;
    for (ClassId j : instance.agents[t].labels) u[static_cast<std::size_t>(j - 1)] += instance.agents[t].value * x;
  }
  return u;
}

// Per-class allocated quantity sum_t x_t 1{j in labels_t}.
inline std::vector<double> class_counts(const Instance& instance, const Allocation& alloc) {
  check_aligned(instance, alloc);
  std::vector<double> c(static_cast<std::size_t>(instance.params.num_classes), 0.0);
  for (std::size_t t = 0; t < instance.size(); ++t)
    for (ClassId j : instance.agents[t].labels) c[static_cast<std::size_t>(j - 1)] += alloc.decisions[t];
  return c;
}

inline bool gfq_satisfied(const Instance& instance, const Allocation& alloc, const GfqSpec& spec) {
  const auto counts = class_counts(instance, alloc);
  for (std::size_t j = 0; j < counts.size(); ++j)
    if (counts[j] + kTol < static_cast<double>(spec.quotas.at(j))) return false;
  return true;
}

// Empirical proportional-fairness ratio of an allocation whose per-class
// utilities are `utilities`:
//   max over w in [0,1]^T, sum w <= B of (1/K) sum_j U_j(w) / U_j
// The objective is linear in w, so the maximum takes the B largest
// coefficients c_t = v_t sum_{j in labels_t} 1/U_j. A class with U_j = 0
// contributes +inf if some agent carries label j, otherwise 0 (0/0 = 0).
inline double empirical_pf_from_utilities(const Instance& instance, std::span<const double> utilities) {
  const auto& p = instance.params;
  if (static_cast<int>(utilities.size()) != p.num_classes)
    throw AlignmentError("expected K per-class utilities");
  std::vector<double> coef;
  coef.reserve(instance.size());
  for (const Agent& a : instance.agents) {
    double c = 0.0;
    for (ClassId j : a.labels) {
      const double u = utilities[static_cast<std::size_t>(j - 1)];
      if (u <= 0.0) return kInf;  // reachable class with zero utility
      c += a.value / u;
    }
    coef.push_back(c);
  }
  const auto take = std::min<std::size_t>(coef.size(), static_cast<std::size_t>(p.budget));
  std::partial_sort(coef.begin(), coef.begin() + static_cast<std::ptrdiff_t>(take), coef.end(), std::greater<>());
  double s = 0.0;
  for (std::size_t k = 0; k < take; ++k) s += coef[k];
  return s / p.num_classes;
}

inline double empirical_pf(const Instance& instance, const Allocation& alloc) {
  const auto u = class_utilities(instance, alloc);
  return empirical_pf_from_utilities(instance, u);
}

}  // namespace omcs
