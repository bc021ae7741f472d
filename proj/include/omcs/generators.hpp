#pragma once

// Adversarial and synthetic arrival streams.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "omcs/error.hpp"
#include "omcs/model.hpp"
#include "omcs/rng.hpp"

namespace omcs {

// A stream together with the arrival counts at which an adversary may stop.
struct InstanceFamily {
  Instance instance;
  std::vector<std::size_t> prefix_ends;

  Instance prefix(std::size_t k) const { return instance.prefix(prefix_ends.at(k)); }
};

namespace detail {

// 1, 1+delta, ... up to top, plus any extra points, sorted; points within
// 1e-9 of each other merge onto the extra point.
inline std::vector<double> value_levels(double delta, double top, const std::vector<double>& extras) {
  if (!(delta > 0.0)) throw InvariantError("step delta must be positive");
  std::vector<double> levels;
  for (long k = 0;; ++k) {
    const double v = 1.0 + static_cast<double>(k) * delta;
    if (v > top + 1e-9) break;
    levels.push_back(v);
  }
  for (double e : extras)
    if (e <= top + 1e-9) levels.push_back(e);
  std::sort(levels.begin(), levels.end());
  std::vector<double> out;
  for (double v : levels) {
    if (!out.empty() && v - out.back() <= 1e-9) {
      // Prefer the exact extra point (a theta) over the grid point.
      if (std::find(extras.begin(), extras.end(), v) != extras.end()) out.back() = v;
      continue;
    }
    out.push_back(v);
  }
  return out;
}

}  // namespace detail

// Non-decreasing quota-hard stream: at every level v, B copies of (v, {j})
// for each class with theta_j >= v, then B copies of (v, eligible set)
// while it still differs from the singletons or no class has dropped.
// The adversary may stop once a whole value level has arrived.
inline InstanceFamily gen_hard_gfq(const ProblemParams& params, double delta) {
  params.validate();
  InstanceFamily f;
  f.instance.params = params;
  const auto levels = detail::value_levels(delta, params.theta_max(), params.theta);
  auto block = [&](double v, std::vector<ClassId> labels) {
    for (int c = 0; c < params.budget; ++c) f.instance.agents.push_back(Agent{v, labels});
  };
  for (double v : levels) {
    std::vector<ClassId> eligible;
    for (ClassId j = 1; j <= params.num_classes; ++j)
      if (params.theta_of(j) >= v - 1e-9) eligible.push_back(j);
    for (ClassId j : eligible) block(std::min(v, params.theta_of(j)), {j});
    const bool none_dropped = static_cast<int>(eligible.size()) == params.num_classes;
    if (eligible.size() >= 2 || none_dropped) block(std::min(v, params.theta_of(eligible.front())), eligible);
    f.prefix_ends.push_back(f.instance.size());
  }
  return f;
}

// Class-by-class batches: class j sees values 1, 1+delta, ... <= theta_j,
// B copies per level; each level block ends a stopping prefix.
inline InstanceFamily gen_hard_pf(const ProblemParams& params, double delta) {
  params.validate();
  InstanceFamily f;
  f.instance.params = params;
  for (ClassId j = 1; j <= params.num_classes; ++j) {
    const double th = params.theta_of(j);
    for (double v : detail::value_levels(delta, th, {})) {
      for (int c = 0; c < params.budget; ++c) f.instance.agents.push_back(Agent{std::min(v, th), {j}});
      f.prefix_ends.push_back(f.instance.size());
    }
  }
  return f;
}

struct LabelModel {
  enum Kind { single_uniform, multi } kind = single_uniform;
  double p = 0.0;  // multi: chance of each extra label

  static LabelModel parse(const std::string& s) {
    if (s == "single" || s == "single-uniform") return {single_uniform, 0.0};
    if (s.rfind("multi", 0) == 0) {
      const auto open = s.find('('), close = s.find(')');
      double p = 0.5;
      if (open != std::string::npos && close != std::string::npos && close > open + 1) {
        try {
          p = std::stod(s.substr(open + 1, close - open - 1));
        } catch (const std::exception&) {
          throw ParseError("bad label model '" + s + "'");
        }
      }
      if (!(p >= 0.0 && p <= 1.0)) throw ParseError("label model probability must be in [0, 1]");
      return {multi, p};
    }
    throw ParseError("unknown label model '" + s + "' (expected single-uniform or multi(p))");
  }
};

// T agents with a uniform primary label, optional extra labels, and values
// uniform in [1, min theta over the labels].
inline Instance gen_synthetic(const ProblemParams& params, std::size_t count, std::uint64_t seed, LabelModel model) {
  params.validate();
  Instance inst{params, {}};
  Rng rng(derive_seed(seed, 0x73796e74ULL));
  const int k = params.num_classes;
  for (std::size_t t = 0; t < count; ++t) {
    Agent a;
    const ClassId primary = 1 + static_cast<ClassId>(uniform01(rng) * k);
    for (ClassId j = 1; j <= k; ++j) {
      const bool extra = model.kind == LabelModel::multi && j != primary && bernoulli(rng, model.p);
      if (j == primary || extra) a.labels.push_back(j);
    }
    double cap = kInf;
    for (ClassId j : a.labels) cap = std::min(cap, params.theta_of(j));
    a.value = 1.0 + uniform01(rng) * (cap - 1.0);
    inst.agents.push_back(std::move(a));
  }
  return inst;
}

}  // namespace omcs
