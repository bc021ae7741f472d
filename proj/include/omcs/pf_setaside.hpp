#pragma once

// Randomized set-aside for proportional fairness. Every class pair j <= i
// owns a reserved budget b_j with its own threshold, a global track with
// budget B*b serves efficiency, and the per-agent total is capped at one
// unit by water-filling across the agent's pair tracks before rounding.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "omcs/error.hpp"
#include "omcs/model.hpp"
#include "omcs/rounding.hpp"

namespace omcs {

struct AlphaBeta {
  double alpha;
  double beta;
};

namespace detail {

inline std::vector<double> class_alphas(const ProblemParams& p) {
  std::vector<double> a;
  for (double th : p.theta) a.push_back(1.0 + std::log(th));
  return a;
}

// S = sum_j (K - j + 1) alpha_j
inline double pair_weight(const std::vector<double>& alphas) {
  const auto k = alphas.size();
  double s = 0.0;
  for (std::size_t j = 0; j < k; ++j) s += static_cast<double>(k - j) * alphas[j];
  return s;
}

}  // namespace detail

// alpha(b) = 1 / ((1-b)/S + b/alpha_K),  beta(b) = S / (K (1-b)).
inline AlphaBeta alpha_beta(double b_frac, const ProblemParams& params) {
  if (!(b_frac >= 0.0 && b_frac <= 1.0)) throw InvariantError("b_frac must lie in [0, 1]");
  const auto a = detail::class_alphas(params);
  const double s = detail::pair_weight(a);
  const double k = params.num_classes;
  AlphaBeta r;
  r.alpha = 1.0 / ((1.0 - b_frac) / s + b_frac / a.back());
  r.beta = b_frac == 1.0 ? kInf : s / (k * (1.0 - b_frac));
  return r;
}

struct PfConfig {
  ProblemParams params;
  double b_frac = 0.0;
  std::vector<double> alphas;  // alpha_j = 1 + ln theta_j
  std::vector<double> pair_budget;  // b_j, shared by every pair (j, i) with i >= j
  double global_budget = 0.0;
  double beta_bar = 0.0;  // exponent constant of the pair thresholds

  static PfConfig build(const ProblemParams& params, double b_frac) {
    params.validate();
    if (!(b_frac >= 0.0 && b_frac <= 1.0)) throw InvariantError("b_frac must lie in [0, 1]");
    PfConfig c;
    c.params = params;
    c.b_frac = b_frac;
    c.alphas = detail::class_alphas(params);
    const double s = detail::pair_weight(c.alphas);
    const double b = params.budget;
    for (double a : c.alphas) c.pair_budget.push_back(b * a * (1.0 - b_frac) / s);
    c.global_budget = b * b_frac;
    c.beta_bar = alpha_beta(b_frac, params).beta;
    c.check();
    return c;
  }

  int num_classes() const { return params.num_classes; }
  double b(ClassId j) const { return pair_budget.at(static_cast<std::size_t>(j - 1)); }

  double budget_identity_error() const {
    const int k = num_classes();
    double s = global_budget;
    for (ClassId j = 1; j <= k; ++j) s += (k - j + 1) * b(j);
    return std::abs(s - params.budget);
  }

  // Pair threshold: 1 on [0, b_j/alpha_j], exp(K beta_bar u / B - 1) up to b_j.
  double pair_phi(ClassId j, double u) const {
    const double flat_end = b(j) / alphas[static_cast<std::size_t>(j - 1)];
    if (u <= flat_end) return 1.0;
    return std::exp(num_classes() * beta_bar * u / params.budget - 1.0);
  }
  double pair_inverse(ClassId j, double v) const {
    if (v < 1.0) return -kInf;
    return std::min(b(j), params.budget * (1.0 + std::log(v)) / (num_classes() * beta_bar));
  }

  double global_phi(double u) const {
    const double flat_end = global_budget / alphas.back();
    if (u <= flat_end) return 1.0;
    return std::exp(alphas.back() * u / global_budget - 1.0);
  }
  double global_inverse(double v) const {
    if (v < 1.0) return -kInf;
    return std::min(global_budget, global_budget * (1.0 + std::log(v)) / alphas.back());
  }

  void check() const {
    if (budget_identity_error() > 1e-9) throw InvariantError("pair and global budgets do not sum to B");
    if (b_frac < 1.0) {
      for (ClassId j = 1; j <= num_classes(); ++j) {
        const double a = alphas[static_cast<std::size_t>(j - 1)];
        const double junction = num_classes() * beta_bar * b(j) / (params.budget * a);
        if (std::abs(junction - 1.0) > 1e-9) throw InvariantError("pair threshold junction identity fails");
        if (std::abs(pair_phi(j, b(j)) - params.theta_of(j)) > 1e-9 * params.theta_of(j))
          throw InvariantError("pair threshold does not reach theta_" + std::to_string(j));
      }
    }
    if (b_frac > 0.0 && std::abs(global_phi(global_budget) - params.theta_max()) > 1e-9 * params.theta_max())
      throw InvariantError("global threshold does not reach theta_K");
  }
};

// Pair tracks (j, i), j <= i, indexed row-major over the upper triangle.
inline std::size_t pair_index(int k, ClassId j, ClassId i) {
  const auto jj = static_cast<std::size_t>(j - 1), ii = static_cast<std::size_t>(i - 1);
  const auto kk = static_cast<std::size_t>(k);
  return jj * kk - jj * (jj - 1) / 2 + (ii - jj);
}

struct PfStep {
  double fractional = 0.0;
  double global = 0.0;
  int integral = 0;
  std::vector<std::pair<std::size_t, double>> pairs;  // (track, share)
};

class PfSetAside {
 public:
  explicit PfSetAside(PfConfig config)
      : cfg_(std::move(config)),
        z_pair_(static_cast<std::size_t>(cfg_.num_classes() * (cfg_.num_classes() + 1) / 2), 0.0),
        rounder_(cfg_.params.budget) {}

  const PfConfig& config() const { return cfg_; }
  const std::vector<double>& pair_utilization() const { return z_pair_; }
  double global_utilization() const { return z_global_; }

  // Fractional relaxation step only; updates utilizations.
  PfStep relax(const Agent& a) {
    PfStep out;
    const double v = a.value;
    std::vector<std::size_t> tracks;
    std::vector<double> prov;
    if (cfg_.b_frac < 1.0) {
      for (std::size_t x = 0; x < a.labels.size(); ++x)
        for (std::size_t y = x; y < a.labels.size(); ++y) {
          const ClassId j = a.labels[x], i = a.labels[y];
          const std::size_t id = pair_index(cfg_.num_classes(), j, i);
          const double z = z_pair_[id];
          double xh = 0.0;
          if (v >= cfg_.pair_phi(j, z)) xh = std::clamp(cfg_.pair_inverse(j, v) - z, 0.0, 1.0);
          tracks.push_back(id);
          prov.push_back(xh);
        }
    }
    const std::vector<double> capped = waterfill(tracks, prov);
    double used = 0.0;
    for (std::size_t n = 0; n < tracks.size(); ++n) {
      z_pair_[tracks[n]] += capped[n];
      used += capped[n];
      out.pairs.emplace_back(tracks[n], capped[n]);
    }
    if (cfg_.b_frac > 0.0 && v >= cfg_.global_phi(z_global_)) {
      const double room = std::max(0.0, 1.0 - used);
      out.global = std::clamp(cfg_.global_inverse(v) - z_global_, 0.0, room);
      z_global_ += out.global;
    }
    out.fractional = std::min(1.0, used + out.global);
    return out;
  }

  template <class Urbg>
  PfStep step(const Agent& a, Urbg& rng) {
    PfStep s = relax(a);
    s.integral = rounder_.step(s.fractional, rng);
    return s;
  }

 private:
  // Caps provisional shares at a common level h so they sum to at most one:
  // share_n = min(max(h - z_n, 0), prov_n), h the largest feasible level.
  std::vector<double> waterfill(const std::vector<std::size_t>& tracks, const std::vector<double>& prov) const {
    const double total = std::accumulate(prov.begin(), prov.end(), 0.0);
    if (total <= 1.0) return prov;
    auto filled = [&](double h) {
      double s = 0.0;
      for (std::size_t n = 0; n < tracks.size(); ++n) s += std::min(std::max(h - z_pair_[tracks[n]], 0.0), prov[n]);
      return s;
    };
    double lo = kInf, hi = -kInf;
    for (std::size_t n = 0; n < tracks.size(); ++n) {
      lo = std::min(lo, z_pair_[tracks[n]]);
      hi = std::max(hi, z_pair_[tracks[n]] + prov[n]);
    }
    while (hi - lo > 1e-12 * std::max(1.0, hi)) {
      const double mid = 0.5 * (lo + hi);
      if (filled(mid) <= 1.0) lo = mid;
      else hi = mid;
    }
    std::vector<double> out(prov.size());
    for (std::size_t n = 0; n < tracks.size(); ++n) out[n] = std::min(std::max(lo - z_pair_[tracks[n]], 0.0), prov[n]);
    return out;
  }

  PfConfig cfg_;
  std::vector<double> z_pair_;
  double z_global_ = 0.0;
  LosslessRounder rounder_;
};

inline Allocation run_pf_fractional(const PfConfig& config, const Instance& instance) {
  PfSetAside policy(config);
  Allocation out = Allocation::zeros(instance.size(), false);
  for (std::size_t t = 0; t < instance.size(); ++t) out.decisions[t] = policy.relax(instance.agents[t]).fractional;
  return out;
}

template <class Urbg>
Allocation run_pf_setaside(const PfConfig& config, const Instance& instance, Urbg& rng) {
  PfSetAside policy(config);
  Allocation out = Allocation::zeros(instance.size());
  for (std::size_t t = 0; t < instance.size(); ++t) out.decisions[t] = policy.step(instance.agents[t], rng).integral;
  return out;
}

}  // namespace omcs
