#pragma once

// Optimal deterministic admission thresholds under quantity quotas and the
// deterministic set-aside policy that uses them.
//
// With N = B - M free units the thresholds lambda_0..lambda_N satisfy
//   case (i),  B/alpha >= M:  lambda_0..lambda_tau = 1,
//                             alpha (M + tau + 1) = Delta(lambda_{tau+1})
//   case (ii), B/alpha <  M:  alpha M = Delta(lambda_0)
// and in both cases
//   alpha lambda_i = Delta(lambda_{i+1}) - Delta(lambda_i),   lambda_N = theta_K,
// where Delta(l) = C_j l + D_j on the bracket [theta_{j-1}, theta_j].
// For fixed alpha the chain is a forward recursion, and lambda_N grows with
// alpha, so alpha is found by bisection on lambda_N(alpha) - theta_K.

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "omcs/error.hpp"
#include "omcs/model.hpp"

namespace omcs {

struct GfqConstants {
  std::vector<double> C;  // C[j-1] = B - max_{i<j} m_i
  std::vector<double> D;  // D[j-1] = sum_{i<j} [m_i - max_{l<i} m_l]^+ theta_i
  std::vector<double> theta;

  static GfqConstants build(const ProblemParams& params, const GfqSpec& spec) {
    params.validate();
    spec.validate(params);
    GfqConstants k;
    k.theta = params.theta;
    double d = 0.0;
    int running_max = 0;
    for (ClassId j = 1; j <= params.num_classes; ++j) {
      k.C.push_back(static_cast<double>(params.budget - running_max));
      k.D.push_back(d);
      d += std::max(0, spec.quota_of(j) - running_max) * params.theta_of(j);
      running_max = std::max(running_max, spec.quota_of(j));
    }
    return k;
  }

  int num_classes() const { return static_cast<int>(C.size()); }
  double c(ClassId j) const { return C.at(static_cast<std::size_t>(j - 1)); }
  double d(ClassId j) const { return D.at(static_cast<std::size_t>(j - 1)); }
  double theta_of(ClassId j) const { return j == 0 ? 1.0 : theta.at(static_cast<std::size_t>(j - 1)); }

  // Bracket j with lambda in [theta_{j-1}, theta_j]; the lowest such j.
  ClassId bracket(double lambda) const {
    const auto it = std::lower_bound(theta.begin(), theta.end(), lambda);
    if (it == theta.end()) return num_classes();
    return static_cast<ClassId>(it - theta.begin()) + 1;
  }

  // Delta continued linearly past the domain [1, theta_K] so the solver can
  // evaluate overshooting candidates.
  double delta_extended(double lambda) const {
    const ClassId j = bracket(lambda);
    return c(j) * lambda + d(j);
  }

  double delta_inverse(double value) const {
    for (ClassId j = 1; j <= num_classes(); ++j)
      if (value <= c(j) * theta_of(j) + d(j) || j == num_classes()) return (value - d(j)) / c(j);
    return kInf;
  }
};

// Delta(lambda) = C_j lambda + D_j on [theta_{j-1}, theta_j].
inline double delta(double lambda, const GfqConstants& k) {
  if (!(lambda >= 1.0 - kTol && lambda <= k.theta.back() + kTol))
    throw InvariantError("delta: lambda " + std::to_string(lambda) + " outside [1, theta_K]");
  const ClassId j = k.bracket(lambda);
  const double value = k.c(j) * lambda + k.d(j);
  if (j < k.num_classes() && std::abs(lambda - k.theta_of(j)) <= kTol) {
    const double right = k.c(j + 1) * lambda + k.d(j + 1);
    if (std::abs(right - value) > 1e-9 * std::max(1.0, std::abs(value)))
      throw InvariantError("delta is discontinuous at theta_" + std::to_string(j));
  }
  return value;
}

enum class ThresholdCase { flat_start, quota_seeded, all_reserved };

inline const char* to_string(ThresholdCase c) {
  switch (c) {
    case ThresholdCase::flat_start: return "flat_start";
    case ThresholdCase::quota_seeded: return "quota_seeded";
    case ThresholdCase::all_reserved: return "all_reserved";
  }
  return "?";
}

struct ThresholdTable {
  std::vector<double> lambdas;  // lambda_0..lambda_{B-M}; empty when M = B
  double alpha = 1.0;
  std::optional<int> tau;
  ThresholdCase case_id = ThresholdCase::flat_start;
  int bisection_steps = 0;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["alpha"] = alpha;
    j["tau"] = tau ? nlohmann::json(*tau) : nlohmann::json(nullptr);
    j["lambdas"] = lambdas;
    return j;
  }

  static ThresholdTable from_json(const nlohmann::json& j) {
    ThresholdTable t;
    try {
      t.alpha = j.at("alpha").get<double>();
      if (!j.at("tau").is_null()) t.tau = j.at("tau").get<int>();
      t.lambdas = j.at("lambdas").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("threshold table: ") + e.what());
    }
    t.case_id = t.lambdas.empty() ? ThresholdCase::all_reserved
                                  : (t.tau ? ThresholdCase::flat_start : ThresholdCase::quota_seeded);
    return t;
  }
};

namespace detail {

struct ChainResult {
  std::vector<double> lambdas;
  std::optional<int> tau;
  ThresholdCase case_id;
};

// Forward recursion for a candidate alpha; lambda_N is left unclamped.
inline ChainResult threshold_chain(double alpha, int budget, int quota_total, const GfqConstants& k) {
  const int n = budget - quota_total;
  ChainResult r;
  r.lambdas.assign(static_cast<std::size_t>(n) + 1, 1.0);
  const double free_at_one = budget / alpha - quota_total;
  double delta_i;
  int i;
  if (free_at_one >= 0.0) {
    r.case_id = ThresholdCase::flat_start;
    int tau = std::max(0, static_cast<int>(std::ceil(free_at_one - 1e-9)) - 1);
    tau = std::min(tau, n - 1);
    r.tau = tau;
    i = tau + 1;
    delta_i = alpha * (quota_total + tau + 1);
  } else {
    r.case_id = ThresholdCase::quota_seeded;
    i = 0;
    delta_i = alpha * quota_total;
  }
  r.lambdas[static_cast<std::size_t>(i)] = k.delta_inverse(delta_i);
  for (; i < n; ++i) {
    delta_i += alpha * r.lambdas[static_cast<std::size_t>(i)];
    r.lambdas[static_cast<std::size_t>(i) + 1] = k.delta_inverse(delta_i);
  }
  return r;
}

}  // namespace detail

// Largest absolute residual of the equation system for a solved table.
inline double threshold_residual(const ThresholdTable& t, const ProblemParams& params, const GfqSpec& spec) {
  const auto k = GfqConstants::build(params, spec);
  const int m = spec.total();
  const int n = params.budget - m;
  if (n == 0) return 0.0;
  const auto& l = t.lambdas;
  double worst = std::abs(l.back() - params.theta_max());
  int first;
  if (t.tau) {
    for (int i = 0; i <= *t.tau; ++i) worst = std::max(worst, std::abs(l[static_cast<std::size_t>(i)] - 1.0));
    first = *t.tau + 1;
    worst = std::max(worst, std::abs(t.alpha * (m + first) - delta(l[static_cast<std::size_t>(first)], k)));
  } else {
    first = 0;
    worst = std::max(worst, std::abs(t.alpha * m - delta(l[0], k)));
  }
  for (int i = first; i < n; ++i) {
    const double lhs = t.alpha * l[static_cast<std::size_t>(i)];
    const double rhs = delta(l[static_cast<std::size_t>(i) + 1], k) - delta(l[static_cast<std::size_t>(i)], k);
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  return worst;
}

inline ThresholdTable solve_thresholds(const ProblemParams& params, const GfqSpec& spec) {
  const auto k = GfqConstants::build(params, spec);
  const int b = params.budget;
  const int m = spec.total();
  const int n = b - m;
  const double theta_k = params.theta_max();

  ThresholdTable out;
  if (n == 0) {
    out.case_id = ThresholdCase::all_reserved;
    out.alpha = (k.C.back() * theta_k + k.D.back()) / m;
    return out;
  }

  auto residual = [&](double alpha) { return detail::threshold_chain(alpha, b, m, k).lambdas.back() - theta_k; };

  double lo = 1.0, hi = 2.0;
  if (residual(lo) >= 0.0) {
    hi = lo;
  } else {
    while (residual(hi) < 0.0) {
      lo = hi;
      hi *= 2.0;
      if (hi > 1e12) throw SolverError("threshold solver: cannot bracket alpha");
    }
  }
  double r_lo = residual(lo);
  int steps = 0;
  while (hi > lo) {
    const double mid = 0.5 * (lo + hi);
    const double r = residual(mid);
    if (r < r_lo - 1e-9 * std::max(1.0, std::abs(r_lo)))
      throw SolverError("threshold solver: residual not monotone near alpha=" + std::to_string(mid));
    if (std::abs(r) <= 1e-10 || mid == lo || mid == hi) {
      lo = hi = mid;
      break;
    }
    if (r < 0.0) {
      lo = mid;
      r_lo = r;
    } else {
      hi = mid;
    }
    if (++steps > 200) {
      std::ostringstream os;
      os << "threshold solver did not converge: alpha in [" << lo << ", " << hi << "], residual " << r;
      throw SolverError(os.str());
    }
  }
  auto chain = detail::threshold_chain(lo, b, m, k);
  chain.lambdas.back() = theta_k;
  out.lambdas = std::move(chain.lambdas);
  out.alpha = lo;
  out.tau = chain.tau;
  out.case_id = chain.case_id;
  out.bisection_steps = steps;

  const double res = threshold_residual(out, params, spec);
  if (res > 1e-8) throw SolverError("threshold solver: equation residual " + std::to_string(res) + " exceeds 1e-8");
  return out;
}

// Deterministic set-aside policy. Quota-unmet arrivals are always
// accepted; otherwise the kappa-th free unit goes to a value at or above
// lambda_{kappa-1}.
class DSetAside {
 public:
  DSetAside(const ProblemParams& params, const GfqSpec& spec, ThresholdTable table)
      : spec_(spec), table_(std::move(table)), free_units_(params.budget - spec.total()),
        class_next_(static_cast<std::size_t>(params.num_classes), 1) {
    if (static_cast<int>(table_.lambdas.size()) != (free_units_ == 0 ? 0 : free_units_ + 1))
      throw AlignmentError("threshold table has " + std::to_string(table_.lambdas.size()) + " entries, expected " +
                           std::to_string(free_units_ + 1));
  }

  int step(const Agent& a) {
    const bool quota_open = std::any_of(a.labels.begin(), a.labels.end(), [&](ClassId j) {
      return class_next_[static_cast<std::size_t>(j - 1)] <= spec_.quota_of(j);
    });
    if (quota_open) {
      for (ClassId j : a.labels) ++class_next_[static_cast<std::size_t>(j - 1)];
      return 1;
    }
    if (kappa_ <= free_units_ && a.value >= table_.lambdas[static_cast<std::size_t>(kappa_ - 1)]) {
      ++kappa_;
      return 1;
    }
    return 0;
  }

 private:
  GfqSpec spec_;
  ThresholdTable table_;
  int free_units_;
  int kappa_ = 1;
  std::vector<int> class_next_;
};

inline Allocation run_d_setaside(const ProblemParams& params, const GfqSpec& spec, const ThresholdTable& table,
                                 const Instance& instance) {
  DSetAside policy(params, spec, table);
  Allocation out = Allocation::zeros(instance.size());
  for (std::size_t t = 0; t < instance.size(); ++t) out.decisions[t] = policy.step(instance.agents[t]);
  return out;
}

}  // namespace omcs
