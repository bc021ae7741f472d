#pragma once

// Optimal fractional policy under quantity quotas: M units are set aside
// for the quotas and the other B - M follow one piecewise-exponential
// threshold phi(u). The randomized set-aside policy rounds the threshold
// part of this stream losslessly.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "omcs/error.hpp"
#include "omcs/gfq_thresholds.hpp"
#include "omcs/lambert_w.hpp"
#include "omcs/model.hpp"
#include "omcs/rounding.hpp"

namespace omcs {

enum class FracRegime { low_m, high_m, all_reserved };

inline const char* to_string(FracRegime r) {
  switch (r) {
    case FracRegime::low_m: return "low_m";
    case FracRegime::high_m: return "high_m";
    case FracRegime::all_reserved: return "all_reserved";
  }
  return "?";
}

// phi(u) = exp(p + q u) on [u0, u1]; q = 0 gives a flat piece.
struct ThresholdPiece {
  double u0, u1;
  double p, q;

  double at(double u) const { return std::exp(p + q * u); }
  double inverse(double v) const { return q == 0.0 ? u1 : (std::log(v) - p) / q; }
  double integral(double a, double b) const {
    if (q == 0.0) return std::exp(p) * (b - a);
    return (std::exp(p + q * b) - std::exp(p + q * a)) / q;
  }
};

class FracThreshold {
 public:
  FracRegime regime = FracRegime::low_m;
  double alpha = 1.0;
  double v_star = 1.0;  // phi(0); 1 in the low-M regime
  int j_star = 0;       // first class of the high-M threshold
  std::vector<double> gamma;  // breakpoints, gamma.back() = B - M
  std::vector<ThresholdPiece> pieces;

  double domain_end() const { return pieces.empty() ? 0.0 : pieces.back().u1; }

  double operator()(double u) const {
    if (pieces.empty()) return kInf;
    if (u <= pieces.front().u0) return pieces.front().at(pieces.front().u0);
    for (const auto& pc : pieces)
      if (u <= pc.u1) return pc.at(u);
    return pieces.back().at(pieces.back().u1);
  }

  // Rightmost u with phi(u) <= v; -inf when v < phi(0).
  double inverse(double v) const {
    if (pieces.empty() || v < (*this)(0.0)) return -kInf;
    for (auto it = pieces.rbegin(); it != pieces.rend(); ++it) {
      if (it->at(it->u0) > v) continue;
      if (it->at(it->u1) <= v) return it->u1;
      return std::clamp(it->inverse(v), it->u0, it->u1);
    }
    return 0.0;
  }

  double integral(double a, double b) const {
    double s = 0.0;
    for (const auto& pc : pieces) {
      const double lo = std::max(a, pc.u0), hi = std::min(b, pc.u1);
      if (hi > lo) s += pc.integral(lo, hi);
    }
    return s;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["regime"] = to_string(regime);
    j["alpha"] = alpha;
    j["v_star"] = v_star;
    j["j_star"] = j_star;
    j["gamma"] = gamma;
    return j;
  }
};

inline double frac_alpha_low(const GfqConstants& k, int budget) {
  const int kk = k.num_classes();
  const double theta_k = k.theta.back();
  double a = 1.0 + std::log(theta_k);
  for (ClassId j = 1; j < kk; ++j) a -= (k.c(j) - k.c(j + 1)) / budget * std::log(theta_k / k.theta_of(j));
  return a;
}

// alpha_{j*} for a candidate first class j*, from the Lambert-W closed form.
inline double frac_alpha_high(const GfqConstants& k, int budget, int quota_total, ClassId js) {
  const int kk = k.num_classes();
  const double theta_k = k.theta.back();
  const double c = k.c(js), d = k.d(js);
  const double n = budget - quota_total;
  const double m = quota_total;
  double x = 0.0;
  for (ClassId i = js; i < kk; ++i) x += (k.c(i) - k.c(i + 1)) * std::log(theta_k / k.theta_of(i));
  const double arg = theta_k * n / m * std::exp(-x / c) * std::exp(-d * n / (c * m));
  return d / m + c / n * lambert_w(arg);
}

inline FracThreshold build_frac_threshold(const ProblemParams& params, const GfqSpec& spec) {
  const auto k = GfqConstants::build(params, spec);
  const int b = params.budget;
  const int m = spec.total();
  const int kk = params.num_classes;
  FracThreshold f;

  if (m == b) {
    f.regime = FracRegime::all_reserved;
    f.alpha = (k.C.back() * params.theta_max() + k.D.back()) / m;
    f.gamma = {0.0};
    return f;
  }

  const double a0 = frac_alpha_low(k, b);
  const bool low = m <= b / a0 + 1e-12;

  std::vector<ClassId> high_hits;
  std::vector<double> high_alpha;
  if (m > 0) {
    for (double widen : {0.0, 1e-9}) {
      high_hits.clear();
      high_alpha.clear();
      for (ClassId js = 1; js <= kk; ++js) {
        const double a = frac_alpha_high(k, b, m, js);
        const double vs = (a * m - k.d(js)) / k.c(js);
        if (vs > k.theta_of(js - 1) * (1.0 + widen) && vs <= k.theta_of(js) * (1.0 + widen)) {
          high_hits.push_back(js);
          high_alpha.push_back(a);
        }
      }
      if (low || !high_hits.empty()) break;
    }
  }
  // Equal thetas make adjacent brackets coincide; keep the first.
  const bool high = !high_hits.empty();
  if (low == high)
    throw SolverError(std::string("frac threshold: ") + (low ? "both regimes" : "no regime") +
                      " apply (M=" + std::to_string(m) + ", B/alpha_0=" + std::to_string(b / a0) + ")");

  if (low) {
    f.regime = FracRegime::low_m;
    f.alpha = a0;
    f.v_star = 1.0;
    f.j_star = 1;
    const double g0 = b / a0 - m;
    f.gamma.push_back(g0);
    f.pieces.push_back({0.0, g0, 0.0, 0.0});
    double s = 0.0;  // sum_{i<j} (C_i - C_{i+1}) ln theta_i
    for (ClassId j = 1; j <= kk; ++j) {
      const double cj = k.c(j);
      const double gj = b / a0 - m + cj / a0 * std::log(k.theta_of(j)) + s / a0;
      f.pieces.push_back({f.gamma.back(), gj, (a0 * m - b - s) / cj, a0 / cj});
      f.gamma.push_back(gj);
      if (j < kk) s += (cj - k.c(j + 1)) * std::log(k.theta_of(j));
    }
  } else {
    const ClassId js = high_hits.front();
    const double a = high_alpha.front();
    f.regime = FracRegime::high_m;
    f.alpha = a;
    f.j_star = js;
    f.v_star = (a * m - k.d(js)) / k.c(js);
    const double lv = std::log(f.v_star);
    f.gamma.push_back(0.0);
    double s = 0.0;  // sum_{i=j*}^{j-1} (C_i - C_{i+1}) ln(theta_i / v*)
    for (ClassId j = js; j <= kk; ++j) {
      const double cj = k.c(j);
      const double gj = cj / a * (std::log(k.theta_of(j)) - lv) + s / a;
      f.pieces.push_back({f.gamma.back(), gj, lv - s / cj, a / cj});
      f.gamma.push_back(gj);
      if (j < kk) s += (cj - k.c(j + 1)) * (std::log(k.theta_of(j)) - lv);
    }
  }

  const double end = b - m;
  if (std::abs(f.gamma.back() - end) > 1e-9 * std::max(1.0, end))
    throw SolverError("frac threshold: last breakpoint " + std::to_string(f.gamma.back()) + " != B - M");
  f.pieces.back().u1 = end;
  f.gamma.back() = end;
  for (std::size_t i = 1; i < f.pieces.size(); ++i) {
    const double left = f.pieces[i - 1].at(f.pieces[i - 1].u1);
    const double right = f.pieces[i].at(f.pieces[i].u0);
    if (std::abs(left - right) > 1e-9 * std::max(1.0, left))
      throw SolverError("frac threshold: discontinuity at breakpoint " + std::to_string(i));
  }
  if (std::abs(f(end) - params.theta_max()) > 1e-9 * params.theta_max())
    throw SolverError("frac threshold: phi(B - M) != theta_K");
  return f;
}

struct FracDecision {
  double quota = 0.0;      // y: quota-phase share
  double threshold = 0.0;  // x: threshold-phase share
  double total() const { return quota + threshold; }
};

class FracGfq {
 public:
  FracGfq(const ProblemParams& params, const GfqSpec& spec)
      : FracGfq(params, spec, build_frac_threshold(params, spec)) {}

  FracGfq(const ProblemParams& params, const GfqSpec& spec, FracThreshold phi)
      : spec_(spec), phi_(std::move(phi)), free_(params.budget - spec.total()),
        quota_used_(static_cast<std::size_t>(params.num_classes), 0.0) {}

  const FracThreshold& threshold() const { return phi_; }
  double utilization() const { return u_; }

  FracDecision step(const Agent& a) {
    FracDecision d;
    double gap = 0.0;
    for (ClassId j : a.labels) gap = std::max(gap, spec_.quota_of(j) - quota_used_[static_cast<std::size_t>(j - 1)]);
    if (gap > 0.0) {
      d.quota = std::min(1.0, gap);
      for (ClassId j : a.labels) {
        double& used = quota_used_[static_cast<std::size_t>(j - 1)];
        used += std::min(d.quota, std::max(0.0, spec_.quota_of(j) - used));
      }
    }
    if (free_ > 0 && a.value >= phi_(u_)) {
      const double room = std::min(1.0 - d.quota, free_ - u_);
      d.threshold = std::clamp(phi_.inverse(a.value) - u_, 0.0, std::max(0.0, room));
      u_ += d.threshold;
    }
    return d;
  }

 private:
  GfqSpec spec_;
  FracThreshold phi_;
  double free_;
  double u_ = 0.0;
  std::vector<double> quota_used_;
};

inline Allocation run_frac_gfq(const ProblemParams& params, const GfqSpec& spec, const Instance& instance) {
  FracGfq policy(params, spec);
  Allocation out = Allocation::zeros(instance.size(), false);
  for (std::size_t t = 0; t < instance.size(); ++t) out.decisions[t] = policy.step(instance.agents[t]).total();
  return out;
}

// Randomized set-aside: quota-phase arrivals are accepted outright and the
// threshold share of the fractional policy goes through lossless rounding.
class RSetAside {
 public:
  RSetAside(const ProblemParams& params, const GfqSpec& spec)
      : frac_(params, spec), rounder_(params.budget - spec.total()) {}
  RSetAside(const ProblemParams& params, const GfqSpec& spec, FracThreshold phi)
      : frac_(params, spec, std::move(phi)), rounder_(params.budget - spec.total()) {}

  template <class Urbg>
  int step(const Agent& a, Urbg& rng) {
    const FracDecision d = frac_.step(a);
    last_ = d;
    if (d.quota > 0.0) {
      if (d.quota != 1.0) throw InvariantError("quota share must be whole with unit requests");
      return 1;
    }
    return rounder_.step(d.threshold, rng);
  }

  const FracDecision& last_fractional() const { return last_; }

 private:
  FracGfq frac_;
  LosslessRounder rounder_;
  FracDecision last_;
};

template <class Urbg>
Allocation run_r_setaside(const ProblemParams& params, const GfqSpec& spec, const FracThreshold& phi,
                          const Instance& instance, Urbg& rng) {
  RSetAside policy(params, spec, phi);
  Allocation out = Allocation::zeros(instance.size());
  for (std::size_t t = 0; t < instance.size(); ++t) out.decisions[t] = policy.step(instance.agents[t], rng);
  return out;
}

}  // namespace omcs
