#pragma once

// Lossless online rounding of a fractional decision stream. The rounder
// tracks the cumulative fractional utilization z and the index kappa of the
// next unsold unit; unit ceil(z) is still unsold with probability
// ceil(z) - z, which makes every step's expected decision equal its
// fractional share.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "omcs/error.hpp"
#include "omcs/model.hpp"
#include "omcs/parallel.hpp"
#include "omcs/rng.hpp"

namespace omcs {

inline constexpr double kProbClamp = 1e-12;

struct RounderState {
  long kappa = 1;
  double z = 0.0;
};

namespace detail {

// Integer-valued ceil that treats z within 1e-12 of an integer as that integer.
inline double snap(double z) {
  const double r = std::round(z);
  return std::abs(z - r) <= 1e-12 ? r : z;
}

inline double clamp_prob(double p) {
  if (p < -kProbClamp || p > 1.0 + kProbClamp || std::isnan(p))
    throw InvariantError("rounding probability " + std::to_string(p) + " outside [0, 1]");
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace detail

// Acceptance probability of the next step given the state, or 0 if the
// step cannot accept. Pure; exposed for exact enumeration.
inline double round_probability(const RounderState& s, double x) {
  if (x <= 0.0) return 0.0;
  const double zp = s.z;
  const double zn = detail::snap(zp + x);
  const double cp = std::ceil(zp);
  const double cn = std::ceil(zn);
  const auto kappa = static_cast<double>(s.kappa);
  if (cn == cp) {
    if (kappa == cp) return detail::clamp_prob(x / (cp - zp));
    return 0.0;
  }
  if (kappa == cp) return 1.0;
  if (kappa == cn) return detail::clamp_prob((zn - cp) / ((1.0 - cp + zp) * (cn - cp)));
  return 0.0;
}

inline void round_advance(RounderState& s, double x, bool accepted) {
  s.z = detail::snap(s.z + x);
  if (accepted) ++s.kappa;
}

class LosslessRounder {
 public:
  explicit LosslessRounder(int budget) : budget_(budget) {}

  const RounderState& state() const { return state_; }

  // One fresh uniform per step with x > 0; x = 0 consumes nothing.
  template <class Urbg>
  int step(double x, Urbg& rng) {
    if (!(x >= -kTol && x <= 1.0 + kTol)) throw InvariantError("fractional step " + std::to_string(x) + " outside [0, 1]");
    if (state_.z + x > budget_ + kTol)
      throw InvariantError("fractional utilization " + std::to_string(state_.z + x) + " exceeds budget " +
                           std::to_string(budget_));
    if (x <= 0.0) return 0;
    const double p = round_probability(state_, x);
    const bool accept = uniform01(rng) < p;
    round_advance(state_, x, accept);
    return accept ? 1 : 0;
  }

 private:
  int budget_;
  RounderState state_;
};

// Rounds a whole fractional allocation.
template <class Urbg>
Allocation round_allocation(const std::vector<double>& fractional, int budget, Urbg& rng) {
  LosslessRounder r(budget);
  Allocation out = Allocation::zeros(fractional.size());
  for (std::size_t t = 0; t < fractional.size(); ++t) out.decisions[t] = r.step(fractional[t], rng);
  return out;
}

// Exact expected decision of every step, by enumerating all rounder
// states reachable along the stream. Exponential in the worst case; meant
// for short streams.
inline std::vector<double> exact_round_marginals(const std::vector<double>& fractional) {
  struct Path {
    RounderState s;
    double prob;
  };
  std::vector<Path> paths{{RounderState{}, 1.0}};
  std::vector<double> marginal(fractional.size(), 0.0);
  for (std::size_t t = 0; t < fractional.size(); ++t) {
    const double x = fractional[t];
    std::vector<Path> next;
    next.reserve(paths.size() * 2);
    for (const Path& p : paths) {
      const double q = x > 0.0 ? round_probability(p.s, x) : 0.0;
      marginal[t] += p.prob * q;
      if (q > 0.0) {
        Path acc = p;
        round_advance(acc.s, x, true);
        acc.prob *= q;
        next.push_back(acc);
      }
      if (q < 1.0) {
        Path rej = p;
        round_advance(rej.s, x, false);
        rej.prob *= 1.0 - q;
        next.push_back(rej);
      }
    }
    // Paths with equal kappa share z, so merge them.
    std::sort(next.begin(), next.end(), [](const Path& a, const Path& b) { return a.s.kappa < b.s.kappa; });
    paths.clear();
    for (const Path& p : next) {
      if (!paths.empty() && paths.back().s.kappa == p.s.kappa) paths.back().prob += p.prob;
      else paths.push_back(p);
    }
  }
  return marginal;
}

// A fractional stream with per-step valuations and labels for per-class checks.
struct FracStream {
  std::vector<double> x;
  std::vector<double> values;
  std::vector<std::vector<ClassId>> labels;  // may be empty: no per-class check
  int budget = 1;
  int num_classes = 1;
};

struct LosslessReport {
  std::size_t trials = 0;
  double max_value_z = 0.0;         // largest |mean - fractional| / stderr over prefixes and classes
  double max_availability_z = 0.0;  // largest standardized availability deviation
  std::size_t checkpoints = 0;
  bool pass = false;
};

// Monte Carlo check that rounding preserves every prefix's expected value
// (total and per class) and that unit ceil(z) is unsold with probability
// ceil(z) - z at evenly spaced checkpoints. Deviations below 1e-12 count as
// zero so deterministic streams pass.
inline LosslessReport validate_lossless(const FracStream& stream, std::size_t trials, std::uint64_t seed,
                                        double sigmas = 4.0, std::size_t num_checkpoints = 20) {
  const std::size_t n = stream.x.size();
  const std::size_t k = stream.labels.empty() ? 0 : static_cast<std::size_t>(stream.num_classes);
  const std::size_t series = 1 + k;

  std::vector<std::size_t> checkpoints;
  for (std::size_t c = 1; c <= num_checkpoints && n > 0; ++c) {
    const std::size_t t = std::max<std::size_t>(1, c * n / num_checkpoints);
    if (checkpoints.empty() || checkpoints.back() != t) checkpoints.push_back(t);
  }

  std::vector<double> frac_prefix(n * series, 0.0), z_after(n, 0.0);
  {
    std::vector<double> acc(series, 0.0);
    double z = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      acc[0] += stream.values[t] * stream.x[t];
      if (k)
        for (ClassId j : stream.labels[t]) acc[static_cast<std::size_t>(j)] += stream.values[t] * stream.x[t];
      for (std::size_t s = 0; s < series; ++s) frac_prefix[t * series + s] = acc[s];
      z = detail::snap(z + stream.x[t]);
      z_after[t] = z;
    }
  }

  // Per-worker partial sums over contiguous trial chunks, combined in chunk order.
  const std::size_t chunks = std::min<std::size_t>(trials, 64);
  struct Partial {
    std::vector<double> sum, sumsq;
    std::vector<double> avail;
  };
  std::vector<Partial> parts(chunks);
  parallel_for(chunks, [&](std::size_t c) {
    Partial& p = parts[c];
    p.sum.assign(n * series, 0.0);
    p.sumsq.assign(n * series, 0.0);
    p.avail.assign(checkpoints.size(), 0.0);
    std::vector<double> acc(series);
    const std::size_t lo = c * trials / chunks, hi = (c + 1) * trials / chunks;
    // One engine per chunk: the chunk layout is fixed, so results do not
    // depend on the thread count.
    Rng rng(derive_seed(seed, c));
    for (std::size_t i = lo; i < hi; ++i) {
      LosslessRounder r(stream.budget);
      std::fill(acc.begin(), acc.end(), 0.0);
      std::size_t next_cp = 0;
      for (std::size_t t = 0; t < n; ++t) {
        const int x = r.step(stream.x[t], rng);
        if (x) {
          acc[0] += stream.values[t];
          if (k)
            for (ClassId j : stream.labels[t]) acc[static_cast<std::size_t>(j)] += stream.values[t];
        }
        for (std::size_t s = 0; s < series; ++s) {
          p.sum[t * series + s] += acc[s];
          p.sumsq[t * series + s] += acc[s] * acc[s];
        }
        if (next_cp < checkpoints.size() && checkpoints[next_cp] == t + 1) {
          const double ceil_z = std::ceil(r.state().z);
          if (static_cast<double>(r.state().kappa) == ceil_z) p.avail[next_cp] += 1.0;
          ++next_cp;
        }
      }
    }
  });

  LosslessReport rep;
  rep.trials = trials;
  rep.checkpoints = checkpoints.size();
  const double tn = static_cast<double>(trials);
  auto z_score = [&](double mean, double var, double target) {
    const double dev = std::abs(mean - target);
    if (dev <= 1e-12 * std::max(1.0, std::abs(target))) return 0.0;
    const double se = std::sqrt(std::max(var, 0.0) / tn);
    return se > 0.0 ? dev / se : kInf;
  };
  for (std::size_t idx = 0; idx < n * series; ++idx) {
    double s = 0.0, ss = 0.0;
    for (const auto& p : parts) {
      s += p.sum[idx];
      ss += p.sumsq[idx];
    }
    const double mean = s / tn;
    const double var = tn > 1 ? (ss - tn * mean * mean) / (tn - 1.0) : 0.0;
    rep.max_value_z = std::max(rep.max_value_z, z_score(mean, var, frac_prefix[idx]));
  }
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    double cnt = 0.0;
    for (const auto& p : parts) cnt += p.avail[c];
    const double z = z_after[checkpoints[c] - 1];
    const double target = std::ceil(z) - z;
    const double freq = cnt / tn;
    rep.max_availability_z = std::max(rep.max_availability_z, z_score(freq, target * (1.0 - target), target));
  }
  rep.pass = rep.max_value_z <= sigmas && rep.max_availability_z <= sigmas;
  return rep;
}

}  // namespace omcs
