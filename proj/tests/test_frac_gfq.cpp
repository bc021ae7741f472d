#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "omcs/frac_gfq.hpp"
#include "omcs/generators.hpp"
#include "omcs/lambert_w.hpp"
#include "omcs/oracles.hpp"

using namespace omcs;

namespace {

constexpr double kE = std::numbers::e;

ProblemParams params(int b, std::vector<double> theta) {
  ProblemParams p{b, static_cast<int>(theta.size()), std::move(theta)};
  p.validate();
  return p;
}

// Trapezoid integral of phi, independent of the closed-form piece integrals.
double numeric_integral(const FracThreshold& phi, double a, double b, int n = 4000) {
  if (b <= a) return 0.0;
  const double h = (b - a) / n;
  double s = 0.5 * (phi(a) + phi(b));
  for (int i = 1; i < n; ++i) s += phi(a + i * h);
  return s * h;
}

double worst_hard_ratio(const ProblemParams& p, const GfqSpec& spec, double delta) {
  const auto fam = gen_hard_gfq(p, delta);
  double worst = 0.0;
  for (std::size_t k = 0; k < fam.prefix_ends.size(); ++k) {
    const auto pre = fam.prefix(k);
    worst = std::max(worst, offline_opt_gfq_clipped(pre, spec).value / total_value(pre, run_frac_gfq(p, spec, pre)));
  }
  return worst;
}

}  // namespace

TEST(LambertW, Examples) {
  EXPECT_DOUBLE_EQ(lambert_w(0.0), 0.0);
  EXPECT_NEAR(lambert_w(kE), 1.0, 1e-15);
  for (double x : {0.1, 1.0, 5.0, 20.0}) EXPECT_NEAR(lambert_w(x * std::exp(x)), x, 1e-12);
  EXPECT_NEAR(lambert_w(-1.0 / kE), -1.0, 1e-6);
  EXPECT_THROW(lambert_w(-0.5), InvariantError);
}

TEST(LambertW, DefiningIdentityAcrossRange) {
  for (double x = -0.367; x < 1e6; x = x < 0 ? x + 0.05 : x * 1.7 + 0.01) {
    const double w = lambert_w(x);
    EXPECT_LE(std::abs(w * std::exp(w) - x), 1e-12 * std::max(1.0, std::abs(x))) << x;
    EXPECT_GE(w, -1.0);
  }
}

TEST(FracThreshold, SingleClassLowRegime) {
  for (double theta : {2.0, 5.0, 12.0}) {
    const auto p = params(6, {theta});
    const auto phi = build_frac_threshold(p, GfqSpec{{0}});
    EXPECT_EQ(phi.regime, FracRegime::low_m);
    const double a = 1 + std::log(theta);
    EXPECT_NEAR(phi.alpha, a, 1e-12);
    for (double u = 0; u <= 6; u += 0.05) {
      const double want = u <= 6 / a ? 1.0 : std::exp(a * u / 6 - 1);
      EXPECT_NEAR(phi(u), want, 1e-9 * want) << u;
    }
  }
}

TEST(FracThreshold, HandValuesThetaE) {
  const auto phi = build_frac_threshold(params(1, {kE}), GfqSpec{{0}});
  EXPECT_NEAR(phi(0.5), 1.0, 1e-12);
  EXPECT_NEAR(phi(1.0), kE, 1e-9);
  EXPECT_NEAR(phi(0.75), std::exp(0.5), 1e-12);
}

TEST(FracThreshold, ContinuityMonotonicityAndEndpoint) {
  const std::vector<std::pair<ProblemParams, GfqSpec>> cases = {
      {params(10, {2, 8}), GfqSpec{{1, 1}}},   {params(10, {5, 10, 15}), GfqSpec{{1, 2, 1}}},
      {params(4, {5}), GfqSpec{{3}}},          {params(10, {2, 8}), GfqSpec{{6, 2}}},
      {params(7, {1.5, 3, 9}), GfqSpec{{0, 0, 0}}}, {params(9, {2, 2, 6}), GfqSpec{{2, 1, 3}}},
  };
  for (const auto& [p, spec] : cases) {
    const auto phi = build_frac_threshold(p, spec);
    for (std::size_t i = 0; i + 1 < phi.pieces.size(); ++i) {
      const double b = phi.pieces[i].u1;
      EXPECT_LE(std::abs(phi.pieces[i].at(b) - phi.pieces[i + 1].at(b)), 1e-9);
    }
    EXPECT_NEAR(phi(p.budget - spec.total()), p.theta_max(), 1e-9);
    double prev = 0.0;
    for (double u = 0; u <= phi.domain_end(); u += phi.domain_end() / 500) {
      EXPECT_GE(phi(u), prev - 1e-12);
      prev = phi(u);
    }
  }
}

TEST(FracThreshold, ExactlyOneRegimeAndRegimeRule) {
  for (int m = 0; m <= 9; ++m) {
    const auto p = params(10, {3, 9});
    const GfqSpec spec{{m, 0}};
    const auto phi = build_frac_threshold(p, spec);
    const double a0 = frac_alpha_low(GfqConstants::build(p, spec), 10);
    EXPECT_EQ(phi.regime == FracRegime::low_m, m <= 10 / a0) << m;
    EXPECT_GE(phi.alpha, 1.0);
  }
  const auto all = build_frac_threshold(params(3, {2, 4}), GfqSpec{{2, 1}});
  EXPECT_EQ(all.regime, FracRegime::all_reserved);
}

TEST(FracThreshold, HighRegimeStartsAtVStar) {
  const auto p = params(4, {5});
  const auto phi = build_frac_threshold(p, GfqSpec{{3}});
  ASSERT_EQ(phi.regime, FracRegime::high_m);
  EXPECT_NEAR(phi(0), phi.v_star, 1e-12);
  EXPECT_NEAR(phi.v_star, phi.alpha * 3 / 4, 1e-12);
  EXPECT_GT(phi.v_star, 1.0);
}

TEST(FracThreshold, InverseIsRightmostAndRoundTrips) {
  const auto p = params(10, {2, 8});
  const auto phi = build_frac_threshold(p, GfqSpec{{1, 1}});
  EXPECT_NEAR(phi.inverse(1.0), phi.pieces.front().u1, 1e-12);
  for (double u = phi.pieces.front().u1 + 0.01; u < 8; u += 0.37) EXPECT_NEAR(phi.inverse(phi(u)), u, 1e-9);
  EXPECT_NEAR(phi.inverse(8.0), 8.0, 1e-9);
  EXPECT_NEAR(phi.inverse(100.0), 8.0, 1e-12);
}

TEST(FracThreshold, PiecewiseIntegralMatchesQuadrature) {
  const auto phi = build_frac_threshold(params(10, {5, 10, 15}), GfqSpec{{1, 2, 1}});
  for (double a = 0; a < 6; a += 0.9)
    for (double b = a; b <= 6; b += 1.3) EXPECT_NEAR(phi.integral(a, b), numeric_integral(phi, a, b), 1e-5);
}

// The closed-form step maximizes a*v - integral of phi over the clipped range.
TEST(FracGfqStep, PseudoRevenueOptimality) {
  const auto p = params(10, {2, 8});
  const GfqSpec spec{{0, 0}};
  const auto phi = build_frac_threshold(p, spec);
  for (double u = 0; u < 9.9; u += 0.7) {
    for (double v = 1; v <= 8; v += 0.45) {
      FracGfq pol(p, spec);
      if (u > 0) {
        // Drive utilization to u with a synthetic arrival at phi(u).
        double reached = 0;
        while (reached < u - 1e-12) reached += pol.step(Agent{phi(std::min(u, reached + 1.0)), {2}}).threshold;
      }
      const double u0 = pol.utilization();
      const double x = pol.step(Agent{v, {2}}).threshold;
      const double cap = std::min(1.0, 10 - u0);
      double best = 0.0, best_a = 0.0;
      for (int i = 0; i <= 20000; ++i) {
        const double a = cap * i / 20000;
        const double r = a * v - phi.integral(u0, u0 + a);
        if (r > best + 1e-12) best = r, best_a = a;
      }
      EXPECT_NEAR(x * v - phi.integral(u0, u0 + x), best, 1e-6) << "u=" << u0 << " v=" << v << " a*=" << best_a;
    }
  }
}

TEST(FracGfqStep, HandTraceThetaE) {
  const auto p = params(1, {kE});
  FracGfq pol(p, GfqSpec{{0}});
  EXPECT_NEAR(pol.step(Agent{1.0, {1}}).total(), 0.5, 1e-12);
  EXPECT_NEAR(pol.step(Agent{kE, {1}}).total(), 0.5, 1e-9);
  const Instance inst{p, {{1.0, {1}}, {kE, {1}}}};
  const auto x = run_frac_gfq(p, GfqSpec{{0}}, inst);
  const double value = total_value(inst, x);
  EXPECT_NEAR(value, 0.5 + 0.5 * kE, 1e-9);
  EXPECT_NEAR(offline_opt(inst).value / value, kE / (0.5 + 0.5 * kE), 1e-9);
}

TEST(FracGfqStep, BelowThresholdRejects) {
  const auto p = params(2, {4});
  FracGfq pol(p, GfqSpec{{0}});
  pol.step(Agent{4.0, {1}});
  pol.step(Agent{4.0, {1}});
  EXPECT_DOUBLE_EQ(pol.step(Agent{1.0, {1}}).total(), 0.0);
}

TEST(FracGfqStep, QuotaPhaseThenThresholds) {
  const auto p = params(4, {3, 3});
  const GfqSpec spec{{1, 1}};
  FracGfq pol(p, spec);
  const auto d1 = pol.step(Agent{1.0, {1, 2}});
  EXPECT_DOUBLE_EQ(d1.quota, 1.0);
  EXPECT_DOUBLE_EQ(d1.threshold, 0.0);
  EXPECT_DOUBLE_EQ(pol.step(Agent{1.0, {2}}).quota, 0.0);
}

TEST(FracGfqProperties, BudgetAndQuotasOnRandomStreams) {
  const auto p = params(8, {3, 6, 9});
  const GfqSpec spec{{1, 2, 1}};
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto inst = gen_synthetic(p, 80, s, LabelModel{LabelModel::multi, 0.3});
    FracGfq pol(p, spec);
    Allocation x = Allocation::zeros(inst.size(), false);
    for (std::size_t t = 0; t < inst.size(); ++t) {
      x.decisions[t] = pol.step(inst.agents[t]).total();
      EXPECT_LE(pol.utilization(), 8 - 4 + 1e-9);
      EXPECT_LE(x.decisions[t], 1.0 + 1e-12);
    }
    EXPECT_LE(x.count(), 8 + 1e-9);
    bool coverable = true;
    for (int j = 1; j <= 3; ++j) {
      int n = 0;
      for (const auto& a : inst.agents) n += a.has_label(j);
      coverable &= n >= spec.quota_of(j);
    }
    if (coverable) {
      EXPECT_TRUE(gfq_satisfied(inst, x, spec)) << s;
    }
  }
}

TEST(FracGfqProperties, HardInstanceRatioWithinRegimeAlpha) {
  const std::vector<std::pair<ProblemParams, GfqSpec>> cases = {
      {params(5, {2, 4}), GfqSpec{{1, 1}}},
      {params(4, {5}), GfqSpec{{3}}},
      {params(6, {3, 6}), GfqSpec{{4, 0}}},
  };
  for (const auto& [p, spec] : cases) {
    const double alpha = build_frac_threshold(p, spec).alpha;
    const double worst = worst_hard_ratio(p, spec, 0.05);
    EXPECT_LE(worst, alpha + 1e-6);
    EXPECT_GE(worst, alpha - 0.05);
  }
}

TEST(RSetAside, QuotaShareAcceptedAndRoundingMatchesFractionalMean) {
  const auto p = params(5, {2, 4});
  const GfqSpec spec{{1, 1}};
  const auto phi = build_frac_threshold(p, spec);
  const auto inst = gen_synthetic(p, 40, 3, LabelModel{});
  const double frac = total_value(inst, run_frac_gfq(p, spec, inst));
  const RandomizedPolicy pol = [&](const Instance& i, Rng& rng) { return run_r_setaside(p, spec, phi, i, rng); };
  const auto mc = mc_expectation(pol, inst, 20000, 17);
  EXPECT_LE(std::abs(mc.mean_value - frac), 4 * mc.stderr_value + 1e-12);
  Rng rng(4);
  for (int r = 0; r < 200; ++r) {
    const auto x = run_r_setaside(p, spec, phi, inst, rng);
    EXPECT_LE(x.count(), 5);
    EXPECT_TRUE(gfq_satisfied(inst, x, spec));
  }
}

TEST(FracThreshold, JsonDescriptor) {
  const auto j = build_frac_threshold(params(4, {5}), GfqSpec{{3}}).to_json();
  EXPECT_EQ(j.at("regime"), "high_m");
  EXPECT_TRUE(j.contains("alpha"));
  EXPECT_TRUE(j.contains("v_star"));
}
