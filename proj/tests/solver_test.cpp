#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "effcap/solver.hpp"

using namespace effcap;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

// Largest relative gap between two policies on the central 90% of the fading law.
double central_distance(const FadingModel& f, const PowerPolicy& a, const PowerPolicy& ref) {
  const PolicyInterpolant pa(a);
  const PolicyInterpolant pr(ref);
  double worst = 0.0;
  for (double z = f.quantile(0.05); z <= f.quantile(0.95); z *= 1.001) {
    const double a_z = pa(z);
    const double b = pr(z);
    if (b == 0.0 && a_z == 0.0) continue;  // both below their cutoffs
    worst = std::max(worst, b > 0.0 ? std::abs(a_z - b) / b : detail::kInf);
  }
  return worst;
}

PowerPolicy perturbed(const PowerPolicy& p, std::mt19937& rng, double size) {
  std::normal_distribution<double> noise(0.0, 1.0);
  PowerPolicy out = p;
  for (double& m : out.mu) m *= std::exp(size * noise(rng));
  const double scale = average_snr(p) / average_snr(out);
  for (double& m : out.mu) m *= scale;
  return out;
}

}  // namespace

TEST(Pointwise, GValueExamples) {
  const QosParams q{1.0, 1.0};
  EXPECT_NEAR(g_value(0.0, 2.0, 0.5, q, Constellation::gaussian()), 1.5, 1e-12);
  EXPECT_NEAR(g_value(0.0, 2.0, 0.5, q, Constellation::qpsk()), 1.5, 1e-9);
  // Gaussian: (1 + mu z)^{-(beta + 1)} z - alpha
  const double beta = q.beta();
  EXPECT_NEAR(g_value(0.7, 1.3, 0.2, q, Constellation::gaussian()),
              std::pow(1.0 + 0.91, -(beta + 1.0)) * 1.3 - 0.2, 1e-12);
  double prev = g_value(0.0, 3.0, 0.4, q, Constellation::qam16());
  for (double mu = 0.05; mu < 50.0; mu *= 1.5) {
    const double g = g_value(mu, 3.0, 0.4, q, Constellation::qam16());
    EXPECT_LT(g, prev) << mu;
    prev = g;
  }
}

TEST(Pointwise, GaussianMatchesClosedForm) {
  for (double theta : {1e-3, 0.1, 1.0, 10.0, 100.0}) {
    const QosParams q{theta, 1.0};
    for (double alpha : {1e-6, 0.05, 0.4}) {
      for (double ratio : {1.0001, 1.5, 10.0, 1e4}) {
        const double z = alpha * ratio;
        const double mu = solve_pointwise_mu(z, alpha, q, Constellation::gaussian());
        EXPECT_LT(rel(mu, gaussian_optimal_mu(z, alpha, q.beta())), 1e-9) << theta << " " << alpha << " " << ratio;
      }
    }
  }
}

TEST(Pointwise, ZeroAtOrBelowCutoff) {
  const QosParams q{1.0, 1.0};
  EXPECT_EQ(solve_pointwise_mu(0.3, 0.3, q, Constellation::qpsk()), 0.0);
  EXPECT_EQ(solve_pointwise_mu(0.1, 0.3, q, Constellation::qpsk()), 0.0);
  EXPECT_EQ(gaussian_optimal_mu(0.1, 0.3, 1.0), 0.0);
  EXPECT_THROW(solve_pointwise_mu(0.0, 0.3, q, Constellation::qpsk()), DomainError);
}

TEST(Pointwise, VanishingThetaMatchesMercury) {
  const QosParams q{1e-8, 1.0};
  const auto c = Constellation::bpsk();
  for (double alpha : {0.05, 0.3}) {
    for (double ratio : {1.01, 2.0, 30.0}) {
      const double z = alpha * ratio;
      const double oracle = mmse_inverse(c, std::min(1.0, alpha / z)) / z;
      EXPECT_LT(rel(solve_pointwise_mu(z, alpha, q, c), oracle), 1e-4) << alpha << " " << ratio;
    }
  }
}

TEST(Pointwise, ResidualWithinTolerance) {
  const SolverConfig cfg;
  for (const auto& c : {Constellation::qpsk(), Constellation::qam16(), Constellation::bpsk()}) {
    for (double theta : {0.01, 1.0, 30.0}) {
      const QosParams q{theta, 1.0};
      for (double z : {0.2, 1.0, 8.0}) {
        const double mu = solve_pointwise_mu(z, 0.1, q, c, cfg);
        EXPECT_LE(std::abs(g_value(mu, z, 0.1, q, c)), cfg.eps) << c.name() << " " << theta << " " << z;
      }
    }
  }
}

TEST(SolvePolicy, DualMapIsMonotone) {
  const auto f = FadingModel::rayleigh();
  const QosParams q{1.0, 1.0};
  double prev = detail::kInf;
  for (double alpha = 1e-3; alpha < 5.0; alpha *= 2.2) {
    const double avg = average_snr(policy_for_cutoff(f, alpha, q, Constellation::qpsk()));
    EXPECT_LT(avg, prev) << alpha;
    prev = avg;
  }
}

TEST(SolvePolicy, MeetsPowerConstraint) {
  for (const auto& f : {FadingModel::rayleigh(), FadingModel::nakagami(2.0), FadingModel::rician(3.16)}) {
    for (double snr : {0.01, 1.0, 100.0}) {
      const PowerPolicy p = solve_policy(f, {0.5, 1.0}, Constellation::qpsk(), snr);
      p.validate();
      EXPECT_NEAR(average_snr(p) / snr, 1.0, 1e-9) << f.describe() << " " << snr;
      EXPECT_GT(p.alpha, 0.0);
    }
  }
}

TEST(SolvePolicy, SubgradientAloneConverges) {
  SolverConfig cfg;
  cfg.polish = false;
  int rows = 0;
  cfg.trace = [&](const TraceRow&) { ++rows; };
  const PowerPolicy p = solve_policy(FadingModel::rayleigh(), {0.1, 1.0}, Constellation::qpsk(), 1.0, cfg);
  EXPECT_LE(std::abs(p.alpha * (1.0 - average_snr(p))), cfg.delta);
  EXPECT_GT(rows, 1);
  const PowerPolicy polished = solve_policy(FadingModel::rayleigh(), {0.1, 1.0}, Constellation::qpsk(), 1.0);
  EXPECT_LT(rel(p.alpha, polished.alpha), 1e-3);
}

TEST(SolvePolicy, IterationLimitCarriesIterate) {
  SolverConfig cfg;
  cfg.polish = false;
  cfg.max_outer = 2;
  try {
    solve_policy(FadingModel::rayleigh(), {1.0, 1.0}, Constellation::qpsk(), 1.0, cfg);
    FAIL() << "expected IterationLimitError";
  } catch (const IterationLimitError& e) {
    EXPECT_GT(e.last_iterate(), 0.0);
    EXPECT_NE(e.last_residual(), 0.0);
  }
}

TEST(SolvePolicy, RejectsBadArguments) {
  const auto f = FadingModel::rayleigh();
  const auto c = Constellation::qpsk();
  EXPECT_THROW(solve_policy(f, {0.0, 1.0}, c, 1.0), DomainError);
  EXPECT_THROW(solve_policy(f, {1.0, 1.0}, c, 0.0), DomainError);
  EXPECT_THROW(solve_policy(f, {-1.0, 1.0}, c, 1.0), ConfigError);
  SolverConfig cfg;
  cfg.zeta = 0.0;
  EXPECT_THROW(solve_policy(f, {1.0, 1.0}, c, 1.0, cfg), ConfigError);
}

TEST(ChannelInversion, Examples) {
  const PowerPolicy p = channel_inversion_policy(FadingModel::nakagami(2.0), 1.0);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p.mu[i] * p.grid.nodes[i], 0.5, 1e-14);
  const PowerPolicy r = channel_inversion_policy(FadingModel::rayleigh(), 1.0);
  for (double m : r.mu) EXPECT_EQ(m, 0.0);
  const PowerPolicy e = channel_inversion_policy(FadingModel::empirical({1.0, 1.0, 1.0}), 2.0);
  ASSERT_EQ(e.size(), 1u);
  EXPECT_DOUBLE_EQ(e.mu[0], 2.0);
}

TEST(Mercury, GaussianIsWaterfilling) {
  for (double level : {0.1, 0.5, 2.0}) {
    for (double z : {0.2, 1.0, 4.0, 50.0}) {
      const double wf = z > level ? 1.0 / level - 1.0 / z : 0.0;
      EXPECT_NEAR(mercury_mu(z, level, Constellation::gaussian()), wf, 1e-9 * (1.0 + wf)) << level << " " << z;
    }
  }
  const PowerPolicy p = mercury_waterfilling_policy(FadingModel::rayleigh(), Constellation::gaussian(), 1.0);
  EXPECT_NEAR(average_snr(p), 1.0, 1e-9);
}

TEST(Mercury, LimitsOfTheOptimalPolicy) {
  const auto f = FadingModel::rayleigh();
  for (const auto& c : {Constellation::qpsk(), Constellation::bpsk(), Constellation::qam16()}) {
    const PowerPolicy low = solve_policy(f, {1e-8, 1.0}, c, 1.0);
    const PowerPolicy wf = mercury_waterfilling_policy(f, c, 1.0);
    EXPECT_LT(rel(low.alpha, wf.alpha), 1e-3) << c.name();
    EXPECT_LE(central_distance(f, low, wf), 1e-3) << c.name();
    EXPECT_NEAR(average_rate(low, c), average_rate(wf, c), 1e-6);
  }
}

TEST(Mercury, LargeThetaApproachesChannelInversion) {
  // E{1/z} is finite for m = 2, so channel inversion is a nonzero policy.
  const auto f = FadingModel::nakagami(2.0);
  const PowerPolicy inv = channel_inversion_policy(f, 1.0);
  for (const auto& c : {Constellation::qpsk(), Constellation::gaussian()}) {
    const PowerPolicy high = solve_policy(f, {100.0, 1.0}, c, 1.0);
    EXPECT_LE(central_distance(f, high, inv), 0.05) << c.name();
  }
}

TEST(Mercury, ReceivedSnrFlattensWithTheta) {
  const auto f = FadingModel::rayleigh();
  const double lo = f.quantile(0.05);
  const double hi = f.quantile(0.95);
  double prev = detail::kInf;
  for (double theta : {1.0, 10.0, 100.0, 1000.0}) {
    const PowerPolicy p = solve_policy(f, {theta, 1.0}, Constellation::qpsk(), 1.0);
    double rmin = detail::kInf;
    double rmax = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double z = p.grid.nodes[i];
      if (z < lo || z > hi || p.mu[i] == 0.0) continue;
      rmin = std::min(rmin, p.mu[i] * z);
      rmax = std::max(rmax, p.mu[i] * z);
    }
    const double spread = (rmax - rmin) / rmax;
    EXPECT_LT(spread, prev) << theta;
    prev = spread;
  }
}

TEST(PolicyOrdering, OptimalBeatsConstantAndPerturbations) {
  const auto f = FadingModel::rayleigh();
  std::mt19937 rng(7u);
  for (const auto& c : {Constellation::qpsk(), Constellation::gaussian()}) {
    for (double theta : {0.1, 1.0}) {
      const QosParams q{theta, 1.0};
      const PowerPolicy opt = solve_policy(f, q, c, 1.0);
      const double best = effective_capacity(opt, q, c);
      EXPECT_GE(best, effective_capacity(constant_power_policy(f, 1.0), q, c)) << c.name() << theta;
      for (int trial = 0; trial < 20; ++trial) {
        const PowerPolicy p = perturbed(opt, rng, 0.05);
        EXPECT_LE(effective_capacity(p, q, c), best + 1e-12) << trial;
      }
    }
  }
}

TEST(PolicyOrdering, MatchedPolicyBeatsMismatched) {
  const auto f = FadingModel::rayleigh();
  const auto qpsk = Constellation::qpsk();
  for (double theta : {0.1, 1.0}) {
    const QosParams q{theta, 1.0};
    for (double snr : {0.5, 5.0, 20.0}) {
      const double matched = effective_capacity(solve_policy(f, q, qpsk, snr), q, qpsk);
      const double mismatched = effective_capacity(solve_policy(f, q, Constellation::gaussian(), snr), q, qpsk);
      EXPECT_GE(matched, mismatched - 1e-12) << theta << " " << snr;
    }
  }
}

class EeTest : public ::testing::Test {
 protected:
  FadingModel f = FadingModel::rayleigh();
  Constellation c = Constellation::gaussian();
  QosParams q{0.1, 1.0};
  double cap = std::pow(10.0, 0.6);
  EeParams base{0.0, 1.0, 1.0, 1.0};
};

TEST_F(EeTest, ZeroRequirementIsPowerOptimum) {
  const EeSolution s = solve_policy_ee(f, q, c, base, cap);
  EXPECT_EQ(s.binding, Binding::PowerBinding);
  EXPECT_EQ(s.policy.mu, solve_policy(f, q, c, cap).mu);
}

TEST_F(EeTest, ExcessiveRequirementIsInfeasible) {
  const EeOptimum top = max_achievable_ee(f, q, c, base, cap);
  EeParams ee = base;
  ee.ee_min = 1.05 * top.ee;
  const EeSolution s = solve_policy_ee(f, q, c, ee, cap);
  EXPECT_EQ(s.binding, Binding::Infeasible);
  for (double m : s.policy.mu) EXPECT_EQ(m, 0.0);
  EXPECT_STREQ(to_string(s.binding), "infeasible");
}

TEST_F(EeTest, BindingSolutionFollowsClosedForm) {
  const EeOptimum top = max_achievable_ee(f, q, c, base, cap);
  EeParams ee = base;
  ee.ee_min = 0.9 * top.ee;
  const EeSolution s = solve_policy_ee(f, q, c, ee, cap);
  ASSERT_EQ(s.binding, Binding::EeBinding);
  EXPECT_GT(s.nu, 0.0);
  EXPECT_NEAR(achieved_ee(s.policy, q, c, ee) / ee.ee_min, 1.0, 1e-4);
  EXPECT_LT(average_snr(s.policy), cap);
  for (std::size_t i = 0; i < s.policy.size(); ++i) {
    const double z = s.policy.grid.nodes[i];
    const double cf = gaussian_optimal_mu(z, s.policy.alpha, q.beta());
    EXPECT_NEAR(s.policy.mu[i], cf, 1e-9 * (1.0 + cf)) << z;
  }
  // The cutoff satisfies alpha = r kappa/xi E{e^{-theta TB I}} / log2 e with r = nu / (1 + nu).
  const double r = s.nu / (1.0 + s.nu);
  const double pred = r * ee.kappa() / ee.xi * std::exp(log_expected_exp_neg(s.policy, q, c)) / detail::kLog2e;
  EXPECT_LT(rel(s.policy.alpha, pred), 1e-8);
}

TEST_F(EeTest, MaximumMatchesSnrScan) {
  const EeOptimum top = max_achievable_ee(f, q, c, base, cap);
  double scan = 0.0;
  for (double snr = 0.05; snr <= cap; snr *= 1.02) {
    const PowerPolicy p = solve_policy(f, q, c, snr);
    scan = std::max(scan, achieved_ee(p, q, c, base));
  }
  EXPECT_GE(top.ee, scan - 1e-9);
  EXPECT_LT(rel(top.ee, scan), 1e-4);
  EXPECT_LT(top.snr, cap);

  EeParams ee = base;
  ee.ee_min = top.ee;
  const EeSolution s = solve_policy_ee(f, q, c, ee, cap);
  ASSERT_EQ(s.binding, Binding::EeBinding);
  EXPECT_GT(s.nu, 1e6) << "multiplier at the EE-limited optimum";
  EXPECT_LT(rel(effective_capacity(s.policy, q, c), effective_capacity(top.policy, q, c)), 1e-6);
}

TEST_F(EeTest, CapacityDecreasesWithRequirement) {
  const EeOptimum top = max_achievable_ee(f, q, c, base, cap);
  double prev = detail::kInf;
  for (double pct : {0.0, 0.5, 0.8, 0.9, 0.95, 1.0}) {
    EeParams ee = base;
    ee.ee_min = pct * top.ee;
    const EeSolution s = solve_policy_ee(f, q, c, ee, cap);
    ASSERT_NE(s.binding, Binding::Infeasible) << pct;
    const double cap_e = effective_capacity(s.policy, q, c);
    EXPECT_LE(cap_e, prev + 1e-12) << pct;
    prev = cap_e;
  }
}

TEST_F(EeTest, NoiseScaling) {
  const PowerPolicy p = solve_policy(f, q, c, 1.0);
  EeParams doubled = base;
  doubled.n0b = 2.0;
  EXPECT_NEAR(achieved_ee(p, q, c, doubled), 0.5 * achieved_ee(p, q, c, base), 1e-15);
  EeParams none{0.1, 0.0, 1.0, 1.0};
  PowerPolicy zero = p;
  std::fill(zero.mu.begin(), zero.mu.end(), 0.0);
  EXPECT_THROW(achieved_ee(zero, q, c, none), DomainError);
  EXPECT_THROW(max_achievable_ee(f, q, c, none, cap), ConfigError);
  EeParams bad = base;
  bad.xi = 1.5;
  EXPECT_THROW(solve_policy_ee(f, q, c, bad, cap), ConfigError);
}
