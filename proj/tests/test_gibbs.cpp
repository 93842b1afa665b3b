#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <set>

#include "kls/bridge_sampler.hpp"
#include "kls/estimators.hpp"
#include "kls/gibbs.hpp"
#include "kls/mobility.hpp"
#include "kls/spectral.hpp"
#include "kls/stats.hpp"

using namespace kls;

namespace {

// Expectation of a function of the configuration under the enumerated table.
template <class F>
double expect(const MeasureTable& t, F f) {
  long double s = 0.0L;
  for (std::uint64_t c = 0; c < t.prob.size(); ++c) s += t.prob[c] * f(t.config(c));
  return static_cast<double>(s);
}

// Centred moment by inclusion-exclusion over raw moments, accumulated in
// long double: an independent route to centered_correlation.
long double centered_by_inclusion_exclusion(const ModelParams& p, const std::vector<std::int64_t>& sites) {
  const double rho = mean_density(p);
  const std::size_t m = sites.size();
  long double acc = 0.0L;
  for (std::uint64_t mask = 0; mask < (1ull << m); ++mask) {
    std::vector<std::int64_t> sub;
    for (std::size_t i = 0; i < m; ++i)
      if ((mask >> i) & 1u) sub.push_back(sites[i]);
    const long double raw = sub.empty() ? 1.0L : raw_moment(p, cyclic_gaps(sub, p.n()));
    acc += raw * std::pow(static_cast<long double>(-rho), static_cast<long double>(m - sub.size()));
  }
  return acc;
}

}  // namespace

TEST(Spectral, TraceAndDeterminantIdentities) {
  for (double alpha : {0.5, 1.0, 1.5, 2.0, 3.0})
    for (std::int64_t n : {2, 5, 17, 100, 4096}) {
      const auto s = spectral(ModelParams(n, 0.0, 0.5, alpha));
      const double e = std::exp(-s.interaction);
      EXPECT_NEAR(s.lambda_plus + s.lambda_minus, 1.0 + e, 1e-14);
      EXPECT_NEAR(s.lambda_plus * s.lambda_minus, e - 1.0, 1e-14);
      EXPECT_LT(s.lambda_minus, 0.0);
    }
}

TEST(Spectral, NoInteraction) {
  const auto s = spectral(ModelParams(12, 0.0, 0.5, 1.0, 0.0));
  EXPECT_DOUBLE_EQ(s.lambda_plus, 2.0);
  EXPECT_DOUBLE_EQ(s.lambda_minus, 0.0);
  EXPECT_NEAR(s.log_z, 12 * std::log(2.0), 1e-13);
  EXPECT_DOUBLE_EQ(mean_density(ModelParams(12, 0.0, 0.5, 1.0, 0.0)), 0.5);
}

TEST(Spectral, SmallEigenvalueScale) {
  // lambda_- ~ -x/2 as x -> 0.
  for (std::int64_t n : {1 << 8, 1 << 12, 1 << 16}) {
    const ModelParams p(n, 0.0, 0.5, 1.5);
    EXPECT_NEAR(spectral(p).lambda_minus / (-0.5 * p.interaction()), 1.0, 2 * p.interaction());
  }
}

// Frozen values from tests/oracles/gibbs_oracle.py (50-digit enumeration).
TEST(Spectral, OracleValuesAtTen) {
  const ModelParams p(10, 0.0, 0.5, 1.5);
  EXPECT_NEAR(spectral(p).log_z, 6.8539577031649032562, 1e-13);
  EXPECT_NEAR(mean_density(p), 0.49221894096275808784, 1e-15);
  EXPECT_NEAR(raw_moment(p, {1, 9}), 0.2403040682664658569, 1e-15);
  EXPECT_NEAR(raw_moment(p, {2, 8}), 0.24229509872201759182, 1e-15);
  EXPECT_NEAR(raw_moment(p, {3, 1, 4, 2}), 0.058224468523422730739, 1e-15);
  EXPECT_NEAR(centered_correlation(p, {0, 1}), -0.0019754175760332749739, 1e-16);
  EXPECT_NEAR(centered_correlation(p, {0, 5}) / -1.5416482295256746063e-11, 1.0, 1e-9);
  EXPECT_NEAR(centered_correlation(p, {0, 1, 2}) / 2.4296947454890372551e-7, 1.0, 1e-10);
  EXPECT_NEAR(centered_correlation(p, {0, 2, 5, 7}) / 2.4377723362149123171e-10, 1.0, 1e-9);
}

TEST(Partition, SpectralMatchesBruteForce) {
  for (double alpha : {0.8, 1.2, 1.5, 2.0})
    for (std::int64_t n = 1; n <= 16; ++n) {
      const ModelParams p(n, 0.0, 0.5, alpha);
      const double zb = partition_bruteforce(p);
      EXPECT_NEAR(std::exp(spectral(p).log_z) / zb, 1.0, 1e-12) << n << " " << alpha;
    }
  EXPECT_THROW(partition_bruteforce(ModelParams(21, 0.0, 0.5, 1.0)), TooLarge);
  EXPECT_THROW(enumerate_measure(ModelParams(21, 0.0, 0.5, 1.0)), TooLarge);
}

// The occupied index of the 2x2 transfer matrix is the one carrying e^-x;
// with that choice the closed form reproduces the enumerated density, and the
// other choice does not.
TEST(MeanDensity, IndexConventionAgainstEnumeration) {
  for (std::int64_t n : {3, 4, 7, 10, 13}) {
    const ModelParams p(n, 0.0, 0.5, 0.7);
    const auto t = enumerate_measure(p);
    const double rho = expect(t, [](const Configuration& c) { return c.at(1); });
    EXPECT_NEAR(mean_density(p), rho, 1e-14);
    const Transfer tr(p.interaction());
    const double empty_entry = (tr.w_minus() + tr.w_plus() * tr.ratio_pow(n)) / tr.z_norm(n);
    EXPECT_GT(std::abs(empty_entry - rho), 1e-3);
  }
}

TEST(MeanDensity, ClosedFormWithRawPowers) {
  for (std::int64_t n : {4, 9, 30}) {
    const ModelParams p(n, 0.0, 0.5, 1.0);
    const auto s = spectral(p);
    const double lp = s.lambda_plus, lm = s.lambda_minus;
    const double num = std::pow(lp, n) * (lp - 1) - std::pow(lm, n) * (lm - 1);
    const double den = (lp - lm) * (std::pow(lp, n) + std::pow(lm, n));
    EXPECT_NEAR(mean_density(p), num / den, 1e-14);
  }
  // Stays finite and inside (0, 1/2] where raw powers overflow.
  const double rho = mean_density(ModelParams(1 << 20, 0.0, 0.5, 0.5));
  EXPECT_TRUE(std::isfinite(rho));
  EXPECT_GT(rho, 0.49);
  EXPECT_LE(rho, 0.5);
}

TEST(RawMoment, MatchesEnumeration) {
  std::mt19937_64 g(1);
  for (std::int64_t n = 2; n <= 14; ++n) {
    const ModelParams p(n, 0.0, 0.5, 1.2);
    const auto t = enumerate_measure(p);
    for (int trial = 0; trial < 20; ++trial) {
      const int m = 1 + static_cast<int>(g() % std::min<std::int64_t>(4, n));
      std::set<std::int64_t> s;
      while (static_cast<int>(s.size()) < m) s.insert(static_cast<std::int64_t>(g() % n));
      std::vector<std::int64_t> sites(s.begin(), s.end());
      const double e = expect(t, [&](const Configuration& c) {
        int v = 1;
        for (auto q : sites) v *= c.at(q + 1);
        return v;
      });
      EXPECT_NEAR(raw_moment(p, cyclic_gaps(sites, n)), e, 1e-13);
    }
  }
}

TEST(RawMoment, Errors) {
  const ModelParams p(8, 0.0, 0.5, 1.0);
  EXPECT_THROW(raw_moment(p, {3, 4}), GapMismatch);
  EXPECT_THROW(raw_moment(p, {}), GapMismatch);
  EXPECT_THROW(centered_correlation(p, {1, 9}), DuplicateSite);
}

TEST(CenteredCorrelation, MatchesEnumerationAndInclusionExclusion) {
  std::mt19937_64 g(2);
  for (std::int64_t n : {5, 8, 11, 14}) {
    const ModelParams p(n, 0.0, 0.5, 0.9);
    const auto t = enumerate_measure(p);
    const double rho = mean_density(p);
    for (int trial = 0; trial < 15; ++trial) {
      const int m = 1 + static_cast<int>(g() % 5);
      std::set<std::int64_t> s;
      while (static_cast<int>(s.size()) < m) s.insert(static_cast<std::int64_t>(g() % n));
      std::vector<std::int64_t> sites(s.begin(), s.end());
      const double e = expect(t, [&](const Configuration& c) {
        double v = 1;
        for (auto q : sites) v *= c.at(q + 1) - rho;
        return v;
      });
      const double cc = centered_correlation(p, sites);
      EXPECT_NEAR(cc, e, 1e-14);
      EXPECT_NEAR(cc, static_cast<double>(centered_by_inclusion_exclusion(p, sites)), 1e-14);
    }
  }
}

// |E prod eb| <= C n^{-alpha d} with d the smallest gap; here C = 1.
TEST(CenteredCorrelation, DecaysWithSmallestGap) {
  for (double alpha : {1.0, 1.5, 2.0})
    for (std::int64_t n : {16, 64, 256, 1024}) {
      const ModelParams p(n, 0.0, 0.5, alpha);
      const double x = p.interaction();
      for (std::int64_t d = 1; d <= 4; ++d) {
        for (int m = 2; m <= 6; ++m) {
          // Gaps d, d+1, d, d+2, ... so the smallest gap is d.
          std::vector<std::int64_t> sites{0};
          for (int i = 1; i < m; ++i) sites.push_back(sites.back() + d + (i % 2 ? 0 : i / 2));
          if (sites.back() + d > n) continue;
          const auto gaps = cyclic_gaps(sites, n);
          const std::int64_t dmin = *std::min_element(gaps.begin(), gaps.end());
          EXPECT_LE(std::abs(centered_correlation(p, sites)), std::pow(x, static_cast<double>(dmin)))
              << n << " " << alpha << " " << d << " " << m;
        }
      }
    }
}

TEST(PatternProbability, MatchesEnumeration) {
  for (std::int64_t n : {4, 6, 9}) {
    const ModelParams p(n, 0.0, 0.5, 0.6);
    const auto t = enumerate_measure(p);
    for (int m = 1; m <= std::min<std::int64_t>(n, 5); ++m)
      for (std::uint64_t bits = 0; bits < (1u << m); ++bits) {
        const double e = expect(t, [&](const Configuration& c) { return c.window(3, m) == bits ? 1.0 : 0.0; });
        EXPECT_NEAR(pattern_probability(p, bits, m), e, 1e-14);
      }
  }
}

TEST(WeightRatio, AgreesWithWeights) {
  const ModelParams p(9, 0.0, 0.5, 0.8);
  const double x = p.interaction();
  EXPECT_NEAR(weight_ratio_swap(p, Configuration::from_string("001010000"), 3), std::exp(-x), 1e-15);
  const auto t = enumerate_measure(p);
  for (std::uint64_t c = 0; c < t.prob.size(); ++c) {
    const auto cfg = t.config(c);
    for (std::int64_t z = 1; z <= 9; ++z)
      EXPECT_NEAR(weight_ratio_swap(p, cfg, z), t[swap_bond(cfg, z).code()] / t[c], 1e-13);
  }
  // Tiny tori where the four-site neighbourhood overlaps itself.
  for (std::int64_t n : {2, 3}) {
    const ModelParams q(n, 0.0, 0.5, 0.8);
    const auto tq = enumerate_measure(q);
    for (std::uint64_t c = 0; c < tq.prob.size(); ++c)
      EXPECT_NEAR(weight_ratio_swap(q, tq.config(c), 1), tq[swap_bond(tq.config(c), 1).code()] / tq[c], 1e-14);
  }
}

TEST(Assumption1a, ExactlyZeroWithoutInteraction) {
  EXPECT_EQ(assumption1a_residual(ModelParams(64, 0.0, 0.5, 1.0, 0.0)), 0.0);
}

TEST(Assumption1a, SecondOrderRemainder) {
  for (double alpha : {0.5, 1.0, 1.5}) {
    std::vector<double> lx, ly;
    for (int k = 6; k <= 16; ++k) {
      const ModelParams p(1 << k, 0.0, 0.5, alpha);
      lx.push_back(std::log(static_cast<double>(p.n())));
      ly.push_back(std::log(assumption1a_residual(p)));
    }
    EXPECT_NEAR(least_squares(lx, ly).slope, -2.0 * alpha, 0.1) << alpha;
  }
}

// With a linear coefficient of 1/4 the remainder is first order: the
// expansion is only consistent with coefficient 1/2.
TEST(Assumption1a, QuarterCoefficientLeavesFirstOrderError) {
  std::vector<double> lx, ly;
  for (int k = 6; k <= 16; ++k) {
    const ModelParams p(1 << k, 0.0, 0.5, 1.0);
    lx.push_back(std::log(static_cast<double>(p.n())));
    ly.push_back(std::log(assumption1a_residual(p, 0.25)));
  }
  EXPECT_NEAR(least_squares(lx, ly).slope, -1.0, 0.05);
}

TEST(BadSet, MatchesEnumeration) {
  for (std::int64_t n : {5, 8, 12, 14})
    for (std::int64_t ell = 1; ell <= n; ++ell) {
      const ModelParams p(n, 0.0, 0.5, 0.9);
      const auto t = enumerate_measure(p);
      const double e = expect(t, [&](const Configuration& c) { return is_good_box(c, 2, ell) ? 0.0 : 1.0; });
      EXPECT_NEAR(bad_set_probability(p, 2, ell), e, 1e-14) << n << " " << ell;
    }
}

TEST(BadSet, OracleValue) {
  EXPECT_NEAR(bad_set_probability(ModelParams(12, 0.0, 0.5, 1.0), 1, 5), 0.22760808903531911654, 1e-15);
}

TEST(BridgeSampler, ChainAlgebra) {
  const ModelParams p(10, 0.0, 0.5, 0.7);
  const BridgeSampler s(p);
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(s.kernel(i, 0) + s.kernel(i, 1), 1.0, 1e-15);
  // Closed-form powers agree with repeated multiplication.
  double P[2][2] = {{s.kernel(0, 0), s.kernel(0, 1)}, {s.kernel(1, 0), s.kernel(1, 1)}};
  double acc[2][2] = {{1, 0}, {0, 1}};
  for (int k = 1; k <= 10; ++k) {
    double nx[2][2];
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) nx[i][j] = acc[i][0] * P[0][j] + acc[i][1] * P[1][j];
    std::memcpy(acc, nx, sizeof acc);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) EXPECT_NEAR(s.power(k, i, j), acc[i][j], 1e-14);
  }
  // The second eigenvalue of the kernel is lambda_-/lambda_+.
  const double tr = P[0][0] + P[1][1];
  EXPECT_NEAR(tr - 1.0, Transfer(p.interaction()).ratio(), 1e-15);
}

TEST(BridgeSampler, LawMatchesEnumerationAtMonteCarloRate) {
  const ModelParams p(6, 0.0, 0.5, 0.3);  // strong interaction: visibly non-uniform
  const auto small = sample_tv(p, 20000, 5);
  const auto large = sample_tv(p, 320000, 6);
  // TV tracks its Monte Carlo expectation at both sizes ...
  EXPECT_LT(small.tv, 1.3 * small.expected_floor);
  EXPECT_LT(large.tv, 1.3 * large.expected_floor);
  EXPECT_GT(large.tv, 0.7 * large.expected_floor);
  // ... and shrinks like M^-1/2 between them.
  EXPECT_LT(large.tv, 0.4 * small.tv);
}

TEST(BridgeSampler, ReproducibleStreams) {
  const ModelParams p(40, 0.0, 0.5, 1.0);
  Rng a(9, 3), b(9, 3), c(9, 4);
  const auto x = sample_exact(p, a), y = sample_exact(p, b), z = sample_exact(p, c);
  EXPECT_EQ(x, y);
  EXPECT_FALSE(x == z);
}

TEST(Partition, SmallTori) {
  EXPECT_EQ(partition_bruteforce(ModelParams(4, 0.0, 0.5, 1.0, 0.0)), 16.0);
  const ModelParams p2(2, 0.0, 0.5, 1.0);
  EXPECT_NEAR(partition_bruteforce(p2), 3.0 + std::exp(-2.0 * p2.interaction()), 1e-15);
  for (std::int64_t n : {3, 7, 12}) {
    const ModelParams p(n, 0.0, 0.5, 0.6);
    EXPECT_NEAR(std::exp(Transfer(p.interaction()).log_z(n)), partition_bruteforce(p), 1e-12 * partition_bruteforce(p));
  }
}

TEST(MeanDensity, ApproachesHalfAtRateOfInteraction) {
  double worst = 0.0;
  for (int k = 4; k <= 14; ++k) {
    const ModelParams p(1 << k, 0.0, 0.5, 1.5);
    const double rho = mean_density(p);
    EXPECT_LT(rho, 0.5);
    worst = std::max(worst, std::abs(rho - 0.5) / p.interaction());
  }
  EXPECT_LE(worst, 0.25);
}

TEST(RawMoment, SmallCases) {
  const ModelParams p(12, 0.0, 0.5, 0.9);
  EXPECT_NEAR(raw_moment(p, {12}), mean_density(p), 1e-15);
  const ModelParams free(12, 0.0, 0.5, 1.0, 0.0);
  for (int m = 1; m <= 4; ++m) {
    std::vector<std::int64_t> gaps(static_cast<std::size_t>(m), 0);
    for (int i = 0; i < m; ++i) gaps[static_cast<std::size_t>(i)] = (i + 1 < m) ? 2 : 12 - 2 * (m - 1);
    EXPECT_NEAR(raw_moment(free, gaps), std::pow(0.5, m), 1e-15);
  }
  const auto t = enumerate_measure(p);
  const double e = expect(t, [](const Configuration& c) { return double(c.at(1) * c.at(4) * c.at(8)); });
  EXPECT_NEAR(raw_moment(p, {3, 4, 5}), e, 1e-14);
}

TEST(CenteredCorrelation, VanishesWithoutInteraction) {
  const ModelParams p(16, 0.0, 0.5, 1.0, 0.0);
  EXPECT_EQ(centered_correlation(p, {0, 1}), 0.0);
  EXPECT_EQ(centered_correlation(p, {0, 3, 7}), 0.0);
  EXPECT_EQ(centered_correlation(p, {2}), 0.0);
}

TEST(WeightRatio, IdentityAndInvolution) {
  const ModelParams p(10, 0.0, 0.5, 0.6);
  std::mt19937_64 g(41);
  for (int k = 0; k < 200; ++k) {
    const auto c = Configuration::from_bits(g() & 1023, 10);
    const auto z = static_cast<std::int64_t>(g() % 10);
    if (c.at(z) == c.at(z + 1)) EXPECT_EQ(weight_ratio_swap(p, c, z), 1.0);
    EXPECT_NEAR(weight_ratio_swap(p, c, z) * weight_ratio_swap(p, swap_bond(c, z), z), 1.0, 1e-15);
  }
}

// Pattern (1,1,0,0) at z-1..z+2: the residual is at least the hand value
// |e^x - 1 - x (1/2 + 2 rho (1 - rho))|.
TEST(Assumption1a, HandValueOfOnePattern) {
  const ModelParams p(128, 0.0, 0.5, 1.0);
  const double x = p.interaction(), rho = mean_density(p);
  const double hand = std::abs(std::expm1(x) - x * (0.5 + 2.0 * rho * (1.0 - rho)));
  EXPECT_GT(hand, 0.0);
  EXPECT_GE(assumption1a_residual(p), hand);
}

TEST(BadSet, ProductMeasureAndShortBox) {
  // At x = 0 the box sees seven independent fair bits.
  const ModelParams free(12, 0.0, 0.5, 1.0, 0.0);
  int bad = 0;
  for (unsigned m = 0; m < 128; ++m) {
    auto b = [&](int k) { return (m >> k) & 1u; };
    bool good = b(5) && b(6);
    for (int y = 0; y <= 4; ++y) good = good || (b(y) && (b(y + 1) || b(y + 2)));
    bad += !good;
  }
  EXPECT_NEAR(bad_set_probability(free, 3, 6), bad / 128.0, 1e-15);
  // A box of length one is bad unless both of its sites are occupied.
  EXPECT_NEAR(bad_set_probability(free, 3, 1), 0.75, 1e-15);
  const ModelParams p(12, 0.0, 0.5, 0.8);
  EXPECT_NEAR(bad_set_probability(p, 3, 1), 1.0 - pattern_probability(p, 0b11, 2), 1e-15);
}

TEST(Enumeration, BasicProperties) {
  const ModelParams p(10, 0.0, 0.5, 0.5);
  const auto t = enumerate_measure(p);
  long double s = 0.0L;
  for (double v : t.prob) s += v;
  EXPECT_NEAR(static_cast<double>(s), 1.0, 1e-14);
  const auto best = std::max_element(t.prob.begin(), t.prob.end()) - t.prob.begin();
  EXPECT_EQ(hamiltonian(t.config(static_cast<std::uint64_t>(best))), 0);
  for (std::int64_t site = 1; site <= 10; ++site)
    EXPECT_NEAR(expect(t, [&](const Configuration& c) { return double(c.at(site)); }), mean_density(p), 1e-14);
}

// At x = 0 the sampler draws uniform configurations: chi-square over the
// 256 states of the n = 8 torus, and the one-point mean.
TEST(BridgeSampler, UniformWithoutInteraction) {
  const ModelParams p(8, 0.0, 0.5, 1.0, 0.0);
  const BridgeSampler s(p);
  Rng rng(77, 0);
  const int M = 256000;
  std::vector<int> hits(256, 0);
  RunningStats one;
  for (int k = 0; k < M; ++k) {
    const auto c = s.sample(rng);
    ++hits[c.code()];
    one.add(c.at(1));
  }
  double chi2 = 0.0;
  for (int h : hits) chi2 += (h - 1000.0) * (h - 1000.0) / 1000.0;
  EXPECT_LT(chi2, 255.0 + 5.0 * std::sqrt(2.0 * 255.0));
  EXPECT_LE(std::abs(one.mean() - 0.5), 3.0 * one.stderr_mean());
}
