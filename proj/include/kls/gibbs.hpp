#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "configuration.hpp"
#include "errors.hpp"
#include "params.hpp"
#include "spectral.hpp"

namespace kls {

inline constexpr std::int64_t kMaxEnumerationSize = 20;

// Unnormalised Gibbs weights exp(-x H) summed over all 2^n configurations.
inline double partition_bruteforce(const ModelParams& params) {
  const std::int64_t n = params.n();
  if (n > kMaxEnumerationSize) throw TooLarge("brute-force partition limited to n <= 20");
  const double x = params.interaction();
  std::vector<long double> by_h(static_cast<std::size_t>(n) + 1, 0.0L);
  std::vector<std::int64_t> counts(static_cast<std::size_t>(n) + 1, 0);
  const std::uint64_t full = (n == 64) ? ~0ull : ((1ull << n) - 1);
  for (std::uint64_t c = 0; c <= full; ++c) {
    const std::uint64_t rot = ((c >> 1) | (c << (n - 1))) & full;
    ++counts[static_cast<std::size_t>(std::popcount(c & rot))];
  }
  long double z = 0.0L;
  for (std::size_t h = 0; h < counts.size(); ++h)
    z += static_cast<long double>(counts[h]) * std::exp(-static_cast<long double>(x) * h);
  return static_cast<double>(z);
}

// The Gibbs measure on a small torus, indexed by configuration code
// (bit i = zero-based site i).
struct MeasureTable {
  std::int64_t n = 0;
  double partition = 0.0;
  std::vector<double> prob;

  Configuration config(std::uint64_t code) const { return Configuration::from_bits(code, n); }
  double operator[](std::uint64_t code) const { return prob[code]; }
};

inline MeasureTable enumerate_measure(const ModelParams& params) {
  const std::int64_t n = params.n();
  if (n > kMaxEnumerationSize) throw TooLarge("enumeration limited to n <= 20");
  const double x = params.interaction();
  const std::uint64_t full = (1ull << n) - 1;
  MeasureTable t;
  t.n = n;
  t.prob.resize(static_cast<std::size_t>(full) + 1);
  long double z = 0.0L;
  for (std::uint64_t c = 0; c <= full; ++c) {
    const std::uint64_t rot = ((c >> 1) | (c << (n - 1))) & full;
    const double w = std::exp(-x * std::popcount(c & rot));
    t.prob[c] = w;
    z += w;
  }
  t.partition = static_cast<double>(z);
  for (auto& p : t.prob) p = static_cast<double>(p / z);
  return t;
}

// nu(eta^{z,z+1}) / nu(eta).
inline double weight_ratio_swap(const ModelParams& params, const Configuration& cfg, std::int64_t z) {
  const double x = params.interaction();
  if (cfg.size() < 4) {
    const auto dh = hamiltonian(swap_bond(cfg, z)) - hamiltonian(cfg);
    return std::exp(-x * static_cast<double>(dh));
  }
  const int e = (cfg.at(z) - cfg.at(z + 1)) * (cfg.at(z + 2) - cfg.at(z - 1));
  return std::exp(-x * e);
}

// First-order expansion of [sigma_z - 1](eta_z - eta_{z+1}) in centred
// variables: x * [c (eb_{z-1} - eb_{z+2}) + 2 (eb_z eb_{z+1} eb_{z+2} -
// eb_{z-1} eb_z eb_{z+1})]. With c = 1/2 the remainder is O(x^2).
inline constexpr double kExpansionLinearCoefficient = 0.5;

// Largest |exact - expansion| over the 16 local patterns, using the exact
// mean density of the torus for centring.
inline double assumption1a_residual(const ModelParams& params,
                                    double linear_coefficient = kExpansionLinearCoefficient) {
  const double x = params.interaction();
  const double rho = mean_density(params);
  double worst = 0.0;
  for (unsigned m = 0; m < 16; ++m) {
    const int e[4] = {int(m & 1), int((m >> 1) & 1), int((m >> 2) & 1), int((m >> 3) & 1)};
    double eb[4];
    for (int k = 0; k < 4; ++k) eb[k] = e[k] - rho;
    const int expo = (e[1] - e[2]) * (e[3] - e[0]);
    const double lhs = std::expm1(-x * expo) * (eb[1] - eb[2]);
    const double poly = x * (linear_coefficient * (eb[0] - eb[3]) +
                             2.0 * (eb[1] * eb[2] * eb[3] - eb[0] * eb[1] * eb[2]));
    worst = std::max(worst, std::abs(lhs - poly));
  }
  return worst;
}

// nu of the bad set: no two particles at distance one or two among labels
// x..x+ell (the complement of is_good_box). Ring transfer over pair states
// (eta_{i-1}, eta_i) with the forbidden pairs switched off, normalised by the
// unconstrained ring.
inline double bad_set_probability(const ModelParams& params, std::int64_t x, std::int64_t ell) {
  const std::int64_t n = params.n();
  if (ell < 1) throw DomainError("box length must be at least 1");
  if (ell > n) throw DomainError("box longer than the torus");
  if (n < 3) throw DomainError("torus too small for the pair transfer");
  const Transfer tr(params.interaction());
  const double e = std::exp(-params.interaction()) / tr.lambda_plus();
  const double one = 1.0 / tr.lambda_plus();

  Configuration dummy(n);
  std::vector<char> no_nn(static_cast<std::size_t>(n), 0), no_nnn(static_cast<std::size_t>(n), 0);
  for (std::int64_t y = x; y <= x + ell - 2; ++y) {
    no_nn[dummy.index_of(y)] = 1;
    no_nnn[dummy.index_of(y)] = 1;
  }
  no_nn[dummy.index_of(x + ell - 1)] = 1;

  using M4 = std::array<double, 16>;
  auto mul = [](const M4& a, const M4& b) {
    M4 c{};
    for (int i = 0; i < 4; ++i)
      for (int k = 0; k < 4; ++k) {
        if (a[i * 4 + k] == 0.0) continue;
        for (int j = 0; j < 4; ++j) c[i * 4 + j] += a[i * 4 + k] * b[k * 4 + j];
      }
    return c;
  };
  // State s = 2*eta_{i-1} + eta_i; step i adds eta_{i+1} and checks the pairs
  // (i, i+1) and (i-1, i+1).
  auto step = [&](std::size_t i, bool constrained) {
    M4 m{};
    for (int prev = 0; prev < 2; ++prev)
      for (int cur = 0; cur < 2; ++cur)
        for (int nxt = 0; nxt < 2; ++nxt) {
          if (constrained && cur && nxt && no_nn[i]) continue;
          const std::size_t im1 = (i + static_cast<std::size_t>(n) - 1) % static_cast<std::size_t>(n);
          if (constrained && prev && nxt && no_nnn[im1]) continue;
          m[(2 * prev + cur) * 4 + (2 * cur + nxt)] = (cur && nxt) ? e : one;
        }
    return m;
  };
  M4 con{}, free{};
  for (int i = 0; i < 4; ++i) con[i * 5] = free[i * 5] = 1.0;
  const M4 free_step = step(0, false);
  for (std::int64_t i = 0; i < n; ++i) {
    con = mul(con, step(static_cast<std::size_t>(i), true));
    free = mul(free, free_step);
  }
  double tc = 0.0, tf = 0.0;
  for (int i = 0; i < 4; ++i) {
    tc += con[i * 5];
    tf += free[i * 5];
  }
  return tc / tf;
}

}  // namespace kls
