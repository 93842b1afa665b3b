#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "configuration.hpp"
#include "errors.hpp"
#include "params.hpp"
#include "rates.hpp"

namespace kls {

inline constexpr std::int64_t kMaxGeneratorEnumeration = 16;

// Local function of the sites centre-r..centre+r, tabulated on the 2^(2r+1)
// patterns (bit k = site centre-r+k). Label 0 is site n.
class CylinderFunction {
 public:
  CylinderFunction(int radius, std::vector<double> table, std::int64_t centre = 0)
      : r_(radius), table_(std::move(table)), centre_(centre) {
    if (radius < 0 || radius > 10) throw DomainError("cylinder radius out of range");
    if (table_.size() != (std::size_t{1} << (2 * radius + 1)))
      throw DomainError("cylinder table must have 2^(2r+1) entries");
  }

  template <class F>
  static CylinderFunction from(int radius, F f, std::int64_t centre = 0) {
    std::vector<double> t(std::size_t{1} << (2 * radius + 1));
    for (std::size_t m = 0; m < t.size(); ++m) t[m] = f(static_cast<std::uint64_t>(m));
    return {radius, std::move(t), centre};
  }

  int radius() const { return r_; }

  double operator()(const Configuration& cfg) const {
    if (2 * r_ + 1 > cfg.size()) throw DomainError("cylinder support exceeds the torus");
    return table_[cfg.window(centre_ - r_, 2 * r_ + 1)];
  }

 private:
  int r_;
  std::vector<double> table_;
  std::int64_t centre_;
};

// (L f)(eta) = sum_x c_{x,x+1}(eta) [f(eta^{x,x+1}) - f(eta)].
template <class F>
double generator_apply(const ModelParams& params, const F& f, const Configuration& cfg) {
  const auto rates = rate_lookup(params);
  const double f0 = f(cfg);
  double acc = 0.0;
  Configuration work = cfg;
  for (std::int64_t x = 1; x <= cfg.size(); ++x) {
    const double c = rates[cfg.pattern4(x)];
    if (c == 0.0) continue;
    swap_bond_inplace(work, x);
    acc += c * (f(work) - f0);
    swap_bond_inplace(work, x);
  }
  return acc;
}

namespace detail {

inline std::vector<double> gibbs_weights(std::int64_t n, double x) {
  const std::uint64_t full = (1ull << n) - 1;
  std::vector<double> w(static_cast<std::size_t>(full) + 1);
  for (std::uint64_t c = 0; c <= full; ++c) {
    const std::uint64_t rot = ((c >> 1) | (c << (n - 1))) & full;
    w[c] = std::exp(-x * std::popcount(c & rot));
  }
  return w;
}

inline void require_small(const ModelParams& params) {
  if (params.n() > kMaxGeneratorEnumeration)
    throw TooLarge("exhaustive generator checks limited to n <= 16");
  if (params.n() < 3) throw DomainError("exhaustive generator checks need n >= 3");
}

}  // namespace detail

// max_eta |sum_x [w(eta^{x,x+1}) c_x(eta^{x,x+1}) - w(eta) c_x(eta)]| / max w
// for the Gibbs weights w = exp(-x' H). x' defaults to the model's own x;
// a different value gives a deliberately wrong measure for negative controls.
inline double global_balance_residual(const ModelParams& params,
                                      std::optional<double> measure_interaction = std::nullopt) {
  detail::require_small(params);
  const std::int64_t n = params.n();
  const auto w = detail::gibbs_weights(n, measure_interaction.value_or(params.interaction()));
  const auto rates = rate_lookup(params);
  const double wmax = *std::max_element(w.begin(), w.end());
  double worst = 0.0;
  for (std::uint64_t c = 0; c < w.size(); ++c) {
    const Configuration cfg = Configuration::from_bits(c, n);
    double acc = 0.0;
    for (std::int64_t x = 1; x <= n; ++x) {
      const Configuration sw = swap_bond(cfg, x);
      acc += w[sw.code()] * rates[sw.pattern4(x)] - w[c] * rates[cfg.pattern4(x)];
    }
    worst = std::max(worst, std::abs(acc));
  }
  return worst / wmax;
}

// E_nu[L f], zero for every f exactly when nu is stationary.
template <class F>
double stationarity_residual(const ModelParams& params, const F& f) {
  detail::require_small(params);
  const std::int64_t n = params.n();
  const auto w = detail::gibbs_weights(n, params.interaction());
  long double z = 0.0L, acc = 0.0L;
  for (std::uint64_t c = 0; c < w.size(); ++c) {
    z += w[c];
    acc += w[c] * generator_apply(params, f, Configuration::from_bits(c, n));
  }
  return static_cast<double>(acc / z);
}

// D(f) = 1/2 E_nu[sum_x c_x (f(eta^{x,x+1}) - f(eta))^2].
template <class F>
double dirichlet_form(const ModelParams& params, const F& f) {
  detail::require_small(params);
  const std::int64_t n = params.n();
  const auto w = detail::gibbs_weights(n, params.interaction());
  const auto rates = rate_lookup(params);
  long double z = 0.0L, acc = 0.0L;
  for (std::uint64_t c = 0; c < w.size(); ++c) {
    const Configuration cfg = Configuration::from_bits(c, n);
    const double f0 = f(cfg);
    double s = 0.0;
    for (std::int64_t x = 1; x <= n; ++x) {
      const double r = rates[cfg.pattern4(x)];
      if (r == 0.0) continue;
      const double d = f(swap_bond(cfg, x)) - f0;
      s += r * d * d;
    }
    z += w[c];
    acc += w[c] * s;
  }
  return static_cast<double>(0.5L * acc / z);
}

// -E_nu[f L f]; equals dirichlet_form(f) when nu is stationary.
template <class F>
double energy_from_generator(const ModelParams& params, const F& f) {
  detail::require_small(params);
  const std::int64_t n = params.n();
  const auto w = detail::gibbs_weights(n, params.interaction());
  long double z = 0.0L, acc = 0.0L;
  for (std::uint64_t c = 0; c < w.size(); ++c) {
    const Configuration cfg = Configuration::from_bits(c, n);
    z += w[c];
    acc += w[c] * f(cfg) * generator_apply(params, f, cfg);
  }
  return static_cast<double>(-acc / z);
}

}  // namespace kls
