#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "errors.hpp"
#include "params.hpp"

namespace kls {

// Spectral data of the transfer matrix T = [[1, 1], [1, e^-x]] (row/column 0
// is an empty site, 1 an occupied one).
struct SpectralData {
  double lambda_plus = 0.0;
  double lambda_minus = 0.0;
  double log_z = 0.0;
  double interaction = 0.0;
};

// Everything the transfer-matrix formulas need, kept in forms that stay
// accurate for x -> 0 and n large. Powers of T are handled through
// T^k / lambda_+^k = P_+ + r^k P_- with r = lambda_- / lambda_+.
class Transfer {
 public:
  explicit Transfer(double x) : x_(x) {
    u_ = -std::expm1(-x);                     // 1 - e^-x
    const double s = std::sqrt(u_ * u_ + 4.0);
    lp_ = 0.5 * (2.0 - u_ + s);
    lm_ = -u_ / lp_;                          // (e^-x - 1) / lambda_+
    r_ = lm_ / lp_;
    a_ = 0.5 * (s - u_);                      // lambda_+ - 1
    const double am1 = 0.5 * (u_ * u_ / (s + 2.0) - u_);  // a - 1
    const double den = 1.0 + a_ * a_;
    wp_ = a_ * a_ / den;
    wm_ = 1.0 / den;
    wdiff_ = am1 * (a_ + 1.0) / den;          // wp - wm
    c_ = -a_ / den;
  }

  double x() const { return x_; }
  double lambda_plus() const { return lp_; }
  double lambda_minus() const { return lm_; }
  double ratio() const { return r_; }
  // Occupied components of the unit eigenvectors, squared: (T^k)_{occ,occ}
  // = lambda_+^k (wp + wm r^k).
  double w_plus() const { return wp_; }
  double w_minus() const { return wm_; }
  double w_diff() const { return wdiff_; }
  double cross() const { return c_; }

  double ratio_pow(std::int64_t k) const { return k == 0 ? 1.0 : std::pow(r_, static_cast<double>(k)); }

  // (T^k)_{occ,occ} / lambda_+^k
  double occ_occ(std::int64_t k) const { return wp_ + wm_ * ratio_pow(k); }

  // Z / lambda_+^n = 1 + r^n
  double z_norm(std::int64_t n) const { return 1.0 + ratio_pow(n); }

  double log_z(std::int64_t n) const {
    return static_cast<double>(n) * std::log(lp_) + std::log1p(ratio_pow(n));
  }

  double mean_density(std::int64_t n) const {
    const double rn = ratio_pow(n);
    return (wp_ + wm_ * rn) / (1.0 + rn);
  }

  // wp - rho_bar, exact up to rounding of each factor.
  double plus_minus_density(std::int64_t n) const {
    const double rn = ratio_pow(n);
    return rn * wdiff_ / (1.0 + rn);
  }

 private:
  double x_, u_, lp_, lm_, r_, a_, wp_, wm_, wdiff_, c_;
};

inline SpectralData spectral(const ModelParams& params) {
  const Transfer t(params.interaction());
  return {t.lambda_plus(), t.lambda_minus(), t.log_z(params.n()), params.interaction()};
}

inline double mean_density(const ModelParams& params) {
  return Transfer(params.interaction()).mean_density(params.n());
}

// E_nu[prod_i eta_{x_i}] for sites whose cyclic gaps d_1..d_m sum to n.
inline double raw_moment(const ModelParams& params, const std::vector<std::int64_t>& gaps) {
  std::int64_t s = 0;
  for (auto d : gaps) {
    if (d < 0) throw GapMismatch("gaps must be non-negative");
    s += d;
  }
  if (gaps.empty() || s != params.n()) throw GapMismatch("gaps must sum to n");
  const Transfer t(params.interaction());
  double prod = 1.0;
  for (auto d : gaps) prod *= t.occ_occ(d);
  return prod / t.z_norm(params.n());
}

// Sorts distinct sites (labels taken mod n) and returns their cyclic gaps.
inline std::vector<std::int64_t> cyclic_gaps(std::vector<std::int64_t> sites, std::int64_t n) {
  for (auto& s : sites) s = ((s % n) + n) % n;
  std::sort(sites.begin(), sites.end());
  if (std::adjacent_find(sites.begin(), sites.end()) != sites.end())
    throw DuplicateSite("sites must be distinct modulo n");
  std::vector<std::int64_t> gaps(sites.size());
  for (std::size_t i = 0; i + 1 < sites.size(); ++i) gaps[i] = sites[i + 1] - sites[i];
  if (!sites.empty()) gaps.back() = sites.front() + n - sites.back();
  return gaps;
}

// E_nu[prod_i (eta_{x_i} - rho_bar)] at distinct sites.
//
// Computed as a trace of centred insertions in the eigenbasis of T, so each
// power of r appears explicitly and the small result is never the difference
// of order-one terms.
inline double centered_correlation(const ModelParams& params, const std::vector<std::int64_t>& sites) {
  if (sites.empty()) return 1.0;
  const std::int64_t n = params.n();
  const auto gaps = cyclic_gaps(sites, n);
  const Transfer t(params.interaction());
  const double mpp = t.plus_minus_density(n);
  const double mmm = mpp - t.w_diff();
  const double c = t.cross();
  using M2 = std::array<long double, 4>;  // row-major 2x2
  const M2 center{mpp, c, c, mmm};
  M2 acc{1, 0, 0, 1};
  for (auto d : gaps) {
    const long double rd = t.ratio_pow(d);
    // acc * center * diag(1, r^d)
    const M2 cm{center[0], center[1] * rd, center[2], center[3] * rd};
    acc = M2{acc[0] * cm[0] + acc[1] * cm[2], acc[0] * cm[1] + acc[1] * cm[3],
             acc[2] * cm[0] + acc[3] * cm[2], acc[2] * cm[1] + acc[3] * cm[3]};
  }
  return static_cast<double>((acc[0] + acc[3]) / t.z_norm(n));
}

// nu(eta_s = e_0, ..., eta_{s+m-1} = e_{m-1}) for a pattern of m <= n
// consecutive sites (bit k of bits = e_k).
inline double pattern_probability(const ModelParams& params, std::uint64_t bits, int m) {
  const std::int64_t n = params.n();
  if (m < 1 || m > n || m > 64) throw DomainError("pattern length must lie in 1..min(n, 64)");
  const Transfer t(params.interaction());
  const double lp = t.lambda_plus(), e = std::exp(-params.interaction());
  const double tn[4] = {1.0 / lp, 1.0 / lp, 1.0 / lp, e / lp};
  const double a = lp - 1.0, s = std::sqrt(1.0 + a * a);
  const double ep[2] = {1.0 / s, a / s}, em[2] = {a / s, -1.0 / s};
  const double rk = t.ratio_pow(n - m + 1);
  double tail[4];
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) tail[2 * i + j] = ep[i] * ep[j] + rk * em[i] * em[j];
  // Row vector over the state of the current site, started at e_0; the
  // trace then closes back onto e_0.
  const int e0 = static_cast<int>(bits & 1u);
  double row[2] = {e0 == 0 ? 1.0 : 0.0, e0 == 1 ? 1.0 : 0.0};
  for (int k = 1; k < m; ++k) {
    const int ek = static_cast<int>((bits >> k) & 1u);
    const double v = row[0] * tn[ek] + row[1] * tn[2 + ek];
    row[0] = ek == 0 ? v : 0.0;
    row[1] = ek == 1 ? v : 0.0;
  }
  const double closing = row[0] * tail[e0] + row[1] * tail[2 + e0];
  return closing / t.z_norm(n);
}

}  // namespace kls
