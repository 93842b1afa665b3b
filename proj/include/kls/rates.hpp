#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "configuration.hpp"
#include "params.hpp"

namespace kls {

// Jump rates of bond (s, s+1) indexed by the 4-bit local pattern
// (eta_{s-1}, eta_s, eta_{s+1}, eta_{s+2}) in bits 0..3.
inline std::array<double, 16> rate_lookup(const ModelParams& params) {
  const double p = params.p(), q = params.q(), e = params.eps();
  std::array<double, 16> t{};
  for (unsigned m = 0; m < 16; ++m) {
    const int l = m & 1, a = (m >> 1) & 1, r = (m >> 2) & 1, rr = (m >> 3) & 1;
    double c = 0.0;
    if (a == 1 && r == 0) c = p * ((1.0 + e) * l + (1.0 - e) * rr);
    if (a == 0 && r == 1) c = q * ((1.0 - e) * l + (1.0 + e) * rr);
    t[m] = c;
  }
  return t;
}

inline double bond_rate(const Configuration& cfg, std::int64_t x, const ModelParams& params) {
  return rate_lookup(params)[cfg.pattern4(x)];
}

// Whether bond (s, s+1) can fire for some non-degenerate p, q: the two sites
// differ and a particle sits at s-1 or s+2.
inline bool jump_allowed(const Configuration& cfg, std::int64_t s) {
  const unsigned m = cfg.pattern4(s);
  return ((m >> 1) & 1) != ((m >> 2) & 1) && ((m & 1) || ((m >> 3) & 1));
}

// Fenwick tree over non-negative bond rates: O(log n) update and inverse-CDF
// search.
class RateTable {
 public:
  RateTable() = default;
  explicit RateTable(std::vector<double> values) { rebuild(std::move(values)); }

  void rebuild(std::vector<double> values) {
    values_ = std::move(values);
    const std::size_t n = values_.size();
    tree_.assign(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      tree_[i + 1] += values_[i];
      const std::size_t j = (i + 1) + ((i + 1) & (~(i + 1) + 1));
      if (j <= n) tree_[j] += tree_[i + 1];
    }
    top_ = 1;
    while (top_ * 2 <= n) top_ *= 2;
  }

  std::size_t size() const { return values_.size(); }
  double value(std::size_t i) const { return values_[i]; }
  const std::vector<double>& values() const { return values_; }

  void update(std::size_t i, double v) {
    const double d = v - values_[i];
    if (d == 0.0) return;
    values_[i] = v;
    for (std::size_t k = i + 1; k < tree_.size(); k += k & (~k + 1)) tree_[k] += d;
  }

  double total() const {
    double s = 0.0;
    for (std::size_t k = values_.size(); k > 0; k -= k & (~k + 1)) s += tree_[k];
    return s;
  }

  // Smallest index i with prefix sum through i exceeding target. Zero-rate
  // entries are never returned.
  std::size_t find(double target) const {
    std::size_t pos = 0;
    for (std::size_t step = top_; step > 0; step >>= 1) {
      const std::size_t nxt = pos + step;
      if (nxt < tree_.size() && tree_[nxt] <= target) {
        pos = nxt;
        target -= tree_[nxt];
      }
    }
    // Rounding can land on a trailing zero-rate slot; step back to a live one.
    if (pos >= values_.size()) pos = values_.size() - 1;
    while (values_[pos] <= 0.0 && pos > 0) --pos;
    while (values_[pos] <= 0.0 && pos + 1 < values_.size()) ++pos;
    return pos;
  }

 private:
  std::vector<double> values_;
  std::vector<double> tree_;
  std::size_t top_ = 1;
};

}  // namespace kls
