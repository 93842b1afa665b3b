#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "configuration.hpp"
#include "params.hpp"
#include "random.hpp"
#include "spectral.hpp"

namespace kls {

// Exact sampler for the Gibbs measure on the torus.
//
// The stationary Markov chain with kernel P_ij = v_j T_ij / (lambda_+ v_i),
// v = (1, lambda_+ - 1), is run around the ring conditioned to return to its
// starting state after n steps; the uniform-start bridge has law nu exactly.
class BridgeSampler {
 public:
  explicit BridgeSampler(const ModelParams& params)
      : n_(params.n()), tr_(params.interaction()), rpow_(static_cast<std::size_t>(n_) + 1) {
    const double a = tr_.lambda_plus() - 1.0;
    v_ = {1.0, a};
    const double s = std::sqrt(1.0 + a * a);
    ep_ = {1.0 / s, a / s};
    em_ = {a / s, -1.0 / s};
    const double e = std::exp(-params.interaction());
    t_ = {1.0, 1.0, 1.0, e};
    for (std::int64_t k = 0; k <= n_; ++k) rpow_[static_cast<std::size_t>(k)] = tr_.ratio_pow(k);
    const double p00 = power(n_, 0, 0), p11 = power(n_, 1, 1);
    start_occ_ = p11 / (p00 + p11);
  }

  // One-step kernel.
  double kernel(int i, int j) const { return v_[j] * t_[2 * i + j] / (tr_.lambda_plus() * v_[i]); }

  // (P^k)_{ij} in closed form.
  double power(std::int64_t k, int i, int j) const {
    return v_[j] / v_[i] * (ep_[i] * ep_[j] + rpow_[static_cast<std::size_t>(k)] * em_[i] * em_[j]);
  }

  Configuration sample(Rng& rng) const {
    Configuration cfg(n_);
    sample_into(cfg, rng);
    return cfg;
  }

  void sample_into(Configuration& cfg, Rng& rng) const {
    const int start = rng.uniform() < start_occ_ ? 1 : 0;
    int cur = start;
    cfg.set_index(0, cur);
    for (std::int64_t k = 1; k < n_; ++k) {
      const std::int64_t left = n_ - k;  // steps still to take after this one
      const double w0 = kernel(cur, 0) * power(left, 0, start);
      const double w1 = kernel(cur, 1) * power(left, 1, start);
      cur = rng.uniform() * (w0 + w1) < w1 ? 1 : 0;
      cfg.set_index(static_cast<std::size_t>(k), cur);
    }
  }

 private:
  std::int64_t n_;
  Transfer tr_;
  std::array<double, 2> v_{}, ep_{}, em_{};
  std::array<double, 4> t_{};
  std::vector<double> rpow_;
  double start_occ_ = 0.5;
};

inline Configuration sample_exact(const ModelParams& params, Rng& rng) {
  return BridgeSampler(params).sample(rng);
}

}  // namespace kls
