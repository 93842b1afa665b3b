#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "bridge_sampler.hpp"
#include "configuration.hpp"
#include "errors.hpp"
#include "fluctuation.hpp"
#include "gibbs.hpp"
#include "parallel.hpp"
#include "params.hpp"
#include "random.hpp"
#include "rates.hpp"
#include "simulator.hpp"
#include "spectral.hpp"
#include "stats.hpp"
#include "test_function.hpp"

namespace kls {

struct ExperimentEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::int64_t replicas = 0;
  std::uint64_t seed = 0;
};

inline ExperimentEstimate summarize(const std::vector<double>& values, std::uint64_t seed) {
  RunningStats st;
  for (double v : values) st.add(v);
  return {st.mean(), st.stderr_mean(), st.count(), seed};
}

// Independent exact samples are drawn in chunks; chunk c uses stream c.
inline constexpr std::size_t kSampleChunk = 4096;

template <class PerSample>
void for_each_exact_sample(const ModelParams& params, std::int64_t count, std::uint64_t seed,
                           unsigned threads, PerSample&& per_sample) {
  const BridgeSampler sampler(params);
  const std::size_t chunks = (static_cast<std::size_t>(count) + kSampleChunk - 1) / kSampleChunk;
  parallel_for(chunks, threads, [&](std::size_t c) {
    Rng rng(seed, c);
    Configuration cfg(params.n());
    const std::size_t lo = c * kSampleChunk;
    const std::size_t hi = std::min(static_cast<std::size_t>(count), lo + kSampleChunk);
    for (std::size_t m = lo; m < hi; ++m) {
      sampler.sample_into(cfg, rng);
      per_sample(m, cfg);
    }
  });
}

// ---------------------------------------------------------------------------
// Static checks of the measure

struct TvResult {
  double tv = 0.0;
  double expected_floor = 0.0;  // mean TV of an exact sampler at this M
  std::int64_t samples = 0;
};

// TV distance between the empirical law of M bridge samples and the
// enumerated measure. The floor is the Monte Carlo expectation
// sum_eta sqrt(nu(1-nu)/(2 pi M)) of that distance for a perfect sampler.
inline TvResult sample_tv(const ModelParams& params, std::int64_t samples, std::uint64_t seed,
                          unsigned threads = 1) {
  const auto table = enumerate_measure(params);
  const std::size_t chunks = (static_cast<std::size_t>(samples) + kSampleChunk - 1) / kSampleChunk;
  std::vector<std::vector<std::int64_t>> counts(chunks, std::vector<std::int64_t>(table.prob.size(), 0));
  for_each_exact_sample(params, samples, seed, threads, [&](std::size_t m, const Configuration& cfg) {
    ++counts[m / kSampleChunk][cfg.code()];
  });
  std::vector<double> emp(table.prob.size(), 0.0);
  for (const auto& c : counts)
    for (std::size_t k = 0; k < c.size(); ++k) emp[k] += static_cast<double>(c[k]);
  for (auto& e : emp) e /= static_cast<double>(samples);
  TvResult r;
  r.tv = total_variation(emp, table.prob);
  r.samples = samples;
  for (double p : table.prob)
    r.expected_floor += std::sqrt(p * (1.0 - p) / (2.0 * std::numbers::pi * static_cast<double>(samples)));
  return r;
}

struct CltResult {
  ExperimentEstimate variance;
  double target_variance = 0.0;  // (1/4) ||g||_{2,N}^2
  double ks = 0.0;
  std::int64_t samples = 0;
};

// X = n^-1/2 sum_i g(i/n) (eta_i - rho_bar) under exact samples.
inline CltResult clt_experiment(const ModelParams& params, const TestFunction& g, std::int64_t samples,
                                std::uint64_t seed, unsigned threads = 1) {
  const std::int64_t n = params.n();
  const double rho = mean_density(params);
  std::vector<double> gv(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i)
    gv[static_cast<std::size_t>(i)] = g(static_cast<double>(i) / static_cast<double>(n));
  double gsum = 0.0;
  for (double v : gv) gsum += v;
  const double sq = std::sqrt(static_cast<double>(n));
  std::vector<double> xs(static_cast<std::size_t>(samples));
  for_each_exact_sample(params, samples, seed, threads, [&](std::size_t m, const Configuration& cfg) {
    double s = 0.0;
    for (std::int64_t i = 0; i < n; ++i)
      if (cfg.get_index(static_cast<std::size_t>(i))) s += gv[static_cast<std::size_t>(i)];
    xs[m] = (s - rho * gsum) / sq;
  });
  CltResult r;
  r.samples = samples;
  r.target_variance = 0.25 * g.discrete_norm2(n);
  // The field is centred exactly, so E[X^2] is the variance.
  std::vector<double> sqv(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) sqv[i] = xs[i] * xs[i];
  r.variance = summarize(sqv, seed);
  r.ks = ks_statistic_normal(xs, 0.0, std::sqrt(r.target_variance));
  return r;
}

// |Cov(eta_0, eta_r)| from exact samples, averaged over translations.
inline ExperimentEstimate empirical_mixing(const ModelParams& params, std::int64_t r, std::int64_t samples,
                                           std::uint64_t seed, unsigned threads = 1) {
  const std::int64_t n = params.n();
  const double rho = mean_density(params);
  std::vector<double> vals(static_cast<std::size_t>(samples));
  for_each_exact_sample(params, samples, seed, threads, [&](std::size_t m, const Configuration& cfg) {
    double s = 0.0;
    for (std::int64_t i = 1; i <= n; ++i) s += (cfg.at(i) - rho) * (cfg.at(i + r) - rho);
    vals[m] = s / static_cast<double>(n);
  });
  auto e = summarize(vals, seed);
  e.mean = std::abs(e.mean);
  return e;
}

// ---------------------------------------------------------------------------
// Dynamic experiments. Replica k starts from an exact sample drawn with
// stream k and continues the dynamics on the same stream.

template <class Observer, class MakeObserver, class Finish>
std::vector<double> run_replicas(const ModelParams& params, double t_macro, std::int64_t replicas,
                                 std::uint64_t seed, unsigned threads, MakeObserver make, Finish finish) {
  const BridgeSampler sampler(params);
  std::vector<double> out(static_cast<std::size_t>(replicas));
  parallel_for(static_cast<std::size_t>(replicas), threads, [&](std::size_t k) {
    Rng rng(seed, k);
    SimState state(sampler.sample(rng), params);
    Observer obs = make(state);
    simulate(state, t_macro, rng, obs);
    out[k] = finish(obs, state);
  });
  return out;
}

// Time averages of the densities of nearest and next-nearest occupied pairs.
struct PairDensityObserver {
  double nn = 0, nnn = 0;           // current counts
  double int_nn = 0, int_nnn = 0;   // time integrals (microscopic time)
  double elapsed = 0;

  explicit PairDensityObserver(const SimState& s) {
    const auto& c = s.cfg();
    for (std::int64_t i = 1; i <= c.size(); ++i) {
      nn += c.at(i) * c.at(i + 1);
      nnn += c.at(i) * c.at(i + 2);
    }
  }
  void interval(const SimState&, double dt) {
    int_nn += nn * dt;
    int_nnn += nnn * dt;
    elapsed += dt;
  }
  void jumped(const SimState& s, const Event& e) {
    // Recount the pairs touching the exchanged sites.
    const auto& c = s.cfg();
    const std::int64_t j = e.bond;
    const Configuration before = swap_bond(c, j);
    for (std::int64_t i = j - 1; i <= j + 1; ++i) nn += c.at(i) * c.at(i + 1) - before.at(i) * before.at(i + 1);
    for (std::int64_t i = j - 2; i <= j + 1; ++i) nnn += c.at(i) * c.at(i + 2) - before.at(i) * before.at(i + 2);
  }
};

struct PairDensityResult {
  ExperimentEstimate nn, nnn;
  double exact_nn = 0, exact_nnn = 0;
};

inline PairDensityResult pair_density_experiment(const ModelParams& params, double t_macro, std::int64_t replicas,
                                                 std::uint64_t seed, unsigned threads = 1) {
  const double n = static_cast<double>(params.n());
  const BridgeSampler sampler(params);
  std::vector<double> a(static_cast<std::size_t>(replicas)), b(static_cast<std::size_t>(replicas));
  parallel_for(static_cast<std::size_t>(replicas), threads, [&](std::size_t k) {
    Rng rng(seed, k);
    SimState state(sampler.sample(rng), params);
    PairDensityObserver obs(state);
    simulate(state, t_macro, rng, obs);
    a[k] = obs.int_nn / (obs.elapsed * n);
    b[k] = obs.int_nnn / (obs.elapsed * n);
  });
  PairDensityResult r;
  r.nn = summarize(a, seed);
  r.nnn = summarize(b, seed);
  r.exact_nn = raw_moment(params, {1, params.n() - 1});
  r.exact_nnn = raw_moment(params, {2, params.n() - 2});
  return r;
}

// ---------------------------------------------------------------------------
// Quadratic variation of the Dynkin martingale of Y(phi):
//   <M>_t = int_0^t (1/n) sum_x c_x (eta_x - eta_{x+1})^2 (grad_n phi)^2((x - v s)/n) ds.
// Only bonds with eta_x != eta_{x+1} have a positive rate, so the integrand
// is (1/n) sum_x c_x psi((x - v s)/n) with psi = (grad_n phi)^2. It is kept
// as Fourier sums of the rates and integrated exactly between events, in
// the moving frame as well as the fixed one.

inline TrigCoefficients squared_gradient_coefficients(const TestFunction& phi, std::int64_t n) {
  const int k = max_mode(phi);
  if (4 * k >= n) throw DomainError("test function too rough for this lattice");
  return grid_coefficients([&](double u) { const double g = phi.grad_n(u, n); return g * g; }, n, 2 * k);
}

class QvObserver {
 public:
  QvObserver(const SimState& s, const TrigCoefficients& psi, double velocity)
      : psi_(&psi), v_(velocity), rates_(s.rates().values()),
        sums_(s.params().n(), static_cast<int>(psi.c.size()) - 1) {
    sums_.reset(rates_);
  }

  void interval(const SimState& s, double dt) {
    const double n = static_cast<double>(s.params().n());
    value_ += sums_.integrate(*psi_, v_, s.macro_time(), dt / (n * n)) / n;
  }

  void jumped(const SimState& s, const Event& e) {
    const std::int64_t n = s.params().n();
    if (s.event_count() % SimState::kRebuildInterval == 0) {
      rates_ = s.rates().values();
      sums_.reset(rates_);
      return;
    }
    for (std::int64_t d = -2; d <= 2; ++d) {
      const auto j = static_cast<std::size_t>(((e.bond - 1 + d) % n + n) % n);
      const double nv = s.rate_of(j);
      if (nv != rates_[j]) {
        sums_.add(j, nv - rates_[j]);
        rates_[j] = nv;
      }
    }
  }

  double value() const { return value_; }

 private:
  const TrigCoefficients* psi_;
  double v_;
  std::vector<double> rates_;
  FourierSums sums_;
  double value_ = 0.0;
};

struct QvResult {
  ExperimentEstimate qv;
  double exact = 0.0;  // E<M>_t under the finite-n stationary measure
  double limit = 0.0;  // (t/4) ||phi'||^2
};

// Stationary mean rate of a single bond.
inline double mean_bond_rate(const ModelParams& params) {
  const auto rates = rate_lookup(params);
  double s = 0.0;
  for (unsigned m = 0; m < 16; ++m)
    if (rates[m] > 0.0) s += rates[m] * pattern_probability(params, m, 4);
  return s;
}

inline QvResult qv_estimate(const ModelParams& params, const TestFunction& phi, double t_macro,
                            std::int64_t replicas, std::uint64_t seed, unsigned threads = 1) {
  const auto psi = squared_gradient_coefficients(phi, params.n());
  const double v = params.b() == 0.0 ? 0.0 : transport_velocity(params);
  auto vals = run_replicas<QvObserver>(
      params, t_macro, replicas, seed, threads, [&](const SimState& s) { return QvObserver(s, psi, v); },
      [](const QvObserver& o, const SimState&) { return o.value(); });
  QvResult r;
  r.qv = summarize(vals, seed);
  r.exact = t_macro * mean_bond_rate(params) * psi.c[0];
  r.limit = 0.25 * t_macro * phi.grad_norm2();
  return r;
}

// ---------------------------------------------------------------------------
// Replacement of eta_x eta_{x+gap} by a product of block averages:
//   V(eta) = sum_x G(x/n) { eb_x eb_{x+gap} - <-eb^L_x  ->eb^L_{x+gap-1} }
// with <-eb^L_x the centred mean over x-L..x-1 and ->eb^L_y over y+1..y+L.
// The tracker updates V in O(1) per jump.

class BlockReplacementTracker {
 public:
  BlockReplacementTracker(const Configuration& cfg, const TestFunction& G, double L, double rho_bar, int gap)
      : n_(cfg.size()), L_(static_cast<std::int64_t>(std::floor(L))), gap_(gap), rho_(rho_bar) {
    if (!(L >= 1.0)) throw DomainError("block length must be at least 1");
    if (2 * L_ > n_) throw BoxTooLarge("block length exceeds n/2");
    if (gap < 1 || gap > 2) throw DomainError("gap must be 1 or 2");
    g_.resize(static_cast<std::size_t>(n_));
    for (std::int64_t i = 0; i < n_; ++i)
      g_[static_cast<std::size_t>(i)] = G(static_cast<double>(i) / static_cast<double>(n_));
    reset(cfg);
  }

  void reset(const Configuration& cfg) {
    const auto n = static_cast<std::size_t>(n_);
    eb_.resize(n);
    for (std::size_t i = 0; i < n; ++i) eb_[i] = (cfg.get_index(i) ? 1.0 : 0.0) - rho_;
    left_.assign(n, 0.0);
    right_.assign(n, 0.0);
    for (std::int64_t i = 0; i < n_; ++i)
      for (std::int64_t k = 1; k <= L_; ++k) {
        left_[static_cast<std::size_t>(i)] += eb_[wrap(i - k)];
        right_[static_cast<std::size_t>(i)] += eb_[wrap(i + k)];
      }
    value_ = 0.0;
    for (std::int64_t i = 0; i < n_; ++i) value_ += pair(i) - block(i);
  }

  double value() const { return value_; }

  // Zero-based sites j and j+1 have just been exchanged in the dynamics.
  void on_swap(std::int64_t j) {
    const std::size_t a = wrap(j), b = wrap(j + 1);
    const double d = eb_[b] - eb_[a];  // change at site a; site b changes by -d
    if (d == 0.0) return;
    const std::int64_t g = gap_;
    std::int64_t pi[4] = {j, j + 1, j - g, j + 1 - g};
    std::int64_t bi[4] = {j + 1, j + 1 + L_, j - g + 1, j - L_ - g + 1};
    const int np = unique(pi), nb = unique(bi);
    for (int k = 0; k < np; ++k) value_ -= pair(pi[k]);
    for (int k = 0; k < nb; ++k) value_ += block(bi[k]);
    std::swap(eb_[a], eb_[b]);
    left_[wrap(j + 1)] += d;
    left_[wrap(j + 1 + L_)] -= d;
    right_[wrap(j)] -= d;
    right_[wrap(j - L_)] += d;
    for (int k = 0; k < np; ++k) value_ += pair(pi[k]);
    for (int k = 0; k < nb; ++k) value_ -= block(bi[k]);
  }

 private:
  std::size_t wrap(std::int64_t i) const { return static_cast<std::size_t>(((i % n_) + n_) % n_); }
  double pair(std::int64_t i) const { return g_[wrap(i)] * eb_[wrap(i)] * eb_[wrap(i + gap_)]; }
  double block(std::int64_t i) const {
    const double l = static_cast<double>(L_);
    return g_[wrap(i)] * left_[wrap(i)] * right_[wrap(i + gap_ - 1)] / (l * l);
  }
  int unique(std::int64_t* idx) const {
    int m = 0;
    for (int k = 0; k < 4; ++k) {
      const std::int64_t w = static_cast<std::int64_t>(wrap(idx[k]));
      bool seen = false;
      for (int q = 0; q < m; ++q) seen = seen || idx[q] == w;
      if (!seen) idx[m++] = w;
    }
    return m;
  }

  std::int64_t n_, L_;
  int gap_;
  double rho_;
  std::vector<double> g_, eb_, left_, right_;
  double value_ = 0.0;
};

// Direct evaluation of V for cross-checks.
inline double block_replacement_naive(const Configuration& cfg, const TestFunction& G, double L, double rho_bar,
                                      int gap) {
  const std::int64_t n = cfg.size();
  double s = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t lab = i + 1;
    const double pairv = (cfg.at(lab) - rho_bar) * (cfg.at(lab + gap) - rho_bar);
    const double blk = block_average(cfg, lab, L, Side::Left, rho_bar) *
                       block_average(cfg, lab + gap - 1, L, Side::Right, rho_bar);
    s += G(static_cast<double>(i) / static_cast<double>(n)) * (pairv - blk);
  }
  return s;
}

class BgObserver {
 public:
  BgObserver(const SimState& s, const TestFunction& G, double L, double rho_bar, int gap)
      : tracker_(s.cfg(), G, L, rho_bar, gap) {}

  void interval(const SimState& s, double dt) {
    const double n = static_cast<double>(s.params().n());
    integral_ += tracker_.value() * dt / (n * n);
  }
  void jumped(const SimState& s, const Event& e) {
    if (s.event_count() % SimState::kRebuildInterval == 0) tracker_.reset(s.cfg());
    else tracker_.on_swap(e.bond - 1);
  }
  double integral() const { return integral_; }

 private:
  BlockReplacementTracker tracker_;
  double integral_ = 0.0;
};

// E[(int_0^t V(eta_s) ds)^2] over stationary replicas.
inline ExperimentEstimate bg_error_mc(const ModelParams& params, const TestFunction& G, double L, double t_macro,
                                      std::int64_t replicas, std::uint64_t seed, unsigned threads = 1,
                                      int gap = 1) {
  if (2 * static_cast<std::int64_t>(std::floor(L)) > params.n()) throw BoxTooLarge("block length exceeds n/2");
  const double rho = mean_density(params);
  auto vals = run_replicas<BgObserver>(
      params, t_macro, replicas, seed, threads, [&](const SimState& s) { return BgObserver(s, G, L, rho, gap); },
      [](const BgObserver& o, const SimState&) { return o.integral() * o.integral(); });
  return summarize(vals, seed);
}

// ---------------------------------------------------------------------------
// Two-time covariance of the fluctuation field in the moving frame,
// E[Y_{s+t}(phi) Y_s(phi)], averaged over origins s in [0, window] spaced by
// ds on each replica and then over replicas.

class FieldRecorder {
 public:
  FieldRecorder(const SimState& s, const TestFunction& phi, double velocity, double rho_bar, double ds)
      : v_(velocity), ds_(ds), sq_(std::sqrt(static_cast<double>(s.params().n()))),
        occ_(static_cast<std::size_t>(s.params().n())), sums_(s.params().n(), max_mode(phi)) {
    const std::int64_t n = s.params().n();
    if (2 * max_mode(phi) >= n) throw DomainError("test function too rough for this lattice");
    coef_ = grid_coefficients(phi, n, max_mode(phi));
    for (std::int64_t i = 0; i < n; ++i)
      occ_[static_cast<std::size_t>(i)] = s.cfg().get_index(static_cast<std::size_t>(i)) ? 1.0 : 0.0;
    sums_.reset(occ_);
    double csum = 0.0;
    for (std::int64_t i = 0; i < n; ++i) csum += phi(static_cast<double>(i) / static_cast<double>(n));
    // sum_i phi((i - vs)/n) is the same for every shift: n times the mean mode.
    centre_ = rho_bar * csum;
  }

  void interval(const SimState& s, double dt) {
    const double n = static_cast<double>(s.params().n());
    const double end = s.macro_time() + dt / (n * n);
    while (static_cast<double>(samples_.size()) * ds_ <= end + 1e-12) {
      const double when = static_cast<double>(samples_.size()) * ds_;
      samples_.push_back((sums_.evaluate(coef_, v_ * when) - centre_) / sq_);
    }
  }

  void jumped(const SimState& s, const Event& e) {
    const std::int64_t n = s.params().n();
    const auto a = static_cast<std::size_t>((e.bond - 1) % n), b = static_cast<std::size_t>(e.bond % n);
    if (occ_[a] != occ_[b]) {
      const double d = occ_[b] - occ_[a];
      sums_.add(a, d);
      sums_.add(b, -d);
      std::swap(occ_[a], occ_[b]);
    }
    if (s.event_count() % SimState::kRebuildInterval == 0) sums_.reset(occ_);
  }

  const std::vector<double>& samples() const { return samples_; }

 private:
  double v_, ds_, sq_;
  std::vector<double> occ_;
  FourierSums sums_;
  TrigCoefficients coef_;
  double centre_ = 0.0;
  std::vector<double> samples_;
};

struct CovarianceResult {
  std::vector<double> lags;
  std::vector<ExperimentEstimate> estimate;
  std::vector<double> predicted;
};

inline CovarianceResult ou_covariance_experiment(const ModelParams& params, const TestFunction& phi,
                                                 const std::vector<double>& lags, double window, double ds,
                                                 std::int64_t replicas, std::uint64_t seed, unsigned threads = 1) {
  const double rho = mean_density(params);
  const double v = params.b() == 0.0 ? 0.0 : transport_velocity(params, rho);
  double tmax = 0.0;
  std::vector<std::int64_t> lag_steps;
  for (double t : lags) {
    lag_steps.push_back(static_cast<std::int64_t>(std::llround(t / ds)));
    tmax = std::max(tmax, t);
  }
  const auto origins = static_cast<std::int64_t>(std::floor(window / ds + 1e-9)) + 1;
  const double horizon = tmax + window;
  const BridgeSampler sampler(params);
  std::vector<std::vector<double>> per(lags.size(), std::vector<double>(static_cast<std::size_t>(replicas)));
  parallel_for(static_cast<std::size_t>(replicas), threads, [&](std::size_t k) {
    Rng rng(seed, k);
    SimState state(sampler.sample(rng), params);
    FieldRecorder rec(state, phi, v, rho, ds);
    simulate(state, horizon + 2.0 * ds, rng, rec);
    const auto& y = rec.samples();
    for (std::size_t l = 0; l < lags.size(); ++l) {
      double s = 0.0;
      for (std::int64_t o = 0; o < origins; ++o)
        s += y[static_cast<std::size_t>(o + lag_steps[l])] * y[static_cast<std::size_t>(o)];
      per[l][k] = s / static_cast<double>(origins);
    }
  });
  CovarianceResult r;
  r.lags = lags;
  for (std::size_t l = 0; l < lags.size(); ++l) {
    r.estimate.push_back(summarize(per[l], seed));
    r.predicted.push_back(ou_covariance(phi, phi, lags[l]));
  }
  return r;
}

}  // namespace kls
