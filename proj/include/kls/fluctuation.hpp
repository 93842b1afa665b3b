#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "configuration.hpp"
#include "params.hpp"
#include "spectral.hpp"
#include "test_function.hpp"

namespace kls {

// Sites are placed on the unit torus by zero-based index: index i sits at i/n.

// Speed (in sites per unit of macroscopic time) of the frame that removes
// the linear drift: 2 b n^(2-gamma) rho (2 - 3 rho).
inline double transport_velocity(const ModelParams& params, double rho_bar) {
  return 2.0 * params.b() * std::pow(static_cast<double>(params.n()), 2.0 - params.gamma()) *
         rho_bar * (2.0 - 3.0 * rho_bar);
}

inline double transport_velocity(const ModelParams& params) {
  return transport_velocity(params, mean_density(params));
}

// Y_t(phi) = n^-1/2 sum_i phi((i - v t)/n) (eta_i - rho_bar).
inline double field_eval(const Configuration& cfg, const TestFunction& phi, double t_macro,
                         double velocity, double rho_bar) {
  const std::int64_t n = cfg.size();
  const double nd = static_cast<double>(n);
  const double shift = velocity * t_macro;
  double s = 0.0;
  for (std::int64_t i = 0; i < n; ++i)
    s += phi((static_cast<double>(i) - shift) / nd) *
         (static_cast<double>(cfg.get_index(static_cast<std::size_t>(i))) - rho_bar);
  return s / std::sqrt(nd);
}

// Stationary covariance of the limiting Ornstein-Uhlenbeck field,
// E[Y_t(phi) Y_0(psi)] = 1/4 sum_k e^{-2 pi^2 k^2 t} <phi_k, psi_k>.
inline double ou_covariance(const TestFunction& phi, const TestFunction& psi, double t) {
  double s = 0.0;
  for (const auto& m : phi.modes)
    for (const auto& p : psi.modes) {
      if (m.k != p.k) continue;
      const double ip = m.k == 0 ? m.cos_coef * p.cos_coef
                                 : 0.5 * (m.cos_coef * p.cos_coef + m.sin_coef * p.sin_coef);
      s += std::exp(-2.0 * std::numbers::pi * std::numbers::pi * m.k * m.k * t) * ip;
    }
  return 0.25 * s;
}

// Real Fourier coefficients of g on the n-point grid for frequencies
// 0..kmax, so that g(i/n) = sum_j c_j cos(2 pi j i/n) + s_j sin(2 pi j i/n)
// whenever g has no content above kmax < n/2.
struct TrigCoefficients {
  std::vector<double> c, s;
};

template <class G>
TrigCoefficients grid_coefficients(const G& g, std::int64_t n, int kmax) {
  TrigCoefficients out{std::vector<double>(static_cast<std::size_t>(kmax) + 1, 0.0),
                       std::vector<double>(static_cast<std::size_t>(kmax) + 1, 0.0)};
  const double nd = static_cast<double>(n);
  for (std::int64_t i = 0; i < n; ++i) {
    const double v = g(static_cast<double>(i) / nd);
    for (int j = 0; j <= kmax; ++j) {
      const double th = 2.0 * std::numbers::pi * j * static_cast<double>(i) / nd;
      out.c[static_cast<std::size_t>(j)] += v * std::cos(th);
      out.s[static_cast<std::size_t>(j)] += v * std::sin(th);
    }
  }
  for (int j = 0; j <= kmax; ++j) {
    const double f = (j == 0 || 2 * j == n) ? 1.0 / nd : 2.0 / nd;
    out.c[static_cast<std::size_t>(j)] *= f;
    out.s[static_cast<std::size_t>(j)] *= f;
  }
  return out;
}

// Running sums S_j = sum_i w_i cos(2 pi j i/n), T_j = sum_i w_i sin(...) for
// site weights w_i that change a few at a time. Together with the
// coefficients of a profile g they give sum_i w_i g((i - v s)/n) in O(kmax)
// and its exact integral over any time interval.
class FourierSums {
 public:
  FourierSums() = default;
  FourierSums(std::int64_t n, int kmax) : n_(n), kmax_(kmax) {
    const std::size_t K = static_cast<std::size_t>(kmax) + 1;
    cos_.resize(K * static_cast<std::size_t>(n));
    sin_.resize(K * static_cast<std::size_t>(n));
    for (std::size_t j = 0; j < K; ++j)
      for (std::int64_t i = 0; i < n; ++i) {
        const double th = 2.0 * std::numbers::pi * static_cast<double>(j) * static_cast<double>(i) /
                          static_cast<double>(n);
        cos_[j * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)] = std::cos(th);
        sin_[j * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)] = std::sin(th);
      }
    S_.assign(K, 0.0);
    T_.assign(K, 0.0);
  }

  int kmax() const { return kmax_; }

  void reset(const std::vector<double>& w) {
    const std::size_t K = static_cast<std::size_t>(kmax_) + 1, n = static_cast<std::size_t>(n_);
    for (std::size_t j = 0; j < K; ++j) {
      double s = 0.0, t = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        s += w[i] * cos_[j * n + i];
        t += w[i] * sin_[j * n + i];
      }
      S_[j] = s;
      T_[j] = t;
    }
  }

  void add(std::size_t i, double dw) {
    const std::size_t n = static_cast<std::size_t>(n_);
    for (std::size_t j = 0; j < S_.size(); ++j) {
      S_[j] += dw * cos_[j * n + i];
      T_[j] += dw * sin_[j * n + i];
    }
  }

  // sum_i w_i g((i - shift)/n) for g with coefficients gc.
  double evaluate(const TrigCoefficients& gc, double shift) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < gc.c.size(); ++j) {
      const double th = 2.0 * std::numbers::pi * static_cast<double>(j) * shift / static_cast<double>(n_);
      const double ct = std::cos(th), st = std::sin(th);
      // cos(a - th) = cos a cos th + sin a sin th; sin(a - th) = sin a cos th - cos a sin th
      acc += gc.c[j] * (S_[j] * ct + T_[j] * st) + gc.s[j] * (T_[j] * ct - S_[j] * st);
    }
    return acc;
  }

  // Integral over s in [s0, s0 + ds] of evaluate(gc, v s).
  double integrate(const TrigCoefficients& gc, double v, double s0, double ds) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < gc.c.size(); ++j) {
      const double w = 2.0 * std::numbers::pi * static_cast<double>(j) * v / static_cast<double>(n_);
      const double mid = w * (s0 + 0.5 * ds);
      const double half = 0.5 * w * ds;
      const double sinc = std::abs(half) < 1e-8 ? 1.0 - half * half / 6.0 : std::sin(half) / half;
      const double ic = ds * sinc * std::cos(mid), is = ds * sinc * std::sin(mid);
      acc += gc.c[j] * (S_[j] * ic + T_[j] * is) + gc.s[j] * (T_[j] * ic - S_[j] * is);
    }
    return acc;
  }

 private:
  std::int64_t n_ = 0;
  int kmax_ = 0;
  std::vector<double> cos_, sin_, S_, T_;
};

inline int max_mode(const TestFunction& phi) {
  int k = 0;
  for (const auto& m : phi.modes) k = std::max(k, m.k);
  return k;
}

// Instantaneous integrands of the terms in the martingale decomposition of
// Y_t(phi), evaluated at one configuration and time.
struct DynkinTerms {
  double velocity = 0.0;   // -v/(n sqrt n) sum phi'((x - v t)/n) eb_x
  double half_lap_h = 0.0; // 1/(2 sqrt n) sum Delta_n phi h(tau_x eta)
  double linear = 0.0;     // (4b rho - 6b rho^2) n^(1/2-gamma) sum grad_n phi eb_x
  double quadratic = 0.0;  // (b - 3b rho) n^(1/2-gamma) sum grad_n phi (eb_x eb_{x+1} + eb_x eb_{x+2})
  double cubic = 0.0;      // -2b n^(1/2-gamma) sum grad_n phi eb_x eb_{x+1} eb_{x+2}
  double eps_lap_g = 0.0;  // eps/(2 sqrt n) sum Delta_n phi g(tau_x eta)
  double eps_asym = 0.0;   // b eps n^(1/2-gamma) sum grad_n phi eta_x (eta_{x+1} - eta_{x+2})
};

inline DynkinTerms dynkin_term_integrands(const ModelParams& params, const TestFunction& phi,
                                          const Configuration& cfg, double t_macro) {
  const std::int64_t n = params.n();
  const double nd = static_cast<double>(n), sq = std::sqrt(nd);
  const double rho = mean_density(params);
  const double v = transport_velocity(params, rho);
  const double b = params.b(), eps = params.eps();
  const double scale = std::pow(nd, 0.5 - params.gamma());
  DynkinTerms d;
  for (std::int64_t i = 0; i < n; ++i) {
    const double u = (static_cast<double>(i) - v * t_macro) / nd;
    const double gr = phi.grad_n(u, n), lap = phi.lap_n(u, n), dphi = phi.derivative(u);
    const std::int64_t lab = i + 1;
    const int em = cfg.at(lab - 1), e0 = cfg.at(lab), e1 = cfg.at(lab + 1), e2 = cfg.at(lab + 2);
    const double b0 = e0 - rho, b1 = e1 - rho, b2 = e2 - rho;
    const double h = e0 * e1 + e0 * em - em * e1;
    const double g = e0 * em + e0 * e1 + em * e1 - 2.0 * em * e0 * e1;
    d.velocity += dphi * b0;
    d.half_lap_h += lap * h;
    d.linear += gr * b0;
    d.quadratic += gr * (b0 * b1 + b0 * b2);
    d.cubic += gr * b0 * b1 * b2;
    d.eps_lap_g += lap * g;
    d.eps_asym += gr * e0 * (e1 - e2);
  }
  d.velocity *= -v / (nd * sq);
  d.half_lap_h *= 0.5 / sq;
  d.linear *= (4.0 * b * rho - 6.0 * b * rho * rho) * scale;
  d.quadratic *= (b - 3.0 * b * rho) * scale;
  d.cubic *= -2.0 * b * scale;
  d.eps_lap_g *= 0.5 * eps / sq;
  d.eps_asym *= b * eps * scale;
  return d;
}

}  // namespace kls
