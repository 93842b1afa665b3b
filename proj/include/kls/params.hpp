#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "errors.hpp"

namespace kls {

// Model parameters: torus size n, asymmetry strength b with scaling exponent
// gamma, and interaction exponent alpha. The inverse temperature of the
// nearest-neighbour Gibbs weight is x = n^-alpha unless overridden (tests use
// the override to reach x = 0 or to build deliberately wrong measures).
class ModelParams {
 public:
  ModelParams(std::int64_t n, double b, double gamma, double alpha,
              std::optional<double> interaction_override = std::nullopt)
      : n_(n), b_(b), gamma_(gamma), alpha_(alpha), x_override_(interaction_override) {
    if (n < 1) throw InvalidParams("n must be positive");
    if (!std::isfinite(b) || !std::isfinite(gamma) || !std::isfinite(alpha))
      throw InvalidParams("parameters must be finite");
    if (x_override_ && (!std::isfinite(*x_override_) || *x_override_ < 0.0))
      throw InvalidParams("interaction must be finite and non-negative");
    if (p() < 0.0 || q() < 0.0)
      throw InvalidParams("asymmetry too strong: p and q must be non-negative");
  }

  std::int64_t n() const { return n_; }
  double b() const { return b_; }
  double gamma() const { return gamma_; }
  double alpha() const { return alpha_; }

  // x = n^-alpha
  double interaction() const {
    if (x_override_) return *x_override_;
    return std::pow(static_cast<double>(n_), -alpha_);
  }

  double drift() const { return b_ * std::pow(static_cast<double>(n_), -gamma_); }
  double p() const { return 0.5 + 0.5 * drift(); }
  double q() const { return 0.5 - 0.5 * drift(); }

  // eps = (1 - e^-x) / (1 + e^-x) = tanh(x/2)
  double eps() const { return std::tanh(0.5 * interaction()); }
  static constexpr int kappa = -1;

  ModelParams with_n(std::int64_t n) const { return {n, b_, gamma_, alpha_, x_override_}; }
  ModelParams with_interaction(double x) const { return {n_, b_, gamma_, alpha_, x}; }

  std::string describe() const {
    return "n=" + std::to_string(n_) + " b=" + std::to_string(b_) +
           " gamma=" + std::to_string(gamma_) + " alpha=" + std::to_string(alpha_);
  }

 private:
  std::int64_t n_;
  double b_, gamma_, alpha_;
  std::optional<double> x_override_;
};

}  // namespace kls
