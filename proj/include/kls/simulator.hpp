#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "configuration.hpp"
#include "params.hpp"
#include "random.hpp"
#include "rates.hpp"

namespace kls {

struct Event {
  std::int64_t bond = 0;  // label x of the exchanged pair (x, x+1)
  double holding = 0.0;   // microscopic time spent before the jump
};

// Gillespie state. Rates are kept in a Fenwick tree indexed by zero-based
// bond i = pair (i, i+1); after a jump only the five bonds that see the two
// changed sites are refreshed, and the tree is rebuilt from scratch every
// kRebuildInterval events to stop round-off drift in the partial sums.
class SimState {
 public:
  static constexpr std::uint64_t kRebuildInterval = 10000;

  SimState(Configuration cfg, const ModelParams& params)
      : cfg_(std::move(cfg)), params_(params), lookup_(rate_lookup(params)) {
    if (cfg_.size() != params.n()) throw DomainError("configuration size differs from n");
    rebuild();
  }

  const Configuration& cfg() const { return cfg_; }
  const ModelParams& params() const { return params_; }
  const RateTable& rates() const { return rates_; }
  double micro_time() const { return micro_time_; }
  double macro_time() const {
    const double n = static_cast<double>(params_.n());
    return micro_time_ / (n * n);
  }
  std::uint64_t event_count() const { return events_; }
  double rate_of(std::size_t bond_index) const { return rates_.value(bond_index); }
  const std::array<double, 16>& lookup() const { return lookup_; }

  void rebuild() {
    const std::int64_t n = cfg_.size();
    std::vector<double> v(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = lookup_[cfg_.pattern4(i + 1)];
    rates_.rebuild(std::move(v));
  }

  // Draws the next event without applying it; nullopt when frozen.
  std::optional<Event> propose(Rng& rng) const {
    const double total = rates_.total();
    if (!(total > 0.0)) return std::nullopt;
    Event e;
    e.holding = rng.exponential(total);
    const std::size_t i = rates_.find(rng.uniform() * total);
    e.bond = static_cast<std::int64_t>(i) + 1;
    return e;
  }

  void apply(const Event& e) {
    micro_time_ += e.holding;
    swap_bond_inplace(cfg_, e.bond);
    ++events_;
    if (events_ % kRebuildInterval == 0) {
      rebuild();
      return;
    }
    const std::int64_t n = cfg_.size();
    const std::int64_t k = e.bond - 1;
    for (std::int64_t d = -2; d <= 2; ++d) {
      const std::int64_t j = ((k + d) % n + n) % n;
      rates_.update(static_cast<std::size_t>(j), lookup_[cfg_.pattern4(j + 1)]);
    }
  }

  void advance_clock(double dt) { micro_time_ += dt; }

 private:
  Configuration cfg_;
  ModelParams params_;
  std::array<double, 16> lookup_;
  RateTable rates_;
  double micro_time_ = 0.0;
  std::uint64_t events_ = 0;
};

// One Gillespie step. Returns the event, or nullopt if the state is frozen.
inline std::optional<Event> step(SimState& s, Rng& rng) {
  auto e = s.propose(rng);
  if (e) s.apply(*e);
  return e;
}

struct NullObserver {
  void interval(const SimState&, double) {}
  void jumped(const SimState&, const Event&) {}
};

struct TrajectorySummary {
  std::uint64_t events = 0;
  bool froze = false;
  double micro_time = 0.0;
};

// Runs for t_macro units of macroscopic time (t_macro * n^2 microscopic).
// The observer sees every holding interval with the state that was held
// (the last one truncated at the horizon), then every applied jump.
template <class Observer>
TrajectorySummary simulate(SimState& s, double t_macro, Rng& rng, Observer& obs) {
  const double n = static_cast<double>(s.params().n());
  const double horizon = s.micro_time() + t_macro * n * n;
  const std::uint64_t start_events = s.event_count();
  TrajectorySummary out;
  while (s.micro_time() < horizon) {
    auto e = s.propose(rng);
    const double remaining = horizon - s.micro_time();
    if (!e) {
      obs.interval(s, remaining);
      s.advance_clock(remaining);
      out.froze = true;
      break;
    }
    if (e->holding >= remaining) {
      obs.interval(s, remaining);
      s.advance_clock(remaining);
      break;
    }
    obs.interval(s, e->holding);
    s.apply(*e);
    obs.jumped(s, *e);
  }
  out.events = s.event_count() - start_events;
  out.micro_time = s.micro_time();
  return out;
}

inline TrajectorySummary simulate(SimState& s, double t_macro, Rng& rng) {
  NullObserver o;
  return simulate(s, t_macro, rng, o);
}

}  // namespace kls
