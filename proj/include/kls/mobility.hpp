#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "configuration.hpp"
#include "errors.hpp"
#include "params.hpp"
#include "rates.hpp"

namespace kls {

// A box x..x+ell is good when it holds two particles at distance one or two,
// both inside the box:
//   sum_{y=x}^{x+ell-2} eta_y (eta_{y+1} + eta_{y+2}) + eta_{x+ell-1} eta_{x+ell} > 0.
inline bool is_good_box(const Configuration& cfg, std::int64_t x, std::int64_t ell) {
  if (ell < 1) throw DomainError("box length must be at least 1");
  for (std::int64_t y = x; y <= x + ell - 2; ++y)
    if (cfg.at(y) && (cfg.at(y + 1) || cfg.at(y + 2))) return true;
  return cfg.at(x + ell - 1) && cfg.at(x + ell);
}

// Leftmost site of a mobile cluster witnessing is_good_box(cfg, x, ell): the
// smallest y in x..x+ell-1 with a partner at y+1 or y+2 inside the box.
inline std::optional<std::int64_t> first_mobile_cluster(const Configuration& cfg, std::int64_t x,
                                                        std::int64_t ell) {
  if (ell < 1) throw DomainError("box length must be at least 1");
  for (std::int64_t y = x; y <= x + ell - 1; ++y) {
    if (!cfg.at(y)) continue;
    if (cfg.at(y + 1)) return y;
    if (y + 2 <= x + ell && cfg.at(y + 2)) return y;
  }
  return std::nullopt;
}

// Sequence of bonds; step i exchanges labels bonds[i] and bonds[i]+1.
struct SwapPath {
  std::vector<std::int64_t> bonds;

  std::size_t length() const { return bonds.size(); }

  Configuration replay(Configuration cfg) const {
    for (auto s : bonds) swap_bond_inplace(cfg, s);
    return cfg;
  }
};

namespace detail {

class PathBuilder {
 public:
  explicit PathBuilder(Configuration cfg) : cfg_(std::move(cfg)) {}

  int at(std::int64_t s) const { return cfg_.at(s); }

  void jump(std::int64_t s) {
    if (!jump_allowed(cfg_, s)) throw std::logic_error("path construction produced a blocked jump");
    swap_bond_inplace(cfg_, s);
    bonds_.push_back(s);
  }

  std::size_t mark() const { return bonds_.size(); }

  // Undo the bonds recorded in [from, to) by replaying them backwards.
  void unwind(std::size_t from, std::size_t to) {
    for (std::size_t k = to; k > from; --k) jump(bonds_[k - 1]);
  }

  const Configuration& cfg() const { return cfg_; }
  std::vector<std::int64_t> take() { return std::move(bonds_); }

 private:
  Configuration cfg_;
  std::vector<std::int64_t> bonds_;
};

}  // namespace detail

// Path of positive-rate jumps from cfg to cfg with labels x+y and x+z
// exchanged, using only sites x+1..x+ell+ell0. Requires a mobile cluster
// inside x+ell+1..x+ell+ell0, i.e. is_good_box(cfg, x+ell+1, ell0-1).
//
// The cluster is walked left to sit just right of the pair of targets, then
// used to carry one target content leftwards and the other back, and finally
// the walk is replayed in reverse.
inline SwapPath build_swap_path(const Configuration& cfg, std::int64_t x, std::int64_t y,
                                std::int64_t z, std::int64_t ell, std::int64_t ell0) {
  if (ell < 1 || ell0 < 2) throw BadBox("box lengths too small");
  if (y < 1 || y > ell || z < 1 || z > ell) throw BadBox("targets must lie in x+1..x+ell");
  if (cfg.size() < 2 * (ell + ell0)) throw BadBox("torus too small for the window");
  const auto cluster = first_mobile_cluster(cfg, x + ell + 1, ell0 - 1);
  if (!cluster) throw BadBox("no mobile cluster in the box");

  const std::int64_t A = x + std::min(y, z), B = x + std::max(y, z);
  if (A == B || cfg.at(A) == cfg.at(B)) return {};

  detail::PathBuilder pb(cfg);

  // Walk the cluster, as an adjacent pair, down to (B+1, B+2).
  std::int64_t c = *cluster;
  if (!pb.at(c + 1)) pb.jump(c + 1);
  while (c > B + 1) {
    if (!pb.at(c - 1)) {
      pb.jump(c - 1);
      pb.jump(c);
    }
    --c;
  }
  const std::size_t walk_end = pb.mark();

  // Carry the content of B down to A in front of the pair: t u 1 1 -> u 1 1 t.
  for (c = B; c > A; --c) {
    const int t = pb.at(c - 1), u = pb.at(c);
    if (u == 0 && t == 0) {
      pb.jump(c);
      pb.jump(c + 1);
    } else if (u == 0) {
      pb.jump(c - 1);
    } else if (t == 0) {
      pb.jump(c - 1);
      pb.jump(c);
      pb.jump(c + 1);
    }
  }
  // Carry the content of A behind the pair back up: 1 1 u t -> t 1 1 u.
  for (c = A + 1; c < B; ++c) {
    const int u = pb.at(c + 2), t = pb.at(c + 3);
    if (u == 0 && t == 0) {
      pb.jump(c + 1);
      pb.jump(c);
    } else if (u == 0) {
      pb.jump(c + 2);
    } else if (t == 0) {
      pb.jump(c + 2);
      pb.jump(c + 1);
      pb.jump(c);
    }
  }
  // Step the pair over it: 1 1 a -> a 1 1.
  if (!pb.at(B + 2)) {
    pb.jump(B + 1);
    pb.jump(B);
  }

  pb.unwind(0, walk_end);
  return {pb.take()};
}

struct PathAudit {
  bool endpoint_ok = false;
  bool rates_positive = false;
  bool local = false;
  std::size_t length = 0;
  int max_bond_use = 0;
};

inline PathAudit audit_swap_path(const Configuration& cfg, const SwapPath& path, std::int64_t x,
                                 std::int64_t y, std::int64_t z, std::int64_t ell,
                                 std::int64_t ell0, const ModelParams& params) {
  PathAudit a;
  a.length = path.length();
  a.rates_positive = true;
  a.local = true;
  const auto rates = rate_lookup(params);
  std::map<std::int64_t, int> use;
  Configuration cur = cfg;
  for (auto s : path.bonds) {
    if (s < x + 1 || s + 1 > x + ell + ell0) a.local = false;
    if (!(rates[cur.pattern4(s)] > 0.0)) a.rates_positive = false;
    a.max_bond_use = std::max(a.max_bond_use, ++use[s]);
    swap_bond_inplace(cur, s);
  }
  a.endpoint_ok = cur == swap_sites(cfg, x + y, x + z);
  return a;
}

}  // namespace kls
