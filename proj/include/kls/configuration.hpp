#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"

namespace kls {

// Occupation configuration on the discrete torus, packed 64 sites per word.
//
// Public site labels are 1-based and cyclic: label s refers to the site with
// zero-based index (s - 1) mod n, so label 0 is the same site as label n.
class Configuration {
 public:
  Configuration() = default;
  explicit Configuration(std::int64_t n) : n_(n), words_((n + 63) / 64, 0) {
    if (n < 1) throw DomainError("configuration needs at least one site");
  }

  static Configuration from_string(std::string_view s) {
    Configuration c(static_cast<std::int64_t>(s.size()));
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '1') c.set_index(i, true);
      else if (s[i] != '0') throw DomainError("configuration string must be 0/1");
    }
    return c;
  }

  static Configuration from_bits(std::uint64_t bits, std::int64_t n) {
    Configuration c(n);
    for (std::int64_t i = 0; i < n && i < 64; ++i) c.set_index(i, (bits >> i) & 1u);
    return c;
  }

  std::int64_t size() const { return n_; }

  std::size_t index_of(std::int64_t label) const {
    std::int64_t r = (label - 1) % n_;
    if (r < 0) r += n_;
    return static_cast<std::size_t>(r);
  }

  bool get_index(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }
  void set_index(std::size_t i, bool v) {
    const std::uint64_t m = std::uint64_t{1} << (i & 63);
    if (v) words_[i >> 6] |= m;
    else words_[i >> 6] &= ~m;
  }

  int at(std::int64_t label) const { return get_index(index_of(label)) ? 1 : 0; }
  void set(std::int64_t label, bool v) { set_index(index_of(label), v); }

  // Bits k = 0..len-1 of the result hold the occupations of labels start+k.
  // len <= 64; wraps around the torus.
  std::uint64_t window(std::int64_t start, int len) const {
    std::size_t i = index_of(start);
    if (i + static_cast<std::size_t>(len) <= static_cast<std::size_t>(n_)) {
      const std::size_t w = i >> 6, off = i & 63;
      std::uint64_t v = words_[w] >> off;
      if (off + len > 64 && w + 1 < words_.size()) v |= words_[w + 1] << (64 - off);
      return len == 64 ? v : v & ((std::uint64_t{1} << len) - 1);
    }
    std::uint64_t v = 0;
    for (int k = 0; k < len; ++k) {
      if (get_index(i)) v |= std::uint64_t{1} << k;
      if (++i == static_cast<std::size_t>(n_)) i = 0;
    }
    return v;
  }

  // (eta_{s-1}, eta_s, eta_{s+1}, eta_{s+2}) as bits 0..3; the local
  // environment of bond (s, s+1).
  unsigned pattern4(std::int64_t s) const { return static_cast<unsigned>(window(s - 1, 4)); }

  std::int64_t particle_count() const {
    std::int64_t c = 0;
    for (auto w : words_) c += std::popcount(w);
    return c;
  }

  // Low 64 bits as an integer code (bit i = zero-based site i); for n <= 64.
  std::uint64_t code() const { return words_.empty() ? 0 : words_[0]; }

  std::string to_string() const {
    std::string s(static_cast<std::size_t>(n_), '0');
    for (std::int64_t i = 0; i < n_; ++i)
      if (get_index(static_cast<std::size_t>(i))) s[static_cast<std::size_t>(i)] = '1';
    return s;
  }

  friend bool operator==(const Configuration& a, const Configuration& b) {
    return a.n_ == b.n_ && a.words_ == b.words_;
  }

 private:
  std::int64_t n_ = 0;
  std::vector<std::uint64_t> words_;
};

// Exchange the occupations of labels x and x+1.
inline Configuration swap_bond(const Configuration& cfg, std::int64_t x) {
  Configuration out = cfg;
  const std::size_t i = cfg.index_of(x), j = cfg.index_of(x + 1);
  const bool a = cfg.get_index(i), b = cfg.get_index(j);
  out.set_index(i, b);
  out.set_index(j, a);
  return out;
}

inline void swap_bond_inplace(Configuration& cfg, std::int64_t x) {
  const std::size_t i = cfg.index_of(x), j = cfg.index_of(x + 1);
  const bool a = cfg.get_index(i), b = cfg.get_index(j);
  cfg.set_index(i, b);
  cfg.set_index(j, a);
}

// Exchange the occupations of two arbitrary labels.
inline Configuration swap_sites(const Configuration& cfg, std::int64_t x, std::int64_t y) {
  Configuration out = cfg;
  out.set(x, cfg.at(y));
  out.set(y, cfg.at(x));
  return out;
}

// H(eta) = sum over the torus of eta_y eta_{y+1}.
inline std::int64_t hamiltonian(const Configuration& cfg) {
  std::int64_t h = 0;
  const std::int64_t n = cfg.size();
  for (std::int64_t i = 0; i < n; ++i)
    h += cfg.get_index(static_cast<std::size_t>(i)) &&
         cfg.get_index(static_cast<std::size_t>((i + 1) % n));
  return h;
}

enum class Side { Left, Right };

// Centred block average over floor(L) sites strictly to one side of x.
inline double block_average(const Configuration& cfg, std::int64_t x, double L, Side side,
                            double rho_bar) {
  if (!(L >= 1.0)) throw DomainError("block length must be at least 1");
  const auto len = static_cast<std::int64_t>(std::floor(L));
  const std::int64_t first = side == Side::Left ? x - len : x + 1;
  std::int64_t occ = 0;
  for (std::int64_t k = 0; k < len; ++k) occ += cfg.at(first + k);
  return static_cast<double>(occ) / static_cast<double>(len) - rho_bar;
}

}  // namespace kls
