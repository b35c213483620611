#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tamesg {

using Point = Eigen::VectorXd;

/// Raised when an operation is called outside its preconditions
/// (dimension mismatch, non-finite input, bad parameters).
class ContractViolation : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// The function exposes subgradient selections only, no generator hull.
class HullUnavailable : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// No closed-form proximal map for this (constraint set, regularizer) pair.
class UnsupportedProx : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline bool all_finite(const Point &x) { return x.allFinite(); }

inline void require_dim(const Point &x, std::size_t dim, const char *what) {
  if (static_cast<std::size_t>(x.size()) != dim)
    throw ContractViolation(std::string(what) + ": expected dimension " +
                            std::to_string(dim) + ", got " +
                            std::to_string(x.size()));
  if (!x.allFinite())
    throw ContractViolation(std::string(what) + ": non-finite coordinates");
}

inline Point make_point(std::initializer_list<double> xs) {
  Point p(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double v : xs) p[i++] = v;
  return p;
}

inline Point to_point(const std::vector<double> &xs) {
  return Eigen::Map<const Eigen::VectorXd>(xs.data(),
                                           static_cast<Eigen::Index>(xs.size()));
}

inline std::vector<double> to_vector(const Point &p) {
  return {p.data(), p.data() + p.size()};
}

/// Strict lexicographic order on coordinates; used for deterministic
/// tie-breaking between equally good candidates.
inline bool lex_less(const Point &a, const Point &b) {
  for (Eigen::Index i = 0; i < std::min(a.size(), b.size()); ++i) {
    if (a[i] < b[i]) return true;
    if (b[i] < a[i]) return false;
  }
  return a.size() < b.size();
}

inline double sign_of(double t) { return (t > 0.0) - (t < 0.0); }

/// 64-bit FNV-1a; stable across platforms, used for config and CSV hashes.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return out;
}

/// Shortest round-trippable text for a double ("%.17g").
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

} // namespace tamesg
