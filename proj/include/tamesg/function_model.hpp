#pragma once

// Locally Lipschitz functions with Clarke subdifferential access, simple
// regularizers, constraint sets, and the proximal selection T_alpha.

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tamesg/convex_geometry.hpp"
#include "tamesg/core.hpp"
#include "tamesg/noise.hpp"
#include "tamesg/rng.hpp"

namespace tamesg {

/// A locally Lipschitz f : R^d -> R with a value oracle and access to its
/// Clarke subdifferential, either as a finite generator list whose convex
/// hull is the subdifferential, or as a single selection (for compositions
/// such as ReLU networks where no hull is computable).
///
/// When a hull oracle is present the canonical selection is the minimal-norm
/// element of the hull; this coincides with the gradient wherever f is
/// differentiable.
class PiecewiseLipschitzFunction {
public:
  using ValueFn = std::function<double(const Point &)>;
  using SelectFn = std::function<Point(const Point &)>;
  using HullFn = std::function<std::vector<Point>(const Point &)>;
  using LipschitzFn = std::function<double(const Point &, double)>;

  struct Parts {
    std::string name;
    std::size_t dim = 0;
    ValueFn value;
    SelectFn select;   // optional when `hull` is given
    HullFn hull;       // optional
    LipschitzFn lipschitz;
  };

  explicit PiecewiseLipschitzFunction(Parts p) : p_(std::move(p)) {
    if (p_.dim == 0) throw ContractViolation("function: dimension must be positive");
    if (!p_.value) throw ContractViolation("function: missing value oracle");
    if (!p_.select && !p_.hull)
      throw ContractViolation("function: needs a selection or a hull oracle");
  }

  const std::string &name() const { return p_.name; }
  std::size_t dim() const { return p_.dim; }
  bool has_hull() const { return static_cast<bool>(p_.hull); }

  double evaluate(const Point &x) const {
    require_dim(x, p_.dim, "evaluate");
    return p_.value(x);
  }

  Point subgrad_select(const Point &x) const {
    require_dim(x, p_.dim, "subgrad_select");
    if (p_.hull) return min_norm_point(Hull(p_.hull(x))).point;
    return p_.select(x);
  }

  std::vector<Point> hull_at(const Point &x) const {
    require_dim(x, p_.dim, "hull_at");
    if (!p_.hull)
      throw HullUnavailable("hull_at: '" + p_.name +
                            "' exposes subgradient selections only");
    return p_.hull(x);
  }

  /// dist(0, df(x)) through the hull oracle.
  double stationarity(const Point &x) const {
    return min_norm_point(Hull(hull_at(x))).norm;
  }

  /// Upper bound on the Lipschitz constant over the ball B(center, radius).
  double lipschitz_bound_on(const Point &center, double radius) const {
    require_dim(center, p_.dim, "lipschitz_bound_on");
    if (!p_.lipschitz) return std::numeric_limits<double>::infinity();
    return p_.lipschitz(center, radius);
  }

private:
  Parts p_;
};

/// Central finite-difference gradient with step h = rel * max(1, |x|).
inline Point fd_gradient(const std::function<double(const Point &)> &f,
                         const Point &x, double rel = 1e-6) {
  const double h = rel * std::max(1.0, x.norm());
  Point g(x.size());
  Point e = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    e[i] = x[i] + h;
    const double fp = f(e);
    e[i] = x[i] - h;
    const double fm = f(e);
    e[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Sampled-gradient stationarity surrogate: the norm of the min-norm point
/// of conv{selection(x), selection(x + u_i)} with u_i uniform in a ball.
/// Used where no exact hull oracle exists (e.g. ReLU networks).
inline double sampled_gradient_residual(const PiecewiseLipschitzFunction &f,
                                        const Point &x, double radius,
                                        std::size_t samples, CounterRng &rng) {
  std::vector<Point> grads;
  grads.reserve(samples + 1);
  grads.push_back(f.subgrad_select(x));
  for (std::size_t i = 0; i < samples; ++i)
    grads.push_back(f.subgrad_select(x + rng.uniform_ball(f.dim(), radius)));
  return min_norm_point(Hull(std::move(grads))).norm;
}

// ---------------------------------------------------------------------------
// Regularizers

enum class RegularizerKind { zero, l1, power_norm, custom };

inline const char *to_string(RegularizerKind k) {
  switch (k) {
  case RegularizerKind::zero: return "zero";
  case RegularizerKind::l1: return "l1";
  case RegularizerKind::power_norm: return "power-norm";
  case RegularizerKind::custom: return "custom";
  }
  return "?";
}

/// g(x) >= lower bound on X, with a descent modulus L(x) satisfying
///   L(x) >= (g(x) - g(z)) / |x - z|   whenever g(z) <= g(x).
/// The built-in kinds are convex, so L(x) = dist(0, dg(x)).
class Regularizer {
public:
  using ValueFn = std::function<double(const Point &)>;
  using VectorFn = std::function<Point(const Point &)>;
  using ProxFn = std::function<Point(double, const Point &)>;

  static Regularizer zero() { return Regularizer(RegularizerKind::zero, 0.0, 0.0); }

  static Regularizer l1(double weight) {
    if (!(weight >= 0.0) || !std::isfinite(weight))
      throw ContractViolation("l1 regularizer: weight must be >= 0");
    return Regularizer(RegularizerKind::l1, weight, 1.0);
  }

  /// weight * |x|^exponent with exponent > 1.
  static Regularizer power_norm(double weight, double exponent) {
    if (!(weight >= 0.0) || !std::isfinite(weight))
      throw ContractViolation("power-norm regularizer: weight must be >= 0");
    if (!(exponent > 1.0) || !std::isfinite(exponent))
      throw ContractViolation("power-norm regularizer: exponent must exceed 1");
    return Regularizer(RegularizerKind::power_norm, weight, exponent);
  }

  /// User-supplied regularizer; only usable with the full space.
  static Regularizer custom(std::string name, ValueFn value, VectorFn subgrad,
                            ProxFn prox, ValueFn modulus, double lower_bound) {
    Regularizer r(RegularizerKind::custom, 0.0, 0.0);
    r.name_ = std::move(name);
    r.value_ = std::move(value);
    r.subgrad_ = std::move(subgrad);
    r.prox_ = std::move(prox);
    r.modulus_ = std::move(modulus);
    r.lower_bound_ = lower_bound;
    return r;
  }

  RegularizerKind kind() const { return kind_; }
  double weight() const { return weight_; }
  double exponent() const { return exponent_; }
  double lower_bound_on_X() const { return lower_bound_; }
  const ProxFn &custom_prox() const { return prox_; }

  std::string describe() const {
    switch (kind_) {
    case RegularizerKind::zero: return "zero";
    case RegularizerKind::l1: return "l1(" + fmt_double(weight_) + ")";
    case RegularizerKind::power_norm:
      return "power-norm(" + fmt_double(weight_) + "," + fmt_double(exponent_) + ")";
    case RegularizerKind::custom: return "custom(" + name_ + ")";
    }
    return "?";
  }

  double value(const Point &x) const {
    switch (kind_) {
    case RegularizerKind::zero: return 0.0;
    case RegularizerKind::l1: return weight_ * x.lpNorm<1>();
    case RegularizerKind::power_norm: return weight_ * std::pow(x.norm(), exponent_);
    case RegularizerKind::custom: return value_(x);
    }
    return 0.0;
  }

  /// Minimal-norm subgradient.
  Point subgrad_select(const Point &x) const {
    switch (kind_) {
    case RegularizerKind::zero: return Point::Zero(x.size());
    case RegularizerKind::l1: {
      Point s(x.size());
      for (Eigen::Index i = 0; i < x.size(); ++i) s[i] = weight_ * sign_of(x[i]);
      return s;
    }
    case RegularizerKind::power_norm: {
      const double n = x.norm();
      if (n == 0.0) return Point::Zero(x.size());
      return (weight_ * exponent_ * std::pow(n, exponent_ - 2.0)) * x;
    }
    case RegularizerKind::custom: return subgrad_(x);
    }
    return Point::Zero(x.size());
  }

  double descent_modulus(const Point &x) const {
    switch (kind_) {
    case RegularizerKind::zero: return 0.0;
    case RegularizerKind::l1: {
      double nnz = 0.0;
      for (Eigen::Index i = 0; i < x.size(); ++i) nnz += x[i] != 0.0;
      return weight_ * std::sqrt(nnz);
    }
    case RegularizerKind::power_norm:
      return weight_ * exponent_ * std::pow(x.norm(), exponent_ - 1.0);
    case RegularizerKind::custom: return modulus_(x);
    }
    return 0.0;
  }

private:
  Regularizer(RegularizerKind k, double w, double e)
      : kind_(k), weight_(w), exponent_(e) {}

  RegularizerKind kind_;
  double weight_;
  double exponent_;
  double lower_bound_ = 0.0;
  std::string name_;
  ValueFn value_;
  VectorFn subgrad_;
  ProxFn prox_;
  ValueFn modulus_;
};

// ---------------------------------------------------------------------------
// Constraint sets

enum class ConstraintKind { full_space, box, ball, sphere, union_of_boxes, convex_polytope };

inline const char *to_string(ConstraintKind k) {
  switch (k) {
  case ConstraintKind::full_space: return "full-space";
  case ConstraintKind::box: return "box";
  case ConstraintKind::ball: return "ball";
  case ConstraintKind::sphere: return "sphere";
  case ConstraintKind::union_of_boxes: return "union-of-boxes";
  case ConstraintKind::convex_polytope: return "convex-polytope";
  }
  return "?";
}

struct Box {
  Point lo;
  Point hi;
};

class ConstraintSet {
public:
  static constexpr double kFeasTol = 1e-9;

  static ConstraintSet full_space(std::size_t dim) {
    ConstraintSet s(ConstraintKind::full_space, dim);
    return s;
  }

  static ConstraintSet box(Point lo, Point hi) {
    check_box(lo, hi);
    ConstraintSet s(ConstraintKind::box, static_cast<std::size_t>(lo.size()));
    s.boxes_.push_back({std::move(lo), std::move(hi)});
    return s;
  }

  static ConstraintSet ball(Point center, double radius) {
    if (!(radius > 0.0)) throw ContractViolation("ball: radius must be positive");
    ConstraintSet s(ConstraintKind::ball, static_cast<std::size_t>(center.size()));
    s.center_ = std::move(center);
    s.radius_ = radius;
    return s;
  }

  static ConstraintSet sphere(Point center, double radius) {
    if (!(radius > 0.0)) throw ContractViolation("sphere: radius must be positive");
    ConstraintSet s(ConstraintKind::sphere, static_cast<std::size_t>(center.size()));
    s.center_ = std::move(center);
    s.radius_ = radius;
    return s;
  }

  static ConstraintSet union_of_boxes(std::vector<Box> boxes) {
    if (boxes.empty()) throw ContractViolation("union-of-boxes: no boxes");
    for (const auto &b : boxes) check_box(b.lo, b.hi);
    const auto d = boxes.front().lo.size();
    for (const auto &b : boxes)
      if (b.lo.size() != d) throw ContractViolation("union-of-boxes: mixed dimensions");
    ConstraintSet s(ConstraintKind::union_of_boxes, static_cast<std::size_t>(d));
    s.boxes_ = std::move(boxes);
    return s;
  }

  /// Convex hull of the given vertices.
  static ConstraintSet convex_polytope(std::vector<Point> vertices) {
    Hull h(vertices);  // validates
    ConstraintSet s(ConstraintKind::convex_polytope, static_cast<std::size_t>(h.dim()));
    s.vertices_ = std::move(vertices);
    return s;
  }

  ConstraintKind kind() const { return kind_; }
  std::size_t dim() const { return dim_; }
  bool is_convex() const {
    return kind_ != ConstraintKind::sphere && kind_ != ConstraintKind::union_of_boxes;
  }
  const std::vector<Box> &boxes() const { return boxes_; }
  const Point &center() const { return center_; }
  double radius() const { return radius_; }
  const std::vector<Point> &vertices() const { return vertices_; }

  std::string describe() const { return to_string(kind_); }

  bool contains(const Point &x, double tol = kFeasTol) const {
    if (static_cast<std::size_t>(x.size()) != dim_ || !x.allFinite()) return false;
    switch (kind_) {
    case ConstraintKind::full_space: return true;
    case ConstraintKind::box: return in_box(boxes_.front(), x, tol);
    case ConstraintKind::ball: return (x - center_).norm() <= radius_ + tol;
    case ConstraintKind::sphere:
      return std::abs((x - center_).norm() - radius_) <= tol * std::max(1.0, radius_);
    case ConstraintKind::union_of_boxes:
      for (const auto &b : boxes_)
        if (in_box(b, x, tol)) return true;
      return false;
    case ConstraintKind::convex_polytope:
      return dist_to_hull(Hull(vertices_), x) <= tol;
    }
    return false;
  }

  /// Normal cone indicator helper: Euclidean projection (g = 0).
  Point project(const Point &z) const;

private:
  ConstraintSet(ConstraintKind k, std::size_t d) : kind_(k), dim_(d) {
    if (d == 0) throw ContractViolation("constraint set: dimension must be positive");
  }

  static void check_box(const Point &lo, const Point &hi) {
    if (lo.size() != hi.size() || lo.size() == 0)
      throw ContractViolation("box: bound dimensions differ");
    for (Eigen::Index i = 0; i < lo.size(); ++i)
      if (!(lo[i] <= hi[i])) throw ContractViolation("box: lo > hi");
  }

  static bool in_box(const Box &b, const Point &x, double tol) {
    for (Eigen::Index i = 0; i < x.size(); ++i)
      if (x[i] < b.lo[i] - tol || x[i] > b.hi[i] + tol) return false;
    return true;
  }

  ConstraintKind kind_;
  std::size_t dim_;
  std::vector<Box> boxes_;
  Point center_;
  double radius_ = 0.0;
  std::vector<Point> vertices_;
};

namespace detail {

inline double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

inline Point box_l1_prox(const Box &b, double thresh, const Point &z) {
  Point x(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i)
    x[i] = std::clamp(soft_threshold(z[i], thresh), b.lo[i], b.hi[i]);
  return x;
}

// argmin_s>=0 weight*s^p + (s - rho)^2 / (2 alpha); root of the monotone
// optimality condition weight*p*s^(p-1) + (s - rho)/alpha on [0, rho].
inline double power_radial(double weight, double p, double alpha, double rho) {
  if (rho == 0.0 || weight == 0.0) return rho;
  double lo = 0.0, hi = rho;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double slope = weight * p * std::pow(mid, p - 1.0) + (mid - rho) / alpha;
    if (slope > 0.0) hi = mid;
    else lo = mid;
    if (hi - lo <= 1e-12 * hi) break;
  }
  return 0.5 * (lo + hi);
}

[[noreturn]] inline void throw_unsupported(const ConstraintSet &X, const Regularizer &g) {
  throw UnsupportedProx(std::string("prox_step: no closed form for constraint '") +
                        to_string(X.kind()) + "' with regularizer '" +
                        to_string(g.kind()) + "'");
}

} // namespace detail

/// T_alpha(z): a global minimizer of g(x) + |x - z|^2 / (2 alpha) over X.
///
/// Supported combinations:
///   full-space       x zero | l1 | power-norm | custom
///   box              x zero | l1
///   union-of-boxes   x zero | l1   (best piece; ties broken lexicographically)
///   ball, sphere     x zero        (sphere at its center picks center + r e_1)
///   convex-polytope  x zero
inline Point prox_step(const ConstraintSet &X, const Regularizer &g, double alpha,
                       const Point &z) {
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw ContractViolation("prox_step: step must be positive");
  require_dim(z, X.dim(), "prox_step");
  const auto gk = g.kind();

  switch (X.kind()) {
  case ConstraintKind::full_space:
    switch (gk) {
    case RegularizerKind::zero: return z;
    case RegularizerKind::l1: {
      Point x(z.size());
      for (Eigen::Index i = 0; i < z.size(); ++i)
        x[i] = detail::soft_threshold(z[i], alpha * g.weight());
      return x;
    }
    case RegularizerKind::power_norm: {
      const double rho = z.norm();
      if (rho == 0.0) return z;
      const double s = detail::power_radial(g.weight(), g.exponent(), alpha, rho);
      return z * (s / rho);
    }
    case RegularizerKind::custom:
      if (!g.custom_prox()) detail::throw_unsupported(X, g);
      return g.custom_prox()(alpha, z);
    }
    break;

  case ConstraintKind::box:
    if (gk == RegularizerKind::zero) return detail::box_l1_prox(X.boxes().front(), 0.0, z);
    if (gk == RegularizerKind::l1)
      return detail::box_l1_prox(X.boxes().front(), alpha * g.weight(), z);
    break;

  case ConstraintKind::union_of_boxes:
    if (gk == RegularizerKind::zero || gk == RegularizerKind::l1) {
      const double t = gk == RegularizerKind::l1 ? alpha * g.weight() : 0.0;
      std::optional<Point> best;
      double best_obj = std::numeric_limits<double>::infinity();
      for (const auto &b : X.boxes()) {
        Point cand = detail::box_l1_prox(b, t, z);
        const double obj = g.value(cand) + (cand - z).squaredNorm() / (2.0 * alpha);
        const double tie = 1e-12 * (1.0 + std::abs(best_obj));
        const bool better = !best || obj < best_obj - tie;
        const bool tied = best && std::abs(obj - best_obj) <= tie && lex_less(cand, *best);
        if (better || tied) {
          best_obj = better ? obj : std::min(obj, best_obj);
          best = std::move(cand);
        }
      }
      return *best;
    }
    break;

  case ConstraintKind::ball:
    if (gk == RegularizerKind::zero) {
      const Point r = z - X.center();
      const double n = r.norm();
      if (n <= X.radius()) return z;
      return X.center() + r * (X.radius() / n);
    }
    break;

  case ConstraintKind::sphere:
    if (gk == RegularizerKind::zero) {
      const Point r = z - X.center();
      const double n = r.norm();
      if (n == 0.0) {
        Point e = Point::Zero(z.size());
        e[0] = X.radius();
        return X.center() + e;
      }
      return X.center() + r * (X.radius() / n);
    }
    break;

  case ConstraintKind::convex_polytope:
    if (gk == RegularizerKind::zero) {
      const Hull h(X.vertices());
      const auto res = min_norm_point(h.translated(z));
      // Rebuild from the barycentric weights so the output lies in the hull.
      Point x = Point::Zero(z.size());
      for (std::size_t i = 0; i < X.vertices().size(); ++i)
        x += res.weights[static_cast<Eigen::Index>(i)] * X.vertices()[i];
      return x;
    }
    break;
  }
  detail::throw_unsupported(X, g);
}

inline Point ConstraintSet::project(const Point &z) const {
  return prox_step(*this, Regularizer::zero(), 1.0, z);
}

/// zeta(x, omega) = subgrad_select(x) + xi, xi drawn from the noise model.
class StochasticOracle {
public:
  StochasticOracle(PiecewiseLipschitzFunction base, NoiseModel noise)
      : base_(std::move(base)), noise_(noise) {}

  const PiecewiseLipschitzFunction &base() const { return base_; }
  const NoiseModel &noise() const { return noise_; }

  Point sample(const Point &x, CounterRng &rng) const {
    return base_.subgrad_select(x) + noise_.draw(x, rng);
  }

  /// Second-moment bound p(x) given |selection| <= `selection_norm`.
  double second_moment_bound(const Point &x) const {
    const double s = base_.subgrad_select(x).norm();
    return s * s + noise_.second_moment_bound(x);
  }

private:
  PiecewiseLipschitzFunction base_;
  NoiseModel noise_;
};

/// min f(x) + g(x) over x in X. The stochastic part is attached by the
/// solver, which pairs `f` with the run's noise model.
class CompositeProblem {
public:
  /// Probe step of the computable criticality surrogate.
  static constexpr double kProbeStep = 1e-3;

  CompositeProblem(PiecewiseLipschitzFunction f, Regularizer g, ConstraintSet X)
      : f_(std::move(f)), g_(std::move(g)), X_(std::move(X)) {
    if (f_.dim() != X_.dim())
      throw ContractViolation("composite problem: dimensions of f and X differ");
  }

  const PiecewiseLipschitzFunction &f() const { return f_; }
  const Regularizer &g() const { return g_; }
  const ConstraintSet &X() const { return X_; }
  std::size_t dim() const { return f_.dim(); }

  double phi(const Point &x) const { return f_.evaluate(x) + g_.value(x); }

  Point prox(double alpha, const Point &z) const { return prox_step(X_, g_, alpha, z); }

  /// r(x) = |x - T_a(x - a v)| / a with v = subgrad_select_f(x), a = probe.
  /// A surrogate for dist(0, df + dg + N_X): zero exactly at composite
  /// critical points when f is smooth and g, X are convex.
  double prox_residual(const Point &x, double probe = kProbeStep) const {
    const Point v = f_.subgrad_select(x);
    return (x - prox(probe, x - probe * v)).norm() / probe;
  }

  /// Throws UnsupportedProx early if the pair has no implemented prox.
  void require_supported() const {
    (void)prox(1.0, Point::Zero(static_cast<Eigen::Index>(dim())));
  }

private:
  PiecewiseLipschitzFunction f_;
  Regularizer g_;
  ConstraintSet X_;
};

} // namespace tamesg
