#pragma once

// Subgradient flow z' in -df(z) with the minimal-norm velocity, its proximal
// (composite) counterpart, interpolated iterate paths, and the verifiers
// built on them: the chain rule along arcs, the descent identity
//   f(z(0)) - f(z(T)) = int_0^T dist^2(0, df(z(s))) ds,
// and the sup-gap between shifted iterate paths and flow trajectories.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tamesg/convex_geometry.hpp"
#include "tamesg/function_model.hpp"
#include "tamesg/run_log.hpp"

namespace tamesg {

enum class FlowStatus { completed, reached_critical };

inline const char *to_string(FlowStatus s) {
  return s == FlowStatus::completed ? "completed" : "reached-critical";
}

struct Trajectory {
  std::string source;
  std::vector<double> times;
  std::vector<Point> points;
  std::vector<Point> velocities;
  std::vector<double> values;  // f (or phi for composite flows) at each node
  /// Nodes whose velocity came from the union of one-sided generator sets
  /// (the field is discontinuous there and the oracle saw only one side).
  std::vector<bool> sliding;
  double h = 0.0;
  FlowStatus status = FlowStatus::completed;
  bool composite = false;

  std::size_t size() const { return points.size(); }
  double horizon() const { return times.empty() ? 0.0 : times.back(); }
};

struct FlowOptions {
  double crit_tol = 1e-8;
  /// Bisection depth used to locate a kink inside a step.
  int kink_bisections = 120;
};

namespace detail {

inline Point min_norm_of(const std::vector<Point> &gens) {
  if (gens.size() == 1) return gens.front();
  return min_norm_point(Hull(gens)).point;
}

inline void push_node(Trajectory &tr, double t, const Point &z, const Point &v,
                      double value, bool sliding) {
  tr.times.push_back(t);
  tr.points.push_back(z);
  tr.velocities.push_back(v);
  tr.values.push_back(value);
  tr.sliding.push_back(sliding);
}

} // namespace detail

/// Explicit Euler on z' = -minnorm(df(z)).
///
/// The velocity field is discontinuous across kinks, so a plain Euler step
/// chatters around them. When the velocity at the tentative endpoint points
/// against the current one, the first such point along the step is located
/// by bisection and a node is placed there. If that point is critical the
/// flow halts with `reached_critical`; if the kink cannot be resolved to a
/// positive time step, the min-norm element over the generators from both
/// sides is used (Filippov sliding) and the node is marked `sliding`.
inline Trajectory integrate_flow(const PiecewiseLipschitzFunction &f, const Point &z0,
                                 double T, double h, const FlowOptions &opt = {}) {
  if (!(h > 0.0)) throw ContractViolation("integrate_flow: step h must be positive");
  if (!(T >= 0.0) || !std::isfinite(T))
    throw ContractViolation("integrate_flow: horizon T must be finite and >= 0");
  require_dim(z0, f.dim(), "integrate_flow: z0");
  if (!f.has_hull())
    throw HullUnavailable("integrate_flow: '" + f.name() + "' has no hull oracle");

  Trajectory tr;
  tr.source = f.name();
  tr.h = h;
  Point z = z0;
  double t = 0.0;
  const double t_eps = 1e-12 * std::max(1.0, T);

  auto velocity_at = [&](const Point &p) -> Point { return -detail::min_norm_of(f.hull_at(p)); };

  Point u = velocity_at(z);
  bool sliding = false;
  for (;;) {
    if (u.norm() <= opt.crit_tol) {
      detail::push_node(tr, t, z, Point::Zero(z.size()), f.evaluate(z), sliding);
      tr.status = FlowStatus::reached_critical;
      return tr;
    }
    detail::push_node(tr, t, z, u, f.evaluate(z), sliding);
    if (t >= T - t_eps) return tr;

    const double dt = std::min(h, T - t);
    const Point z_end = z + dt * u;
    const Point u_end = velocity_at(z_end);
    if (u_end.dot(u) > 0.0) {
      z = z_end;
      t += dt;
      u = u_end;
      sliding = false;
      continue;
    }

    // Reversal: locate the first point along the step where it happens.
    double lo = 0.0, hi = 1.0;
    Point u_hi = u_end;
    for (int it = 0; it < opt.kink_bisections && hi - lo > 1e-17; ++it) {
      const double mid = 0.5 * (lo + hi);
      const Point u_mid = velocity_at(z + (mid * dt) * u);
      if (u_mid.dot(u) > 0.0) lo = mid;
      else {
        hi = mid;
        u_hi = u_mid;
      }
    }
    if (hi * dt > 1e-9 * dt && t + hi * dt > t) {
      z = z + (hi * dt) * u;
      t += hi * dt;
      u = u_hi;
      sliding = false;
      continue;
    }
    // Kink at the current node: combine generators from both sides.
    std::vector<Point> gens = f.hull_at(z);
    for (auto &g : f.hull_at(z + (hi * dt) * u)) gens.push_back(std::move(g));
    for (auto &g : f.hull_at(z_end)) gens.push_back(std::move(g));
    const Point slide = -min_norm_point(Hull(std::move(gens))).point;
    tr.sliding.back() = true;
    tr.velocities.back() = slide;
    if (slide.norm() <= opt.crit_tol) {
      tr.velocities.back() = Point::Zero(z.size());
      tr.status = FlowStatus::reached_critical;
      return tr;
    }
    z = z + dt * slide;
    t += dt;
    u = velocity_at(z);
    sliding = false;
  }
}

/// Proximal discretization of z' in -(df + dg + N_X)(z):
///   z_{i+1} = T_h(z_i - h v_i),  v_i = subgrad_select_f(z_i),
/// each step advancing time by h. The recorded velocity is the realized
/// (z_{i+1} - z_i)/h. Halts with `reached_critical` at a fixed point of the
/// step map (realized speed <= crit_tol).
inline Trajectory integrate_composite_flow(const CompositeProblem &p, const Point &z0,
                                           double T, double h, const FlowOptions &opt = {}) {
  if (!(h > 0.0)) throw ContractViolation("integrate_composite_flow: step h must be positive");
  if (!(T >= 0.0) || !std::isfinite(T))
    throw ContractViolation("integrate_composite_flow: horizon T must be finite and >= 0");
  require_dim(z0, p.dim(), "integrate_composite_flow: z0");
  p.require_supported();
  if (!p.X().contains(z0)) throw ContractViolation("integrate_composite_flow: z0 not in X");

  Trajectory tr;
  tr.source = p.f().name();
  tr.h = h;
  tr.composite = true;
  Point z = z0;
  double t = 0.0;
  const double t_eps = 1e-12 * std::max(1.0, T);
  for (;;) {
    // Probe with a full step so criticality does not depend on the last dt.
    const Point probe = p.prox(h, z - h * p.f().subgrad_select(z));
    const Point probe_v = (probe - z) / h;
    if (probe_v.norm() <= opt.crit_tol) {
      detail::push_node(tr, t, z, Point::Zero(z.size()), p.phi(z), false);
      tr.status = FlowStatus::reached_critical;
      return tr;
    }
    if (t >= T - t_eps) {
      detail::push_node(tr, t, z, probe_v, p.phi(z), false);
      return tr;
    }
    const double dt = std::min(h, T - t);
    const Point next = dt == h ? probe : p.prox(dt, z - dt * p.f().subgrad_select(z));
    detail::push_node(tr, t, z, (next - z) / dt, p.phi(z), false);
    z = next;
    t += dt;
  }
}

// ---------------------------------------------------------------------------
// Interpolated and shifted paths

/// Piecewise-linear path through (t_k, x_k); returns x_k exactly at t_k.
class InterpolatedPath {
public:
  InterpolatedPath(std::vector<double> times, std::vector<Point> anchors)
      : times_(std::move(times)), anchors_(std::move(anchors)) {
    if (times_.empty()) throw ContractViolation("InterpolatedPath: empty log");
    if (times_.size() != anchors_.size())
      throw ContractViolation("InterpolatedPath: times/anchors size mismatch");
    for (std::size_t i = 1; i < times_.size(); ++i)
      if (!(times_[i] > times_[i - 1]))
        throw ContractViolation("InterpolatedPath: breakpoints must increase strictly");
  }

  double start() const { return times_.front(); }
  double end() const { return times_.back(); }
  const std::vector<double> &breakpoints() const { return times_; }
  const std::vector<Point> &anchors() const { return anchors_; }

  Point evaluate(double t) const {
    if (!(t >= times_.front() && t <= times_.back()))
      throw ContractViolation("InterpolatedPath: time " + fmt_double(t) +
                              " outside [" + fmt_double(times_.front()) + ", " +
                              fmt_double(times_.back()) + "]");
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    const auto i = static_cast<std::size_t>(it - times_.begin()) - 1;
    if (t == times_[i] || i + 1 == times_.size()) return anchors_[i];
    const double w = (t - times_[i]) / (times_[i + 1] - times_[i]);
    return anchors_[i] + w * (anchors_[i + 1] - anchors_[i]);
  }

  /// Index k with t_k <= t < t_{k+1} (last index at the end).
  std::size_t segment(double t) const {
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    if (it == times_.begin()) return 0;
    return std::min(static_cast<std::size_t>(it - times_.begin()) - 1, times_.size() - 1);
  }

private:
  std::vector<double> times_;
  std::vector<Point> anchors_;
};

/// x^tau(t) = x(tau + t).
class ShiftedPath {
public:
  ShiftedPath(std::shared_ptr<const InterpolatedPath> base, double tau)
      : base_(std::move(base)), tau_(tau) {
    if (!base_) throw ContractViolation("ShiftedPath: null base");
    if (!(tau_ >= 0.0)) throw ContractViolation("ShiftedPath: shift must be >= 0");
  }
  double tau() const { return tau_; }
  const InterpolatedPath &base() const { return *base_; }
  Point evaluate(double t) const { return base_->evaluate(tau_ + t); }
  double horizon() const { return base_->end() - tau_; }

private:
  std::shared_ptr<const InterpolatedPath> base_;
  double tau_;
};

inline InterpolatedPath interpolate(const RunLog &log) {
  if (log.records.empty()) throw ContractViolation("interpolate: empty log");
  std::vector<double> t;
  std::vector<Point> x;
  for (const auto &r : log.records) {
    t.push_back(r.t);
    x.push_back(r.x);
  }
  return {std::move(t), std::move(x)};
}

inline InterpolatedPath interpolate(const Trajectory &tr) {
  return {tr.times, tr.points};
}

inline ShiftedPath shift(std::shared_ptr<const InterpolatedPath> path, double tau) {
  return {std::move(path), tau};
}

inline ShiftedPath shift(const ShiftedPath &p, double tau) {
  return {std::make_shared<const InterpolatedPath>(p.base()), p.tau() + tau};
}

// ---------------------------------------------------------------------------
// Chain rule

/// A differentiable-a.e. curve given by position and velocity oracles.
struct Arc {
  std::function<Point(double)> position;
  std::function<Point(double)> velocity;
  double t0 = 0.0;
  double t1 = 1.0;
};

struct ChainRuleReport {
  double max_violation = 0.0;
  double worst_time = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // kink crossings

  double skipped_fraction() const {
    const auto n = checked + skipped;
    return n ? static_cast<double>(skipped) / static_cast<double>(n) : 0.0;
  }
};

namespace detail {

// Two one-sided difference quotients of f o z on a smooth piece differ by
// O(delta |f''| |z'|^2); a window straddling a kink separates them by O(1).
inline constexpr double kKinkQuotientGap = 1e-4;

// At time t with window delta: compares the centered difference of f o z
// with <v, z'(t)> for every generator v of df(z(t)). Skips (returns false)
// when the window straddles a kink: the generator count changes across
// [t - delta, t + delta], or f o z has a corner there (the one-sided
// quotients disagree). Such t form a null set for an arc, which is all the
// chain rule asks.
inline bool chain_rule_sample(const PiecewiseLipschitzFunction &f, const Point &zm,
                              const Point &z, const Point &zp, const Point &vel,
                              double delta, double &violation) {
  const auto gm = f.hull_at(zm).size();
  const auto gens = f.hull_at(z);
  const auto gp = f.hull_at(zp).size();
  if (gm != gens.size() || gp != gens.size()) return false;
  const double fm = f.evaluate(zm), fz = f.evaluate(z), fp = f.evaluate(zp);
  const double left = (fz - fm) / delta, right = (fp - fz) / delta;
  if (std::abs(right - left) > kKinkQuotientGap * (1.0 + vel.squaredNorm())) return false;
  const double d = 0.5 * (left + right);
  violation = 0.0;
  for (const auto &v : gens) violation = std::max(violation, std::abs(d - v.dot(vel)));
  return true;
}

inline void record(ChainRuleReport &rep, bool ok, double viol, double t) {
  if (!ok) {
    ++rep.skipped;
    return;
  }
  ++rep.checked;
  if (viol > rep.max_violation) {
    rep.max_violation = viol;
    rep.worst_time = t;
  }
}

} // namespace detail

/// Chain rule along an arbitrary arc at `samples` evenly spaced interior
/// times, with centered-difference window `delta`.
inline ChainRuleReport check_chain_rule(const PiecewiseLipschitzFunction &f, const Arc &arc,
                                        std::size_t samples, double delta = 1e-6) {
  if (samples == 0) throw ContractViolation("check_chain_rule: need samples > 0");
  if (!(arc.t1 > arc.t0)) throw ContractViolation("check_chain_rule: empty time window");
  ChainRuleReport rep;
  const double span = arc.t1 - arc.t0;
  const double dl = std::min(delta, 0.25 * span / static_cast<double>(samples));
  for (std::size_t j = 0; j < samples; ++j) {
    const double t = arc.t0 + (static_cast<double>(j) + 0.5) * span / static_cast<double>(samples);
    double viol = 0.0;
    const bool ok = detail::chain_rule_sample(f, arc.position(t - dl), arc.position(t),
                                              arc.position(t + dl), arc.velocity(t), dl, viol);
    detail::record(rep, ok, viol, t);
  }
  return rep;
}

/// Chain rule along the piecewise-linear arc through the trajectory nodes,
/// sampled at segment midpoints (every segment when `samples` is 0,
/// otherwise `samples` evenly chosen segments).
inline ChainRuleReport check_chain_rule(const PiecewiseLipschitzFunction &f,
                                        const Trajectory &tr, std::size_t samples = 0,
                                        double delta = 1e-6) {
  ChainRuleReport rep;
  if (tr.size() < 2) return rep;
  const std::size_t segs = tr.size() - 1;
  const std::size_t n = samples == 0 ? segs : std::min(samples, segs);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t i = n == segs ? j : (j * segs) / n;
    const double len = tr.times[i + 1] - tr.times[i];
    const Point vel = (tr.points[i + 1] - tr.points[i]) / len;
    const double dl = std::min(delta, 0.25 * len);
    const double tm = tr.times[i] + 0.5 * len;
    const Point zc = tr.points[i] + (0.5 * len) * vel;
    double viol = 0.0;
    const bool ok = detail::chain_rule_sample(f, zc - dl * vel, zc, zc + dl * vel, vel, dl, viol);
    detail::record(rep, ok, viol, tm);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Descent identity

struct DescentReport {
  double drop = 0.0;      // f(z(0)) - f(z(T))
  double integral = 0.0;  // trapezoid of dist^2(0, df(z)) over the nodes
  double residual = 0.0;  // |drop - integral|
  bool monotone = true;   // f nonincreasing along nodes
};

inline DescentReport check_descent_identity(const PiecewiseLipschitzFunction &f,
                                            const Trajectory &tr) {
  if (tr.size() == 0) throw ContractViolation("check_descent_identity: empty trajectory");
  DescentReport rep;
  std::vector<double> d2(tr.size());
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const double d = f.stationarity(tr.points[i]);
    d2[i] = d * d;
  }
  for (std::size_t i = 0; i + 1 < tr.size(); ++i)
    rep.integral += 0.5 * (tr.times[i + 1] - tr.times[i]) * (d2[i] + d2[i + 1]);
  double prev = f.evaluate(tr.points.front());
  for (std::size_t i = 1; i < tr.size(); ++i) {
    const double cur = f.evaluate(tr.points[i]);
    if (cur > prev + 1e-12 * (1.0 + std::abs(prev))) rep.monotone = false;
    prev = cur;
  }
  rep.drop = f.evaluate(tr.points.front()) - f.evaluate(tr.points.back());
  rep.residual = std::abs(rep.drop - rep.integral);
  return rep;
}

// ---------------------------------------------------------------------------
// Functional approximation

struct ShiftGap {
  double tau = 0.0;
  std::size_t index = 0;    // k with t_k <= tau < t_{k+1}
  double local_step = 0.0;  // a_k at that index
  double gap = 0.0;         // sup_{t in [0,T]} |x^tau(t) - z(t)|
};

struct GapReport {
  double window = 0.0;
  std::vector<ShiftGap> shifts;
};

/// For each shift tau, integrates the flow from x^tau(0) over [0, T] with
/// step `h` and measures the sup-distance to the shifted iterate path on
/// the union of both breakpoint grids. A flow that reaches a critical point
/// is held there for the rest of the window.
inline GapReport functional_approximation_gap(const RunLog &log,
                                              const PiecewiseLipschitzFunction &f,
                                              double T, const std::vector<double> &shifts,
                                              double h = 1e-5) {
  if (!(T > 0.0)) throw ContractViolation("functional_approximation_gap: T must be positive");
  auto path = std::make_shared<const InterpolatedPath>(interpolate(log));
  GapReport rep;
  rep.window = T;
  for (double tau : shifts) {
    if (tau < path->start() || tau + T > path->end())
      throw ContractViolation("functional_approximation_gap: window [" + fmt_double(tau) +
                              ", " + fmt_double(tau + T) + "] exceeds logged horizon " +
                              fmt_double(path->end()));
    const ShiftedPath xs = shift(path, tau);
    const Trajectory z = integrate_flow(f, xs.evaluate(0.0), T, h);
    const InterpolatedPath zp = interpolate(z);
    auto flow_at = [&](double s) -> Point {
      if (s >= zp.end()) return zp.anchors().back();
      return zp.evaluate(s);
    };
    ShiftGap g;
    g.tau = tau;
    g.index = path->segment(tau);
    g.local_step = log.records[g.index].alpha;
    if (g.local_step == 0.0 && g.index + 1 < log.records.size())
      g.local_step = log.records[g.index + 1].t - log.records[g.index].t;
    for (double s : z.times) g.gap = std::max(g.gap, (xs.evaluate(s) - flow_at(s)).norm());
    for (std::size_t k = g.index; k < path->breakpoints().size(); ++k) {
      const double s = path->breakpoints()[k] - tau;
      if (s < 0.0) continue;
      if (s > T) break;
      g.gap = std::max(g.gap, (path->anchors()[k] - flow_at(s)).norm());
    }
    g.gap = std::max(g.gap, (xs.evaluate(T) - flow_at(T)).norm());
    rep.shifts.push_back(g);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Serialization (same column layout as RunLog; y holds the velocity)

inline RunLog as_run_log(const Trajectory &tr, const PiecewiseLipschitzFunction &f) {
  RunLog log;
  log.source = tr.source;
  log.dim = f.dim();
  log.iterations = log.budget = tr.size() ? tr.size() - 1 : 0;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    RunRecord r;
    r.k = i;
    r.t = tr.times[i];
    r.x = tr.points[i];
    r.y = tr.velocities[i];
    r.f = f.evaluate(tr.points[i]);
    r.phi = tr.values[i];
    r.crit_residual = tr.velocities[i].norm();
    log.records.push_back(std::move(r));
  }
  return log;
}

} // namespace tamesg
