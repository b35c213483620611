#pragma once

// The three discrete processes:
//   generic noisy Euler     x_{k+1} = x_k + a_k (y_k + xi_k),  y_k = G(x_k)
//   stochastic subgradient  x_{k+1} = x_k - a_k (y_k + xi_k),  y_k in df(x_k)
//   proximal stochastic     x_{k+1} = T_{a_k}(x_k - a_k zeta(x_k, w_k))
//
// Boundedness of the iterates is an assumption of the convergence theory,
// not a conclusion; runs therefore carry a guard radius and stop with status
// `unbounded_iterates` when it is exceeded.

#include <functional>
#include <optional>
#include <string>

#include "tamesg/function_model.hpp"
#include "tamesg/noise.hpp"
#include "tamesg/rng.hpp"
#include "tamesg/run_log.hpp"
#include "tamesg/schedules.hpp"

namespace tamesg {

struct RunConfig {
  Point x0;
  StepSchedule schedule = StepSchedule::polynomial(0.5, 0.75);
  NoiseModel noise;
  std::size_t K = 1000;
  std::uint64_t seed = 0;
  std::size_t log_stride = 100;
  /// The last `dense_tail` iterates are always logged.
  std::size_t dense_tail = 1000;
  std::optional<double> guard_radius = 1e6;
  /// Radius and sample count of the sampled-gradient residual used for
  /// functions without a hull oracle.
  double surrogate_radius = 1e-4;
  std::size_t surrogate_samples = 50;
  /// Free-form label folded into the config hash (e.g. the problem name).
  std::string label;
};

inline std::string canonical_string(const RunConfig &c) {
  std::string s = "label=" + c.label + ";x0=";
  for (Eigen::Index i = 0; i < c.x0.size(); ++i)
    s += (i ? "," : "") + fmt_double(c.x0[i]);
  s += ";schedule=" + c.schedule.describe();
  s += ";noise=" + c.noise.describe();
  s += ";K=" + std::to_string(c.K) + ";seed=" + std::to_string(c.seed);
  s += ";stride=" + std::to_string(c.log_stride) + ";tail=" + std::to_string(c.dense_tail);
  s += ";guard=" + (c.guard_radius ? fmt_double(*c.guard_radius) : std::string("none"));
  return s;
}

inline std::string config_hash(const RunConfig &c) { return hex64(fnv1a64(canonical_string(c))); }

namespace detail {

inline void validate_config(const RunConfig &c, std::size_t dim) {
  if (c.K < 1) throw ContractViolation("run: iteration budget K must be >= 1");
  if (c.log_stride < 1) throw ContractViolation("run: log stride must be >= 1");
  if (c.guard_radius && !(*c.guard_radius > 0.0))
    throw ContractViolation("run: guard radius must be positive");
  require_dim(c.x0, dim, "run: x0");
  if (const auto h = c.schedule.horizon(); h && *h < c.K)
    throw ContractViolation("run: step table shorter than the iteration budget");
}

inline bool should_log(std::size_t k, const RunConfig &c) {
  return k % c.log_stride == 0 || k + c.dense_tail >= c.K || k == c.K;
}

inline RunLog start_log(const RunConfig &c, std::size_t dim, std::string source) {
  RunLog log;
  log.source = std::move(source);
  log.seed = c.seed;
  log.config_hash = config_hash(c);
  log.dim = dim;
  log.budget = c.K;
  log.max_norm = c.x0.norm();
  return log;
}

// Generic driver. `direction(x)` returns (y, record fields); `advance`
// produces x_{k+1} from (x, a, y, xi). Both are called once per iteration.
struct StepView {
  Point y;
  double f = 0.0;
  double phi = 0.0;
};

template <class Direction, class Residual, class Advance>
RunLog drive(const RunConfig &c, RunLog log, Direction &&direction,
             Residual &&residual, Advance &&advance) {
  CounterRng noise_rng(c.seed, Stream::noise);
  Point x = c.x0;
  double t = 0.0;
  for (std::size_t k = 0;; ++k) {
    StepView view = direction(x);
    const bool last = k == c.K;
    const bool guard_hit = c.guard_radius && x.norm() > *c.guard_radius;
    RunRecord rec;
    if (last || guard_hit || should_log(k, c)) {
      rec.k = k;
      rec.t = t;
      rec.x = x;
      rec.y = view.y;
      rec.f = view.f;
      rec.phi = view.phi;
      rec.crit_residual = residual(x, view);
    }
    if (last || guard_hit) {
      rec.noise = Point::Zero(x.size());
      log.records.push_back(std::move(rec));
      log.iterations = k;
      if (guard_hit) log.status = RunStatus::unbounded_iterates;
      return log;
    }
    Point xi = c.noise.draw(x, noise_rng);
    const double a = c.schedule.step(k);
    if (should_log(k, c)) {
      rec.alpha = a;
      rec.noise = xi;
      log.records.push_back(std::move(rec));
    }
    x = advance(x, a, view.y, xi);
    t += a;
    log.max_norm = std::max(log.max_norm, x.norm());
  }
}

inline double hull_or_surrogate_residual(const PiecewiseLipschitzFunction &f,
                                         const RunConfig &c, CounterRng &rng,
                                         const Point &x, const Point &selection) {
  // With a hull oracle the canonical selection is the min-norm element.
  if (f.has_hull()) return selection.norm();
  return sampled_gradient_residual(f, x, c.surrogate_radius, c.surrogate_samples, rng);
}

} // namespace detail

/// Stochastic subgradient method: x_{k+1} = x_k - a_k (y_k + xi_k).
/// Logged residual is dist(0, df(x_k)) when f has a hull oracle and the
/// sampled-gradient surrogate otherwise.
inline RunLog run_sgm(const PiecewiseLipschitzFunction &f, const RunConfig &c) {
  detail::validate_config(c, f.dim());
  CounterRng sampling(c.seed, Stream::sampling);
  return detail::drive(
      c, detail::start_log(c, f.dim(), f.name()),
      [&](const Point &x) {
        const double fx = f.evaluate(x);
        return detail::StepView{f.subgrad_select(x), fx, fx};
      },
      [&](const Point &x, const detail::StepView &v) {
        return detail::hull_or_surrogate_residual(f, c, sampling, x, v.y);
      },
      [](const Point &x, double a, const Point &y, const Point &xi) -> Point {
        return x - a * (y + xi);
      });
}

/// Generic stochastic approximation x_{k+1} = x_k + a_k (G(x_k) + xi_k).
/// `lyapunov`, when given, fills the f/phi columns; otherwise they are NaN.
/// Logged residual is |G(x_k)|.
inline RunLog run_generic(const RunConfig &c, std::size_t dim,
                          const std::function<Point(const Point &)> &velocity,
                          const std::function<double(const Point &)> &lyapunov = {},
                          std::string source = "generic") {
  detail::validate_config(c, dim);
  return detail::drive(
      c, detail::start_log(c, dim, std::move(source)),
      [&](const Point &x) {
        const double fx =
            lyapunov ? lyapunov(x) : std::numeric_limits<double>::quiet_NaN();
        return detail::StepView{velocity(x), fx, fx};
      },
      [](const Point &, const detail::StepView &v) { return v.y.norm(); },
      [](const Point &x, double a, const Point &y, const Point &xi) -> Point {
        return x + a * (y + xi);
      });
}

/// Proximal stochastic subgradient method
///   x_{k+1} = T_{a_k}(x_k - a_k (v_k + xi_k)),  v_k = subgrad_select_f(x_k).
/// Every step is checked against the prox displacement bound
///   |x_k - x_{k+1}| / a_k <= 2 L(x_k) + 2 |zeta_k|
/// and for feasibility of x_{k+1}.
inline RunLog run_prox_sgm(const CompositeProblem &p, const RunConfig &c) {
  detail::validate_config(c, p.dim());
  p.require_supported();
  if (!p.X().contains(c.x0)) throw ContractViolation("run_prox_sgm: x0 is not in X");

  RunLog log = detail::start_log(c, p.dim(), p.f().name());
  log.composite = true;
  std::size_t checks = 0, violations = 0, infeasible = 0;
  double worst_ratio = 0.0;

  RunLog out = detail::drive(
      c, std::move(log),
      [&](const Point &x) {
        const double fx = p.f().evaluate(x);
        return detail::StepView{p.f().subgrad_select(x), fx, fx + p.g().value(x)};
      },
      [&](const Point &x, const detail::StepView &) { return p.prox_residual(x); },
      [&](const Point &x, double a, const Point &v, const Point &xi) -> Point {
        const Point zeta = v + xi;
        Point next = p.prox(a, x - a * zeta);
        if (a > 0.0) {
          const double lhs = (x - next).norm() / a;
          const double rhs = 2.0 * p.g().descent_modulus(x) + 2.0 * zeta.norm();
          ++checks;
          if (lhs > rhs * (1.0 + 1e-9) + 1e-12) ++violations;
          if (rhs > 0.0) worst_ratio = std::max(worst_ratio, lhs / rhs);
        }
        if (!p.X().contains(next)) ++infeasible;
        return next;
      });
  out.prox_bound_checks = checks;
  out.prox_bound_violations = violations;
  out.max_prox_bound_ratio = worst_ratio;
  out.infeasible_iterates = infeasible;
  return out;
}

} // namespace tamesg
