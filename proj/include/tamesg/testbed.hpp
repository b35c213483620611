#pragma once

// Named tame test functions and composite problems with analytic metadata
// (hull oracles, critical sets, critical values) used as ground truth.
//
// Hull oracles treat a coordinate within kKinkBand of a kink as lying on it.
// The band is far below any step size used in practice; it lets flow
// integrators that land on a kink by bisection see the full subdifferential.

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tamesg/core.hpp"
#include "tamesg/function_model.hpp"
#include "tamesg/network.hpp"
#include "tamesg/rng.hpp"

namespace tamesg {

inline constexpr double kKinkBand = 1e-12;

enum class ProblemTag { smooth, regular, stratifiable_only, composite, network };

inline const char *to_string(ProblemTag t) {
  switch (t) {
  case ProblemTag::smooth: return "smooth";
  case ProblemTag::regular: return "subdifferentially-regular";
  case ProblemTag::stratifiable_only: return "stratifiable-only";
  case ProblemTag::composite: return "composite";
  case ProblemTag::network: return "network";
  }
  return "?";
}

struct TestProblem {
  std::string name;
  std::string description;
  std::vector<ProblemTag> tags;
  PiecewiseLipschitzFunction f;
  std::optional<CompositeProblem> composite;
  Point default_x0;
  /// Box from which random starting points are drawn.
  Point start_lo, start_hi;

  /// Analytic membership test for the (composite) critical set.
  std::function<bool(const Point &, double)> critical_oracle{};
  /// Complete list of critical values, when known.
  std::optional<std::vector<double>> critical_values{};
  /// One point per listed critical value (same order).
  std::vector<Point> critical_witnesses{};
  /// Draws a point of the critical set.
  std::function<Point(CounterRng &)> critical_sampler{};
  /// "analytic", or "derived" when parts of the metadata come from the
  /// numerical one-sided-limit analysis rather than a closed form.
  std::string provenance = "analytic";

  bool is_composite() const { return composite.has_value(); }
  bool has_hull() const { return f.has_hull(); }
  bool has_tag(ProblemTag t) const {
    return std::find(tags.begin(), tags.end(), t) != tags.end();
  }
  std::size_t dim() const { return f.dim(); }
  /// phi = f + g for composites, f otherwise.
  double objective(const Point &x) const {
    return composite ? composite->phi(x) : f.evaluate(x);
  }
  /// dist(0, df(x)), the composite prox residual, or (without a hull
  /// oracle) the sampled-gradient surrogate on a fixed verification stream.
  double criticality(const Point &x, double radius = 1e-4, std::size_t samples = 50) const {
    if (composite) return composite->prox_residual(x);
    if (f.has_hull()) return f.stationarity(x);
    CounterRng rng(0, Stream::verification);
    return sampled_gradient_residual(f, x, radius, samples, rng);
  }
  /// Distance from v to the nearest listed critical value (infinite if none).
  double distance_to_critical_value(double v) const {
    double best = std::numeric_limits<double>::infinity();
    if (critical_values)
      for (double c : *critical_values) best = std::min(best, std::abs(v - c));
    return best;
  }
};

class UnknownProblem : public ContractViolation {
public:
  using ContractViolation::ContractViolation;
};

namespace testbed {

/// Sign set of the subdifferential of |t|: {sgn t}, or {-1, +1} on the kink.
inline std::vector<double> sign_set(double t) {
  if (std::abs(t) <= kKinkBand) return {-1.0, 1.0};
  return {sign_of(t)};
}

/// All sign patterns of the coordinates of x (kinks contribute both signs).
inline std::vector<Point> sign_patterns(const Point &x) {
  std::vector<Point> out{Point::Zero(x.size())};
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    std::vector<Point> next;
    for (const auto &p : out)
      for (double s : sign_set(x[i])) {
        Point q = p;
        q[i] = s;
        next.push_back(std::move(q));
      }
    out = std::move(next);
  }
  return out;
}

inline std::vector<Point> dedup(std::vector<Point> pts) {
  std::vector<Point> out;
  for (auto &p : pts) {
    bool dup = false;
    for (const auto &q : out)
      if ((p - q).lpNorm<Eigen::Infinity>() <= 1e-15) {
        dup = true;
        break;
      }
    if (!dup) out.push_back(std::move(p));
  }
  return out;
}

inline Point scalar(double v) { return make_point({v}); }

inline PiecewiseLipschitzFunction abs_fn() {
  return PiecewiseLipschitzFunction(
      {"abs", 1, [](const Point &x) { return std::abs(x[0]); }, {},
       [](const Point &x) {
         std::vector<Point> g;
         for (double s : sign_set(x[0])) g.push_back(scalar(s));
         return g;
       },
       [](const Point &, double) { return 1.0; }});
}

inline PiecewiseLipschitzFunction neg_abs_fn() {
  return PiecewiseLipschitzFunction(
      {"neg-abs", 1, [](const Point &x) { return -std::abs(x[0]); }, {},
       [](const Point &x) {
         std::vector<Point> g;
         for (double s : sign_set(x[0])) g.push_back(scalar(-s));
         return g;
       },
       [](const Point &, double) { return 1.0; }});
}

/// 1/2 |x - c|^2
inline PiecewiseLipschitzFunction shifted_quadratic(std::string name, Point c) {
  const auto d = static_cast<std::size_t>(c.size());
  return PiecewiseLipschitzFunction(
      {std::move(name), d, [c](const Point &x) { return 0.5 * (x - c).squaredNorm(); }, {},
       [c](const Point &x) { return std::vector<Point>{x - c}; },
       [c](const Point &center, double r) { return (center - c).norm() + r; }});
}

/// (|x| - |y|)^2
inline PiecewiseLipschitzFunction xy_abs_square_fn() {
  return PiecewiseLipschitzFunction(
      {"xy-abs-square", 2,
       [](const Point &p) {
         const double m = std::abs(p[0]) - std::abs(p[1]);
         return m * m;
       },
       {},
       [](const Point &p) {
         const double m = std::abs(p[0]) - std::abs(p[1]);
         std::vector<Point> g;
         for (double sx : sign_set(p[0]))
           for (double sy : sign_set(p[1])) g.push_back(make_point({2 * m * sx, -2 * m * sy}));
         return dedup(std::move(g));
       },
       [](const Point &center, double r) {
         return 2.0 * std::sqrt(2.0) * (center.lpNorm<1>() + 2.0 * r);
       }});
}

/// (1 - max{x, 0})^2
inline PiecewiseLipschitzFunction relu_square_fn() {
  return PiecewiseLipschitzFunction(
      {"relu-square", 1,
       [](const Point &p) {
         const double m = 1.0 - std::max(p[0], 0.0);
         return m * m;
       },
       {},
       [](const Point &p) {
         const double x = p[0];
         if (x > kKinkBand) return std::vector<Point>{scalar(-2.0 * (1.0 - x))};
         if (x < -kKinkBand) return std::vector<Point>{scalar(0.0)};
         return std::vector<Point>{scalar(0.0), scalar(-2.0 * (1.0 - std::max(x, 0.0)))};
       },
       [](const Point &center, double r) { return 2.0 * (1.0 + std::abs(center[0]) + r); }});
}

/// <c, x> - 1/2 |x|^2 + |x|_1 : gradients grow linearly, so iterates are
/// pushed outward unless a coercive regularizer holds them back.
inline PiecewiseLipschitzFunction repulsive_fn(Point c) {
  const auto d = static_cast<std::size_t>(c.size());
  return PiecewiseLipschitzFunction(
      {"repulsive-l1", d,
       [c](const Point &x) { return c.dot(x) - 0.5 * x.squaredNorm() + x.lpNorm<1>(); },
       {},
       [c](const Point &x) {
         std::vector<Point> g;
         for (const auto &s : sign_patterns(x)) g.push_back(c - x + s);
         return g;
       },
       [c](const Point &center, double r) {
         return c.norm() + center.norm() + r + std::sqrt(static_cast<double>(c.size()));
       }});
}

// 8 fixed points; targets |x1| - |x2| are exactly representable by a
// 2-4-1 ReLU network.
inline std::vector<Sample> network_data() {
  const double pts[8][2] = {{1, 1}, {1, -1}, {-1, 1}, {-1, -1},
                            {0.5, 0}, {-0.5, 0}, {0, 0.5}, {0, -0.5}};
  std::vector<Sample> data;
  for (const auto &p : pts)
    data.push_back({make_point({p[0], p[1]}), std::abs(p[0]) - std::abs(p[1])});
  return data;
}

inline ReluNetwork default_network() { return ReluNetwork({2, 4, 1}, network_data()); }

inline Point network_init(std::size_t dim) {
  CounterRng rng(7, Stream::init);
  return 0.5 * rng.normal_vector(dim);
}

inline auto near(double target) {
  return [target](const Point &x, double tol) { return std::abs(x[0] - target) <= tol; };
}

} // namespace testbed

/// The catalog, in a fixed order.
inline std::vector<TestProblem> catalog() {
  using namespace testbed;
  std::vector<TestProblem> out;
  const auto P = [](double v) { return make_point({v}); };

  {
    TestProblem p{"abs", "|x|", {ProblemTag::regular}, abs_fn(), std::nullopt,
                  P(1.0), P(-2.0), P(2.0)};
    p.critical_oracle = near(0.0);
    p.critical_values = std::vector<double>{0.0};
    p.critical_witnesses = {P(0.0)};
    p.critical_sampler = [](CounterRng &) { return make_point({0.0}); };
    out.push_back(std::move(p));
  }
  {
    TestProblem p{"quad", "1/2 |x|^2 in R^2", {ProblemTag::smooth},
                  shifted_quadratic("quad", Point::Zero(2)), std::nullopt,
                  make_point({1.0, 0.0}), make_point({-2.0, -2.0}), make_point({2.0, 2.0})};
    p.critical_oracle = [](const Point &x, double tol) { return x.norm() <= tol; };
    p.critical_values = std::vector<double>{0.0};
    p.critical_witnesses = {Point::Zero(2)};
    p.critical_sampler = [](CounterRng &) { return Point(Point::Zero(2)); };
    out.push_back(std::move(p));
  }
  {
    // Critical set {|x| = |y|}. On the axes (exactly one zero coordinate)
    // the one-sided gradient limits do not bracket 0, so axis points are
    // noncritical; this is derived from the one-sided-limit analysis.
    TestProblem p{"xy-abs-square", "(|x| - |y|)^2", {ProblemTag::stratifiable_only},
                  xy_abs_square_fn(), std::nullopt,
                  make_point({2.0, 1.0}), make_point({-2.0, -2.0}), make_point({2.0, 2.0})};
    p.critical_oracle = [](const Point &x, double tol) {
      return std::abs(std::abs(x[0]) - std::abs(x[1])) <= tol;
    };
    p.critical_values = std::vector<double>{0.0};
    p.critical_witnesses = {make_point({1.0, 1.0})};
    p.critical_sampler = [](CounterRng &rng) {
      const double t = -2.0 + 4.0 * rng.uniform();
      const double s = rng.uniform() < 0.5 ? -1.0 : 1.0;
      return make_point({t, s * t});
    };
    p.provenance = "derived";
    out.push_back(std::move(p));
  }
  {
    // Critical set {x <= 0} (value 1; at 0 the hull is conv{0, -2}) and {1}.
    TestProblem p{"relu-square", "(1 - max{x, 0})^2", {ProblemTag::stratifiable_only},
                  relu_square_fn(), std::nullopt, P(3.0), P(-2.0), P(3.0)};
    p.critical_oracle = [](const Point &x, double tol) {
      return x[0] <= tol || std::abs(x[0] - 1.0) <= tol;
    };
    p.critical_values = std::vector<double>{0.0, 1.0};
    p.critical_witnesses = {P(1.0), P(0.0)};
    p.critical_sampler = [](CounterRng &rng) {
      if (rng.uniform() < 0.5) return make_point({1.0});
      return make_point({-2.0 * rng.uniform()});
    };
    out.push_back(std::move(p));
  }
  {
    // Downward kink: not subdifferentially regular, yet the chain rule holds.
    TestProblem p{"neg-abs", "-|x|", {ProblemTag::stratifiable_only}, neg_abs_fn(),
                  std::nullopt, P(0.5), P(-2.0), P(2.0)};
    p.critical_oracle = near(0.0);
    p.critical_values = std::vector<double>{0.0};
    p.critical_witnesses = {P(0.0)};
    p.critical_sampler = [](CounterRng &) { return make_point({0.0}); };
    out.push_back(std::move(p));
  }
  {
    // 1/2 (x - 3)^2 + |x|: composite critical point soft(3, 1) = 2.
    auto f = shifted_quadratic("l1-quadratic", P(3.0));
    TestProblem p{"l1-quadratic", "1/2 (x - 3)^2 + |x| on R",
                  {ProblemTag::composite, ProblemTag::regular}, f,
                  CompositeProblem(f, Regularizer::l1(1.0), ConstraintSet::full_space(1)),
                  P(-1.0), P(-4.0), P(4.0)};
    p.critical_oracle = near(2.0);
    p.critical_values = std::vector<double>{2.5};
    p.critical_witnesses = {P(2.0)};
    p.critical_sampler = [](CounterRng &) { return make_point({2.0}); };
    out.push_back(std::move(p));
  }
  {
    auto f = shifted_quadratic("box-quadratic", P(3.0));
    TestProblem p{"box-quadratic", "1/2 (x - 3)^2 on [0, 1]",
                  {ProblemTag::composite, ProblemTag::smooth}, f,
                  CompositeProblem(f, Regularizer::zero(), ConstraintSet::box(P(0.0), P(1.0))),
                  P(0.5), P(0.0), P(1.0)};
    p.critical_oracle = near(1.0);
    p.critical_values = std::vector<double>{2.0};
    p.critical_witnesses = {P(1.0)};
    p.critical_sampler = [](CounterRng &) { return make_point({1.0}); };
    out.push_back(std::move(p));
  }
  {
    // Critical points on the circle: +-c/|c|, values 3 -+ sqrt(5).
    const Point c = make_point({2.0, 1.0});
    const Point u = c / c.norm();
    auto f = shifted_quadratic("sphere-quadratic", c);
    TestProblem p{"sphere-quadratic", "1/2 |x - (2,1)|^2 on the unit circle",
                  {ProblemTag::composite, ProblemTag::smooth}, f,
                  CompositeProblem(f, Regularizer::zero(),
                                   ConstraintSet::sphere(Point::Zero(2), 1.0)),
                  make_point({0.0, 1.0}), make_point({-1.0, -1.0}), make_point({1.0, 1.0})};
    p.critical_oracle = [u](const Point &x, double tol) {
      return (x - u).norm() <= tol || (x + u).norm() <= tol;
    };
    p.critical_values = std::vector<double>{3.0 - std::sqrt(5.0), 3.0 + std::sqrt(5.0)};
    p.critical_witnesses = {u, Point(-u)};
    p.critical_sampler = [u](CounterRng &rng) {
      return Point(rng.uniform() < 0.5 ? u : Point(-u));
    };
    out.push_back(std::move(p));
  }
  {
    auto f = neg_abs_fn();
    TestProblem p{"neg-abs-box", "-|x| on [-1, 1]",
                  {ProblemTag::composite, ProblemTag::stratifiable_only}, f,
                  CompositeProblem(f, Regularizer::zero(), ConstraintSet::box(P(-1.0), P(1.0))),
                  P(0.3), P(-1.0), P(1.0)};
    p.critical_oracle = [](const Point &x, double tol) {
      return std::abs(x[0]) <= tol || std::abs(std::abs(x[0]) - 1.0) <= tol;
    };
    p.critical_values = std::vector<double>{0.0, -1.0};
    p.critical_witnesses = {P(0.0), P(1.0)};
    p.critical_sampler = [](CounterRng &rng) {
      const double r = rng.uniform();
      return make_point({r < 1.0 / 3 ? -1.0 : (r < 2.0 / 3 ? 0.0 : 1.0)});
    };
    out.push_back(std::move(p));
  }
  {
    // Subgradients grow like |x| (nu = 1) and point outward; the quartic
    // regularizer keeps iterates bounded. Critical values are not tabulated.
    const Point c = make_point({1.0, -2.0});
    auto f = repulsive_fn(c);
    TestProblem p{"coercive-quartic", "<c,x> - 1/2|x|^2 + |x|_1 + |x|^4 on R^2",
                  {ProblemTag::composite, ProblemTag::stratifiable_only}, f,
                  CompositeProblem(f, Regularizer::power_norm(1.0, 4.0),
                                   ConstraintSet::full_space(2)),
                  make_point({3.0, -3.0}), make_point({-2.0, -2.0}), make_point({2.0, 2.0})};
    out.push_back(std::move(p));
  }
  {
    const auto net = default_network();
    TestProblem p{"relu-net", "2-4-1 ReLU network, square loss on 8 points",
                  {ProblemTag::network, ProblemTag::stratifiable_only},
                  net.as_function("relu-net"), std::nullopt,
                  network_init(net.dim()),
                  Point::Constant(static_cast<Eigen::Index>(net.dim()), -1.0),
                  Point::Constant(static_cast<Eigen::Index>(net.dim()), 1.0)};
    out.push_back(std::move(p));
  }
  return out;
}

inline std::vector<std::string> problem_names() {
  std::vector<std::string> names;
  for (const auto &p : catalog()) names.push_back(p.name);
  return names;
}

inline TestProblem find_problem(std::string_view name) {
  for (auto &p : catalog())
    if (p.name == name) return p;
  throw UnknownProblem("unknown problem '" + std::string(name) + "'");
}

} // namespace tamesg
