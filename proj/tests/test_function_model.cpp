#include <gtest/gtest.h>

#include "oracles.hpp"
#include "tamesg/function_model.hpp"
#include "tamesg/testbed.hpp"

using namespace tamesg;

namespace {

const Point P1(double a) { return make_point({a}); }
const Point P2(double a, double b) { return make_point({a, b}); }

bool contains_generator(const std::vector<Point> &gens, const Point &g, double tol) {
  for (const auto &h : gens)
    if ((h - g).norm() <= tol) return true;
  return false;
}

// Problems whose f exposes a hull oracle.
std::vector<TestProblem> hull_problems() {
  std::vector<TestProblem> out;
  for (auto &p : catalog())
    if (p.has_hull()) out.push_back(p);
  return out;
}

// Sample a point of X.
Point sample_in(const ConstraintSet &X, const Point &near, CounterRng &rng) {
  const auto d = X.dim();
  switch (X.kind()) {
  case ConstraintKind::full_space: return near + 2.0 * rng.normal_vector(d);
  case ConstraintKind::box: return rng.uniform_box(X.boxes()[0].lo, X.boxes()[0].hi);
  case ConstraintKind::union_of_boxes: {
    const auto &b = X.boxes()[rng.index(X.boxes().size())];
    return rng.uniform_box(b.lo, b.hi);
  }
  case ConstraintKind::ball: return X.center() + rng.uniform_ball(d, X.radius());
  case ConstraintKind::sphere: {
    Point u = rng.normal_vector(d);
    return X.center() + X.radius() * u / u.norm();
  }
  case ConstraintKind::convex_polytope: {
    Point x = Point::Zero(static_cast<Eigen::Index>(d));
    double total = 0.0;
    std::vector<double> w;
    for (std::size_t i = 0; i < X.vertices().size(); ++i) {
      w.push_back(-std::log(rng.uniform_open0()));
      total += w.back();
    }
    for (std::size_t i = 0; i < w.size(); ++i) x += (w[i] / total) * X.vertices()[i];
    return x;
  }
  }
  return near;
}

struct ProxCase {
  ConstraintSet X;
  Regularizer g;
};

std::vector<ProxCase> prox_cases() {
  const Point lo = P2(-1.0, 0.5), hi = P2(2.0, 3.0);
  return {
      {ConstraintSet::full_space(2), Regularizer::zero()},
      {ConstraintSet::full_space(2), Regularizer::l1(0.7)},
      {ConstraintSet::full_space(2), Regularizer::power_norm(1.0, 4.0)},
      {ConstraintSet::full_space(2), Regularizer::power_norm(0.3, 1.5)},
      {ConstraintSet::box(lo, hi), Regularizer::zero()},
      {ConstraintSet::box(lo, hi), Regularizer::l1(0.4)},
      {ConstraintSet::union_of_boxes({{P2(-3, -3), P2(-1, -1)}, {P2(0.5, -1), P2(2, 1)}}),
       Regularizer::zero()},
      {ConstraintSet::union_of_boxes({{P2(-3, -3), P2(-1, -1)}, {P2(0.5, -1), P2(2, 1)}}),
       Regularizer::l1(0.5)},
      {ConstraintSet::ball(P2(1.0, -1.0), 1.5), Regularizer::zero()},
      {ConstraintSet::sphere(P2(0.0, 0.0), 1.0), Regularizer::zero()},
      {ConstraintSet::convex_polytope({P2(0, 0), P2(2, 0), P2(0, 1), P2(1.5, 1.5)}),
       Regularizer::zero()},
  };
}

} // namespace

TEST(FunctionModel, EvaluateExamples) {
  EXPECT_EQ(find_problem("abs").f.evaluate(P1(-3.0)), 3.0);
  EXPECT_EQ(find_problem("xy-abs-square").f.evaluate(P2(1.0, 1.0)), 0.0);
  EXPECT_EQ(find_problem("relu-square").f.evaluate(P1(0.0)), 1.0);
}

TEST(FunctionModel, SelectionExamples) {
  const auto abs = find_problem("abs").f;
  EXPECT_EQ(abs.subgrad_select(P1(2.0))[0], 1.0);
  EXPECT_NEAR(abs.subgrad_select(P1(0.0))[0], 0.0, 1e-15);
  EXPECT_NEAR(find_problem("relu-square").f.subgrad_select(P1(0.0))[0], 0.0, 1e-15);
}

TEST(FunctionModel, HullExamples) {
  const auto abs = find_problem("abs").f;
  const auto h0 = abs.hull_at(P1(0.0));
  ASSERT_EQ(h0.size(), 2u);
  EXPECT_TRUE(contains_generator(h0, P1(-1.0), 0.0));
  EXPECT_TRUE(contains_generator(h0, P1(1.0), 0.0));
  const auto h1 = abs.hull_at(P1(1.0));
  ASSERT_EQ(h1.size(), 1u);
  EXPECT_EQ(h1[0][0], 1.0);

  const auto xy = find_problem("xy-abs-square").f;
  const auto h = xy.hull_at(P2(1.0, 0.0));
  ASSERT_EQ(h.size(), 2u);
  EXPECT_TRUE(contains_generator(h, P2(2.0, -2.0), 1e-15));
  EXPECT_TRUE(contains_generator(h, P2(2.0, 2.0), 1e-15));
}

// One-sided limits across the y = 0 kink, by finite differences at (1, +-1e-6).
TEST(FunctionModel, XyHullMatchesOneSidedLimits) {
  const auto xy = find_problem("xy-abs-square").f;
  const auto F = [&](const Point &p) { return xy.evaluate(p); };
  const auto h = xy.hull_at(P2(1.0, 0.0));
  for (double s : {1e-6, -1e-6}) {
    const Point g = oracle::fd_gradient(F, P2(1.0, s), 1e-8);
    EXPECT_TRUE(contains_generator(h, g, 1e-4)) << g.transpose();
  }
}

// (1 - max{x,0})^2 at 0: one-sided slopes 0 (left) and -2 (right).
TEST(FunctionModel, ReluSquareHullMatchesOneSidedLimits) {
  const auto f = find_problem("relu-square").f;
  const auto F = [&](const Point &p) { return f.evaluate(p); };
  const auto h = f.hull_at(P1(0.0));
  EXPECT_TRUE(contains_generator(h, oracle::fd_gradient(F, P1(-1e-6), 1e-8), 1e-4));
  EXPECT_TRUE(contains_generator(h, oracle::fd_gradient(F, P1(1e-6), 1e-8), 1e-4));
  EXPECT_LE(f.stationarity(P1(0.0)), 1e-15);
}

TEST(FunctionModel, SelectionLiesInHull) {
  CounterRng rng(17, Stream::verification);
  for (const auto &p : hull_problems()) {
    for (int i = 0; i < 300; ++i) {
      Point x = rng.uniform_box(p.start_lo, p.start_hi);
      // Put some samples exactly on coordinate kinks.
      if (i % 3 == 0) x[static_cast<Eigen::Index>(rng.index(p.dim()))] = 0.0;
      const Point s = p.f.subgrad_select(x);
      ASSERT_LE(dist_to_hull(Hull(p.f.hull_at(x)), s), 1e-9) << p.name;
    }
  }
}

TEST(FunctionModel, SelectionMatchesFiniteDifferences) {
  CounterRng rng(23, Stream::verification);
  for (const auto &p : catalog()) {
    int tested = 0;
    for (int i = 0; i < 1000; ++i) {
      const Point x = rng.uniform_box(p.start_lo, p.start_hi);
      // Differentiable points: hull is a singleton (or, without a hull, no
      // coordinate is near a kink of the network).
      if (p.has_hull() && p.f.hull_at(x).size() != 1) continue;
      const Point fd = fd_gradient([&](const Point &y) { return p.f.evaluate(y); }, x, 1e-6);
      const double L = std::max(1.0, p.f.lipschitz_bound_on(x, 1.0));
      const double tol = 1e-5 * (std::isfinite(L) ? L : 1.0);
      const Point s = p.f.subgrad_select(x);
      if (!p.has_hull() && (s - fd).norm() > tol) continue;  // kink within the FD stencil
      ASSERT_LE((s - fd).norm(), tol) << p.name << " at " << x.transpose();
      ++tested;
    }
    EXPECT_GT(tested, 900) << p.name;
  }
}

TEST(FunctionModel, FiniteDifferenceGradientOfQuadratic) {
  const auto q = find_problem("quad").f;
  const Point g = fd_gradient([&](const Point &y) { return q.evaluate(y); }, P2(0.3, -2.0));
  EXPECT_NEAR(g[0], 0.3, 1e-8);
  EXPECT_NEAR(g[1], -2.0, 1e-8);
}

TEST(FunctionModel, NetworkHasNoHull) {
  const auto net = find_problem("relu-net");
  EXPECT_FALSE(net.has_hull());
  EXPECT_THROW((void)net.f.hull_at(net.default_x0), HullUnavailable);
  EXPECT_THROW((void)net.f.stationarity(net.default_x0), HullUnavailable);
}

TEST(FunctionModel, DimensionChecks) {
  const auto abs = find_problem("abs").f;
  EXPECT_THROW((void)abs.evaluate(P2(1.0, 2.0)), ContractViolation);
  EXPECT_THROW((void)abs.evaluate(P1(std::nan(""))), ContractViolation);
}

TEST(Prox, Examples) {
  // alpha * lambda = 0.5
  EXPECT_DOUBLE_EQ(prox_step(ConstraintSet::full_space(1), Regularizer::l1(1.0), 0.5, P1(2.0))[0], 1.5);
  const auto S = ConstraintSet::sphere(P2(0.0, 0.0), 1.0);
  const Point a = prox_step(S, Regularizer::zero(), 1.0, P2(2.0, 0.0));
  EXPECT_DOUBLE_EQ(a[0], 1.0);
  EXPECT_DOUBLE_EQ(a[1], 0.0);
  const Point b = prox_step(S, Regularizer::zero(), 1.0, P2(0.0, 0.0));
  EXPECT_DOUBLE_EQ(b[0], 1.0);
  EXPECT_DOUBLE_EQ(b[1], 0.0);
}

TEST(Prox, UnsupportedAndBadStep) {
  const auto ball = ConstraintSet::ball(P2(0, 0), 1.0);
  EXPECT_THROW((void)prox_step(ball, Regularizer::l1(1.0), 0.1, P2(1, 1)), UnsupportedProx);
  EXPECT_THROW((void)prox_step(ConstraintSet::sphere(P2(0, 0), 1.0), Regularizer::power_norm(1, 2),
                               0.1, P2(1, 1)),
               UnsupportedProx);
  EXPECT_THROW((void)prox_step(ball, Regularizer::zero(), 0.0, P2(1, 1)), ContractViolation);
  EXPECT_THROW((void)prox_step(ball, Regularizer::zero(), -1.0, P2(1, 1)), ContractViolation);
}

TEST(Prox, UnionTieBreaksLexicographically) {
  // z equidistant from both boxes: the lexicographically smaller point wins.
  const auto U = ConstraintSet::union_of_boxes({{P1(1.0), P1(2.0)}, {P1(-2.0), P1(-1.0)}});
  EXPECT_DOUBLE_EQ(prox_step(U, Regularizer::zero(), 1.0, P1(0.0))[0], -1.0);
}

TEST(Prox, FeasibleIdempotentAndOptimal) {
  CounterRng rng(99, Stream::verification);
  for (const auto &pc : prox_cases()) {
    for (int trial = 0; trial < 40; ++trial) {
      const double alpha = 0.05 + 2.0 * rng.uniform();
      const Point z = 3.0 * rng.normal_vector(2);
      const Point x = prox_step(pc.X, pc.g, alpha, z);
      ASSERT_TRUE(pc.X.contains(x)) << pc.X.describe() << " " << pc.g.describe();
      const double best = pc.g.value(x) + (x - z).squaredNorm() / (2.0 * alpha);
      for (int c = 0; c < 1000 / 40 + 1; ++c) {
        const Point w = sample_in(pc.X, x, rng);
        const double obj = pc.g.value(w) + (w - z).squaredNorm() / (2.0 * alpha);
        ASSERT_GE(obj, best - 1e-9) << pc.X.describe() << " " << pc.g.describe();
      }
      // Local perturbations inside X as well.
      for (int c = 0; c < 10; ++c) {
        const Point w = pc.X.project(x + 1e-3 * rng.normal_vector(2));
        if (!pc.X.contains(w)) continue;
        const double obj = pc.g.value(w) + (w - z).squaredNorm() / (2.0 * alpha);
        ASSERT_GE(obj, best - 1e-9);
      }
      if (pc.X.is_convex() && pc.g.kind() == RegularizerKind::zero) {
        const Point y = sample_in(pc.X, x, rng);
        ASSERT_LE((prox_step(pc.X, pc.g, alpha, y) - y).norm(), 1e-9);
      }
    }
  }
}

// 1000 random candidate points per supported kind, as one bulk check.
TEST(Prox, OptimalityAgainstThousandCandidates) {
  CounterRng rng(101, Stream::verification);
  for (const auto &pc : prox_cases()) {
    const double alpha = 0.3;
    const Point z = make_point({1.7, -0.4});
    const Point x = prox_step(pc.X, pc.g, alpha, z);
    const double best = pc.g.value(x) + (x - z).squaredNorm() / (2.0 * alpha);
    for (int c = 0; c < 1000; ++c) {
      const Point w = sample_in(pc.X, x, rng);
      ASSERT_GE(pc.g.value(w) + (w - z).squaredNorm() / (2.0 * alpha), best - 1e-9)
          << pc.X.describe() << " " << pc.g.describe();
    }
  }
}

// alpha^-1 |x - T_alpha(x - alpha v)| <= 2 L(x) + 2 |v| for x in X.
TEST(Prox, DisplacementBound) {
  CounterRng rng(7, Stream::verification);
  for (const auto &pc : prox_cases()) {
    for (int trial = 0; trial < 500; ++trial) {
      const Point x = sample_in(pc.X, Point::Zero(2), rng);
      const Point v = 3.0 * rng.normal_vector(2);
      const double alpha = 1e-3 + rng.uniform();
      const Point xp = prox_step(pc.X, pc.g, alpha, x - alpha * v);
      const double lhs = (x - xp).norm() / alpha;
      const double rhs = 2.0 * pc.g.descent_modulus(x) + 2.0 * v.norm();
      ASSERT_LE(lhs, rhs * (1.0 + 1e-9) + 1e-9) << pc.X.describe() << " " << pc.g.describe();
    }
  }
}

// L(x) >= (g(x) - g(z)) / |x - z| whenever g(z) <= g(x).
TEST(Regularizer, DescentModulusInequality) {
  CounterRng rng(31, Stream::verification);
  for (const auto &g : {Regularizer::l1(0.8), Regularizer::power_norm(1.0, 4.0),
                        Regularizer::power_norm(2.0, 1.5), Regularizer::zero()}) {
    int checked = 0;
    for (int i = 0; i < 10000; ++i) {
      Point x = 2.0 * rng.normal_vector(3);
      if (i % 4 == 0) x[0] = 0.0;  // sparse points for the l1 modulus
      const Point z = x + (0.01 + rng.uniform()) * rng.normal_vector(3);
      if (g.value(z) > g.value(x) || (x - z).norm() == 0.0) continue;
      ++checked;
      ASSERT_LE((g.value(x) - g.value(z)) / (x - z).norm(), g.descent_modulus(x) * (1 + 1e-12) + 1e-12)
          << g.describe();
    }
    EXPECT_GT(checked, 1000) << g.describe();
  }
}

TEST(Regularizer, SelectionAndBounds) {
  const auto l1 = Regularizer::l1(2.0);
  const Point s = l1.subgrad_select(make_point({1.0, 0.0, -3.0}));
  EXPECT_EQ(s[0], 2.0);
  EXPECT_EQ(s[1], 0.0);
  EXPECT_EQ(s[2], -2.0);
  EXPECT_DOUBLE_EQ(l1.descent_modulus(make_point({1.0, 0.0, -3.0})), 2.0 * std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(Regularizer::power_norm(1.0, 4.0).descent_modulus(P2(0.0, 2.0)), 32.0);
  EXPECT_EQ(l1.lower_bound_on_X(), 0.0);
  EXPECT_THROW(Regularizer::power_norm(1.0, 1.0), ContractViolation);
  EXPECT_THROW(Regularizer::l1(-1.0), ContractViolation);
}

TEST(Regularizer, PowerNormProxSolvesRadialEquation) {
  // Stationarity: x - z + alpha * p * |x|^(p-2) x = 0.
  CounterRng rng(4, Stream::verification);
  const auto g = Regularizer::power_norm(1.0, 4.0);
  for (int i = 0; i < 200; ++i) {
    const Point z = 3.0 * rng.normal_vector(2);
    const double alpha = 0.01 + rng.uniform();
    const Point x = prox_step(ConstraintSet::full_space(2), g, alpha, z);
    const Point r = x - z + alpha * 4.0 * std::pow(x.norm(), 2.0) * x;
    ASSERT_LE(r.norm(), 1e-9 * (1.0 + z.norm()));
  }
}

TEST(Oracle, ZeroNoiseAndDeterminism) {
  const auto abs = find_problem("abs").f;
  CounterRng r0(1, Stream::noise);
  EXPECT_EQ(StochasticOracle(abs, NoiseModel::zero()).sample(P1(2.0), r0)[0], 1.0);
  const StochasticOracle o(abs, NoiseModel::gaussian(0.1));
  CounterRng a(42, Stream::noise), b(42, Stream::noise);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(o.sample(P1(2.0), a)[0], o.sample(P1(2.0), b)[0]);
  // The oracle bound covers the whole sample: |selection|^2 + E|xi|^2.
  EXPECT_DOUBLE_EQ(NoiseModel::gaussian(0.1).second_moment_bound(P1(2.0)), 0.01);
  EXPECT_DOUBLE_EQ(o.second_moment_bound(P1(2.0)), 1.01);
  double m2 = 0.0;
  for (int i = 0; i < 20000; ++i) m2 += o.sample(P1(2.0), a).squaredNorm() / 20000.0;
  EXPECT_LE(m2, 1.01 * 1.02);
}

TEST(Composite, ChecksDimensionsAndSupport) {
  const auto f = find_problem("quad").f;
  EXPECT_THROW(CompositeProblem(f, Regularizer::zero(), ConstraintSet::full_space(3)), ContractViolation);
  const CompositeProblem bad(f, Regularizer::l1(1.0), ConstraintSet::ball(P2(0, 0), 1.0));
  EXPECT_THROW(bad.require_supported(), UnsupportedProx);
  const auto l1q = find_problem("l1-quadratic");
  EXPECT_LE(l1q.composite->prox_residual(P1(2.0)), 1e-12);
  EXPECT_DOUBLE_EQ(l1q.composite->phi(P1(2.0)), 2.5);
}
