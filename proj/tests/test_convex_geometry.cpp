#include <gtest/gtest.h>

#include "oracles.hpp"
#include "tamesg/convex_geometry.hpp"

using namespace tamesg;

namespace {

std::vector<Point> random_hull(CounterRng &rng, std::size_t n, std::size_t d, double scale = 2.0) {
  std::vector<Point> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back(scale * rng.normal_vector(d));
  return v;
}

} // namespace

TEST(MinNorm, SymmetricInterval) {
  const auto r = min_norm_point(Hull({make_point({-1.0}), make_point({1.0})}));
  EXPECT_NEAR(r.point[0], 0.0, 1e-15);
  EXPECT_NEAR(r.norm, 0.0, 1e-15);
}

TEST(MinNorm, SegmentMidpoint) {
  const auto r = min_norm_point(Hull({make_point({1.0, 0.0}), make_point({0.0, 1.0})}));
  EXPECT_NEAR(r.point[0], 0.5, 1e-12);
  EXPECT_NEAR(r.point[1], 0.5, 1e-12);
  EXPECT_NEAR(r.norm, 0.7071067812, 1e-10);
}

TEST(MinNorm, CollinearSegmentNearestVertex) {
  const auto r = min_norm_point(Hull({make_point({2.0, 0.0}), make_point({3.0, 0.0})}));
  EXPECT_NEAR(r.point[0], 2.0, 1e-12);
  EXPECT_NEAR(r.point[1], 0.0, 1e-12);
  EXPECT_NEAR(r.norm, 2.0, 1e-12);
}

TEST(MinNorm, DuplicateGeneratorsShareWeight) {
  const auto r = min_norm_point(
      Hull({make_point({1.0, 0.0}), make_point({1.0, 0.0}), make_point({0.0, 1.0})}));
  EXPECT_NEAR(r.norm, std::sqrt(0.5), 1e-12);
  EXPECT_NEAR(r.weights.sum(), 1.0, 1e-12);
}

TEST(MinNorm, RejectsBadInput) {
  EXPECT_THROW(Hull({}), ContractViolation);
  EXPECT_THROW(Hull({make_point({1.0}), make_point({1.0, 2.0})}), ContractViolation);
  EXPECT_THROW(Hull({make_point({std::nan("")})}), ContractViolation);
}

TEST(DistToHull, Examples) {
  EXPECT_NEAR(dist_to_hull(Hull({make_point({1.0, 0.0}), make_point({0.0, 1.0})}),
                           make_point({0.0, 0.0})),
              0.7071067812, 1e-10);
  EXPECT_NEAR(dist_to_hull(Hull({make_point({1.0, 1.0})}), make_point({1.0, 1.0})), 0.0, 1e-15);
}

// 20 random points in R^3 against sampled simplex weights refined locally.
TEST(DistToHull, MatchesSampledOracle) {
  CounterRng rng(2024, Stream::verification);
  for (int trial = 0; trial < 5; ++trial) {
    const auto v = random_hull(rng, 20, 3);
    const Point q = 3.0 * rng.normal_vector(3);
    std::vector<Point> shifted;
    for (const auto &p : v) shifted.push_back(p - q);
    const double ref = oracle::sampled_min_norm(shifted, 100000, rng);
    EXPECT_NEAR(dist_to_hull(Hull(v), q), ref, 1e-3) << "trial " << trial;
    EXPECT_LE(dist_to_hull(Hull(v), q), ref + 1e-12);
  }
}

// Property checks on random hulls of varied size.
TEST(MinNorm, CertificateMembershipScaling) {
  CounterRng rng(77, Stream::verification);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.index(12);
    const std::size_t d = 1 + rng.index(5);
    const auto v = random_hull(rng, n, d);
    const Hull h(v);
    const auto r = min_norm_point(h);

    ASSERT_GE(certificate_gap(h, r.point), -1e-8) << "trial " << trial;

    ASSERT_GE(r.weights.minCoeff(), 0.0);
    ASSERT_NEAR(r.weights.sum(), 1.0, 1e-12);
    Point rebuilt = Point::Zero(static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i) rebuilt += r.weights[static_cast<Eigen::Index>(i)] * v[i];
    ASSERT_LE((rebuilt - r.point).norm(), 1e-9);

    const double c = 0.1 + 10.0 * rng.uniform();
    std::vector<Point> scaled;
    for (const auto &p : v) scaled.push_back(c * p);
    const auto rs = min_norm_point(Hull(scaled));
    ASSERT_LE((rs.point - c * r.point).norm(), 1e-9 * std::max(1.0, c));
  }
}

TEST(MinNorm, MatchesFaceEnumeration) {
  CounterRng rng(5, Stream::verification);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.index(4);
    const std::size_t d = 1 + rng.index(3);
    const auto v = random_hull(rng, n, d);
    const Point ref = oracle::brute_force_min_norm(v);
    const auto r = min_norm_point(Hull(v));
    ASSERT_LE((r.point - ref).norm(), 1e-8) << "trial " << trial;
  }
}

// Hulls containing the origin in their interior.
TEST(MinNorm, OriginInsideGivesZero) {
  CounterRng rng(8, Stream::verification);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 1 + rng.index(3);
    auto v = random_hull(rng, d + 1, d);
    Point centroid = Point::Zero(static_cast<Eigen::Index>(d));
    for (const auto &p : v) centroid += p / static_cast<double>(v.size());
    for (auto &p : v) p -= centroid;
    ASSERT_LE(min_norm_point(Hull(v)).norm, 1e-9);
  }
}

TEST(Simplex, ProjectionIsFeasibleAndNearest) {
  CounterRng rng(3, Stream::verification);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::VectorXd y = 2.0 * rng.normal_vector(5);
    const Eigen::VectorXd p = detail::project_to_simplex(y);
    ASSERT_GE(p.minCoeff(), 0.0);
    ASSERT_NEAR(p.sum(), 1.0, 1e-12);
    for (int s = 0; s < 20; ++s) {
      Eigen::VectorXd w(5);
      for (int j = 0; j < 5; ++j) w[j] = -std::log(rng.uniform_open0());
      w /= w.sum();
      ASSERT_LE((p - y).norm(), (w - y).norm() + 1e-12);
    }
  }
}

TEST(Simplex, ProjectedGradientAgreesWithWolfe) {
  CounterRng rng(13, Stream::verification);
  for (int trial = 0; trial < 20; ++trial) {
    const auto v = random_hull(rng, 8, 3);
    Eigen::MatrixXd P(3, 8);
    for (int j = 0; j < 8; ++j) P.col(j) = v[static_cast<std::size_t>(j)];
    const Eigen::VectorXd w =
        detail::simplex_projected_gradient(P, Eigen::VectorXd::Constant(8, 0.125), 200000);
    EXPECT_NEAR((P * w).norm(), min_norm_point(Hull(v)).norm, 1e-6);
  }
}
