#include <gtest/gtest.h>

#include <cmath>

#include "tamesg/noise.hpp"
#include "tamesg/schedules.hpp"

using namespace tamesg;

TEST(Schedule, PolynomialValues) {
  EXPECT_DOUBLE_EQ(StepSchedule::polynomial(0.5, 0.75).step(0), 0.5);
  EXPECT_DOUBLE_EQ(StepSchedule::polynomial(1.0, 1.0).step(3), 0.25);
}

TEST(Schedule, ConstantThenDecay) {
  const auto s = StepSchedule::constant_then_decay(0.2, 1.0, 5);
  for (std::size_t k = 0; k < 5; ++k) EXPECT_DOUBLE_EQ(s.step(k), 0.2);
  EXPECT_DOUBLE_EQ(s.step(5), 0.2);
  EXPECT_DOUBLE_EQ(s.step(6), 0.1);
}

TEST(Schedule, ValidityClassification) {
  EXPECT_TRUE(validate(ScheduleParams{ScheduleForm::polynomial, 0.5, 0.75, 0, {}}).valid);
  EXPECT_TRUE(validate(ScheduleParams{ScheduleForm::polynomial, 0.5, 1.0, 0, {}}).valid);
  const auto big = validate(ScheduleParams{ScheduleForm::polynomial, 0.5, 1.2, 0, {}});
  EXPECT_FALSE(big.valid);
  EXPECT_EQ(big.reason, "summable");
  const auto half = validate(ScheduleParams{ScheduleForm::polynomial, 0.5, 0.5, 0, {}});
  EXPECT_FALSE(half.valid);
  EXPECT_EQ(half.reason, "not square-summable");
}

TEST(Schedule, ConstructionRejectsInvalid) {
  try {
    (void)StepSchedule::polynomial(0.5, 0.4);
    FAIL() << "gamma 0.4 accepted";
  } catch (const InvalidSchedule &e) {
    EXPECT_EQ(e.reason(), "not square-summable");
    EXPECT_NE(std::string(e.what()).find("square summable, but not summable"), std::string::npos);
  }
  EXPECT_THROW((void)StepSchedule::polynomial(-1.0, 0.75), InvalidSchedule);
  EXPECT_THROW((void)StepSchedule::polynomial(0.5, std::nan("")), InvalidSchedule);
}

TEST(Schedule, TableIsHeuristicAndBounded) {
  std::vector<double> steps;
  for (int k = 0; k < 1000; ++k) steps.push_back(0.3 / std::pow(k + 1.0, 0.8));
  const auto s = StepSchedule::table(steps);
  EXPECT_TRUE(s.validity().heuristic);
  EXPECT_EQ(*s.horizon(), 1000u);
  EXPECT_DOUBLE_EQ(s.step(10), steps[10]);
  EXPECT_THROW((void)s.step(1000), ContractViolation);

  std::vector<double> flat(1000, 0.01);
  EXPECT_THROW((void)StepSchedule::table(flat), InvalidSchedule);
  std::vector<double> negative = steps;
  negative[3] = -1.0;
  EXPECT_THROW((void)StepSchedule::table(negative), InvalidSchedule);
}

// Partial sums: sum a_k grows at every decade; the tail of sum a_k^2 past
// a computable index is below 1e-3 and matches the integral bound.
TEST(Schedule, PartialSumsDivergeWhileSquaresConverge) {
  for (double gamma : {0.6, 0.75, 0.9, 1.0}) {
    const auto s = StepSchedule::polynomial(0.5, gamma);
    double sum = 0.0, sq = 0.0, prev_decade = 0.0;
    std::vector<double> sq_at;
    std::size_t N = 1000;
    for (std::size_t k = 0; k < 1000000; ++k) {
      const double a = s.step(k);
      sum += a;
      sq += a * a;
      if (k + 1 == N) {
        EXPECT_GT(sum, prev_decade + 0.5 * s.step(k) * static_cast<double>(N) * 0.5) << gamma;
        prev_decade = sum;
        sq_at.push_back(sq);
        N *= 10;
      }
    }
    // Exact tail of squares from 1e3 to 1e6 is bounded by the integral test.
    EXPECT_LE(sq_at.back() - sq_at.front(), square_tail_bound(s, 1000));
    std::size_t n = 1;
    while (square_tail_bound(s, n) > 1e-3) n *= 2;
    EXPECT_LE(square_tail_bound(s, n), 1e-3);
  }
}

TEST(Noise, ZeroModel) {
  CounterRng rng(1, Stream::noise);
  const auto z = NoiseModel::zero().draw(make_point({2.0}), rng);
  EXPECT_EQ(z[0], 0.0);
  EXPECT_EQ(NoiseModel::zero().second_moment_bound(make_point({5.0})), 0.0);
}

TEST(Noise, GaussianMeanWithinClt) {
  CounterRng rng(42, Stream::noise);
  const auto m = NoiseModel::gaussian(0.1);
  const int n = 100000;
  Point sum = Point::Zero(2);
  for (int i = 0; i < n; ++i) sum += m.draw(make_point({0.0, 0.0}), rng);
  for (int j = 0; j < 2; ++j) EXPECT_LT(std::abs(sum[j] / n), 4.0 * 0.1 / std::sqrt(n));
}

// Oracle sample mean of (1 + xi) at x = 2 for abs: 3 sigma / sqrt(n) band.
TEST(Noise, OracleMeanAtTwo) {
  CounterRng rng(5, Stream::noise);
  const auto m = NoiseModel::gaussian(0.1);
  const int n = 100000;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += 1.0 + m.draw(make_point({2.0}), rng)[0];
  EXPECT_LT(std::abs(s / n - 1.0), 3.0 * 0.1 / std::sqrt(n));
}

TEST(Noise, SecondMomentBounds) {
  CounterRng rng(6, Stream::noise);
  const Point x = make_point({3.0, 0.0});
  for (const auto &m : {NoiseModel::gaussian(0.2), NoiseModel::bounded_uniform(0.5),
                        NoiseModel::state_scaled(0.1)}) {
    const int n = 100000;
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += m.draw(x, rng).squaredNorm();
    // Gaussian kinds attain the bound; allow a 5-sigma Monte-Carlo margin.
    const double bound = m.second_moment_bound(x);
    EXPECT_LE(s / n, bound * (1.0 + 5.0 * std::sqrt(2.0 / n * 2.0))) << m.describe();
  }
  EXPECT_DOUBLE_EQ(NoiseModel::state_scaled(0.1).second_moment_bound(x), 0.01 * 2.0 * 16.0);
  EXPECT_DOUBLE_EQ(NoiseModel::bounded_uniform(0.5).almost_sure_bound(), 0.5);
}

TEST(Noise, BoundedUniformIsAlmostSurelyBounded) {
  CounterRng rng(7, Stream::noise);
  const auto m = NoiseModel::bounded_uniform(0.3);
  for (int i = 0; i < 10000; ++i) ASSERT_LE(m.draw(make_point({1.0, 2.0, 3.0}), rng).norm(), 0.3 + 1e-15);
}

TEST(Noise, RejectsNegativeScale) {
  EXPECT_THROW(NoiseModel::gaussian(-0.1), ContractViolation);
  EXPECT_EQ(*parse_noise_kind("bounded-uniform"), NoiseKind::bounded_uniform);
  EXPECT_FALSE(parse_noise_kind("laplace"));
}

// Weighted noise: over 10 seeds, the oscillation of S_k = sum_{j<k} a_j xi_j
// for k >= 1e5 stays below 5 standard deviations of the remaining sum,
// sigma * sqrt(sum_{j>=1e5} a_j^2) (bounded through the integral test).
TEST(Noise, WeightedNoiseSumsSettle) {
  const auto s = StepSchedule::polynomial(0.5, 0.75);
  const auto m = NoiseModel::gaussian(0.1);
  const std::size_t start = 100000, stop = 400000;
  const double band = 5.0 * 0.1 * std::sqrt(square_tail_bound(s, start));
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    CounterRng rng(seed, Stream::noise);
    const Point x = make_point({1.0});
    double S = 0.0, lo = 0.0, hi = 0.0;
    for (std::size_t k = 0; k < stop; ++k) {
      S += s.step(k) * m.draw(x, rng)[0];
      if (k == start) lo = hi = S;
      if (k > start) lo = std::min(lo, S), hi = std::max(hi, S);
    }
    EXPECT_LE(hi - lo, 2.0 * band) << "seed " << seed;
  }
}
