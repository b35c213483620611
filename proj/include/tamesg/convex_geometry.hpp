#pragma once

// Minimum-norm point of the convex hull of finitely many vectors.
//
// This is the stationarity measure dist(0, conv V) and the velocity selection
// of the subgradient flow. The solver is Wolfe's method: a corral S of active
// generators is grown one vertex at a time (major cycle), and the affine
// minimizer over S is pulled back into the simplex by dropping generators
// whose weights would turn negative (minor cycle). If the iteration cap is
// hit, projected gradient on the simplex finishes the job.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "tamesg/core.hpp"

namespace tamesg {

class Hull {
public:
  explicit Hull(std::vector<Point> generators) : gens_(std::move(generators)) {
    if (gens_.empty()) throw ContractViolation("Hull: no generators");
    const auto d = gens_.front().size();
    for (const auto &g : gens_) {
      if (g.size() != d) throw ContractViolation("Hull: mixed dimensions");
      if (!g.allFinite()) throw ContractViolation("Hull: non-finite generator");
    }
  }

  const std::vector<Point> &generators() const { return gens_; }
  std::size_t size() const { return gens_.size(); }
  Eigen::Index dim() const { return gens_.front().size(); }

  Hull translated(const Point &q) const {
    if (q.size() != dim()) throw ContractViolation("Hull: query dimension");
    if (!q.allFinite()) throw ContractViolation("Hull: non-finite query");
    std::vector<Point> shifted;
    shifted.reserve(gens_.size());
    for (const auto &g : gens_) shifted.push_back(g - q);
    return Hull(std::move(shifted));
  }

private:
  std::vector<Point> gens_;
};

struct MinNormResult {
  Point point;
  double norm = 0.0;
  /// Barycentric weights, one per generator of the input hull.
  Eigen::VectorXd weights;
  std::size_t iterations = 0;
  bool used_fallback = false;
};

struct MinNormOptions {
  double dedup_tol = 1e-12;
  /// Relative tolerance of the stopping certificate
  /// <x, v_i> >= |x|^2 - tol * max_i |v_i|^2.
  double certificate_tol = 1e-15;
  std::size_t fallback_iterations = 200000;
};

namespace detail {

// Minimizer of |B v| over the affine hull {sum v = 1} of the columns of B.
inline Eigen::VectorXd affine_min_norm_weights(const Eigen::MatrixXd &B) {
  const Eigen::Index s = B.cols();
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(s + 1, s + 1);
  kkt.topLeftCorner(s, s) = B.transpose() * B;
  kkt.block(0, s, s, 1).setOnes();
  kkt.block(s, 0, 1, s).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(s + 1);
  rhs[s] = 1.0;
  Eigen::VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);
  Eigen::VectorXd v = sol.head(s);
  const double total = v.sum();
  if (std::isfinite(total) && std::abs(total) > 1e-300) v /= total;
  return v;
}

/// Euclidean projection onto the probability simplex (sort-based).
inline Eigen::VectorXd project_to_simplex(const Eigen::VectorXd &y) {
  const Eigen::Index n = y.size();
  std::vector<double> u(y.data(), y.data() + n);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    cumulative += u[static_cast<std::size_t>(j)];
    const double t = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (u[static_cast<std::size_t>(j)] - t > 0.0) theta = t;
  }
  return (y.array() - theta).max(0.0).matrix();
}

inline Eigen::VectorXd simplex_projected_gradient(const Eigen::MatrixXd &P,
                                                  Eigen::VectorXd w,
                                                  std::size_t iterations) {
  const Eigen::MatrixXd gram = P.transpose() * P;
  const double lipschitz = std::max(gram.diagonal().sum(), 1e-300);
  for (std::size_t it = 0; it < iterations; ++it) {
    Eigen::VectorXd next = project_to_simplex(w - (gram * w) / lipschitz);
    if ((next - w).lpNorm<Eigen::Infinity>() < 1e-18) {
      w = next;
      break;
    }
    w = std::move(next);
  }
  return w;
}

} // namespace detail

inline MinNormResult min_norm_point(const Hull &hull,
                                    const MinNormOptions &opt = {}) {
  const auto &all = hull.generators();
  const std::size_t n_all = all.size();
  const Eigen::Index d = hull.dim();
  if (n_all == 1) {
    MinNormResult r;
    r.point = all.front();
    r.norm = r.point.norm();
    r.weights = Eigen::VectorXd::Ones(1);
    return r;
  }

  // Collapse duplicates; `rep[i]` maps a unique column back to its origin.
  std::vector<std::size_t> rep;
  for (std::size_t i = 0; i < n_all; ++i) {
    bool dup = false;
    for (std::size_t r : rep)
      if ((all[i] - all[r]).lpNorm<Eigen::Infinity>() <= opt.dedup_tol) {
        dup = true;
        break;
      }
    if (!dup) rep.push_back(i);
  }
  const std::size_t m = rep.size();
  Eigen::MatrixXd P(d, static_cast<Eigen::Index>(m));
  for (std::size_t j = 0; j < m; ++j)
    P.col(static_cast<Eigen::Index>(j)) = all[rep[j]];

  double scale = 0.0;
  for (Eigen::Index j = 0; j < P.cols(); ++j)
    scale = std::max(scale, P.col(j).squaredNorm());
  const double tol = opt.certificate_tol * std::max(scale, 1e-300);

  // Corral: active column indices and their weights.
  std::vector<Eigen::Index> corral;
  Eigen::VectorXd w_corral;
  {
    Eigen::Index best = 0;
    P.colwise().squaredNorm().minCoeff(&best);
    corral.push_back(best);
    w_corral = Eigen::VectorXd::Ones(1);
  }
  Point x = P.col(corral.front());

  const std::size_t cap = std::max<std::size_t>(10 * m * m, 50);
  std::size_t iterations = 0;
  bool converged = false;

  while (iterations < cap) {
    ++iterations;
    // Major cycle: most violating vertex.
    Eigen::Index j = 0;
    const double min_dot = (x.transpose() * P).minCoeff(&j);
    if (x.squaredNorm() - min_dot <= tol) {
      converged = true;
      break;
    }
    if (std::find(corral.begin(), corral.end(), j) != corral.end()) {
      // Numerical stall: the violator is already in the corral.
      converged = x.squaredNorm() - min_dot <= 1e3 * tol;
      break;
    }
    corral.push_back(j);
    w_corral.conservativeResize(w_corral.size() + 1);
    w_corral[w_corral.size() - 1] = 0.0;

    // Minor cycles.
    while (iterations < cap) {
      Eigen::MatrixXd B(d, static_cast<Eigen::Index>(corral.size()));
      for (std::size_t c = 0; c < corral.size(); ++c)
        B.col(static_cast<Eigen::Index>(c)) = P.col(corral[c]);
      const Eigen::VectorXd v = detail::affine_min_norm_weights(B);
      if (!v.allFinite()) break;
      if (v.minCoeff() > 1e-14) {
        w_corral = v;
        x = B * v;
        break;
      }
      ++iterations;
      double theta = 1.0;
      for (Eigen::Index c = 0; c < v.size(); ++c)
        if (v[c] <= 1e-14) {
          const double denom = w_corral[c] - v[c];
          if (denom > 0.0) theta = std::min(theta, w_corral[c] / denom);
        }
      w_corral = (1.0 - theta) * w_corral + theta * v;
      std::vector<Eigen::Index> kept;
      std::vector<double> kept_w;
      for (Eigen::Index c = 0; c < w_corral.size(); ++c)
        if (w_corral[c] > 1e-14) {
          kept.push_back(corral[static_cast<std::size_t>(c)]);
          kept_w.push_back(w_corral[c]);
        }
      if (kept.empty()) {
        kept.push_back(corral.back());
        kept_w.push_back(1.0);
      }
      corral = kept;
      w_corral = Eigen::Map<Eigen::VectorXd>(kept_w.data(),
                                             static_cast<Eigen::Index>(kept_w.size()));
      w_corral /= w_corral.sum();
      B.resize(d, static_cast<Eigen::Index>(corral.size()));
      for (std::size_t c = 0; c < corral.size(); ++c)
        B.col(static_cast<Eigen::Index>(c)) = P.col(corral[c]);
      x = B * w_corral;
    }
  }

  Eigen::VectorXd w_unique = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
  for (std::size_t c = 0; c < corral.size(); ++c)
    w_unique[corral[c]] = w_corral[static_cast<Eigen::Index>(c)];

  MinNormResult res;
  res.iterations = iterations;
  if (!converged) {
    w_unique = detail::simplex_projected_gradient(P, w_unique,
                                                  opt.fallback_iterations);
    res.used_fallback = true;
  }
  w_unique = w_unique.cwiseMax(0.0);
  w_unique /= w_unique.sum();

  res.weights = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_all));
  for (std::size_t j = 0; j < m; ++j)
    res.weights[static_cast<Eigen::Index>(rep[j])] = w_unique[static_cast<Eigen::Index>(j)];
  res.point = P * w_unique;
  res.norm = res.point.norm();
  return res;
}

inline double dist_to_hull(const Hull &hull, const Point &q) {
  return min_norm_point(hull.translated(q)).norm;
}

/// First-order optimality certificate: min_i <p, v_i - p>.
/// Nonnegative (up to rounding) exactly when p is the min-norm point.
inline double certificate_gap(const Hull &hull, const Point &p) {
  double worst = std::numeric_limits<double>::infinity();
  for (const auto &v : hull.generators())
    worst = std::min(worst, p.dot(v - p));
  return worst;
}

} // namespace tamesg
