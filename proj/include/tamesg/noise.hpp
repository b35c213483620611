#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "tamesg/core.hpp"
#include "tamesg/rng.hpp"

namespace tamesg {

enum class NoiseKind { zero, gaussian, bounded_uniform, state_scaled_gaussian };

inline const char *to_string(NoiseKind k) {
  switch (k) {
  case NoiseKind::zero: return "zero";
  case NoiseKind::gaussian: return "gaussian";
  case NoiseKind::bounded_uniform: return "bounded-uniform";
  case NoiseKind::state_scaled_gaussian: return "state-scaled-gaussian";
  }
  return "?";
}

inline std::optional<NoiseKind> parse_noise_kind(std::string_view s) {
  if (s == "zero") return NoiseKind::zero;
  if (s == "gaussian") return NoiseKind::gaussian;
  if (s == "bounded-uniform") return NoiseKind::bounded_uniform;
  if (s == "state-scaled-gaussian") return NoiseKind::state_scaled_gaussian;
  return std::nullopt;
}

/// Zero-mean perturbation model. `scale` is sigma for the Gaussian kinds
/// and the ball radius for bounded-uniform.
class NoiseModel {
public:
  NoiseModel() = default;
  NoiseModel(NoiseKind kind, double scale) : kind_(kind), scale_(scale) {
    if (kind == NoiseKind::zero) scale_ = 0.0;
    else if (!std::isfinite(scale) || scale < 0.0)
      throw ContractViolation("NoiseModel: scale must be finite and >= 0");
  }

  static NoiseModel zero() { return {}; }
  static NoiseModel gaussian(double sigma) { return {NoiseKind::gaussian, sigma}; }
  static NoiseModel bounded_uniform(double radius) {
    return {NoiseKind::bounded_uniform, radius};
  }
  static NoiseModel state_scaled(double sigma) {
    return {NoiseKind::state_scaled_gaussian, sigma};
  }

  NoiseKind kind() const { return kind_; }
  double scale() const { return scale_; }

  Point draw(const Point &x, CounterRng &rng) const {
    const auto d = static_cast<std::size_t>(x.size());
    switch (kind_) {
    case NoiseKind::zero: return Point::Zero(x.size());
    case NoiseKind::gaussian: return scale_ * rng.normal_vector(d);
    case NoiseKind::bounded_uniform: return rng.uniform_ball(d, scale_);
    case NoiseKind::state_scaled_gaussian:
      return (scale_ * (1.0 + x.norm())) * rng.normal_vector(d);
    }
    return Point::Zero(x.size());
  }

  /// p(x): upper bound on E|xi|^2 at x.
  double second_moment_bound(const Point &x) const {
    const double d = static_cast<double>(x.size());
    switch (kind_) {
    case NoiseKind::zero: return 0.0;
    case NoiseKind::gaussian: return scale_ * scale_ * d;
    case NoiseKind::bounded_uniform: return scale_ * scale_;
    case NoiseKind::state_scaled_gaussian: {
      const double s = scale_ * (1.0 + x.norm());
      return s * s * d;
    }
    }
    return 0.0;
  }

  /// Almost-sure bound on |xi|, infinite for the Gaussian kinds.
  double almost_sure_bound() const {
    switch (kind_) {
    case NoiseKind::zero: return 0.0;
    case NoiseKind::bounded_uniform: return scale_;
    default: return std::numeric_limits<double>::infinity();
    }
  }

  std::string describe() const {
    if (kind_ == NoiseKind::zero) return "zero";
    return std::string(to_string(kind_)) + "(" + fmt_double(scale_) + ")";
  }

private:
  NoiseKind kind_ = NoiseKind::zero;
  double scale_ = 0.0;
};

} // namespace tamesg
