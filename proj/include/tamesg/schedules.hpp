#pragma once

// Step-size sequences. A usable schedule is nonnegative, square summable,
// but not summable: sum a_k = inf and sum a_k^2 < inf.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "tamesg/core.hpp"

namespace tamesg {

enum class ScheduleForm { polynomial, constant_then_decay, table };

inline const char *to_string(ScheduleForm f) {
  switch (f) {
  case ScheduleForm::polynomial: return "polynomial";
  case ScheduleForm::constant_then_decay: return "constant-then-decay";
  case ScheduleForm::table: return "table";
  }
  return "?";
}

inline std::optional<ScheduleForm> parse_schedule_form(std::string_view s) {
  if (s == "polynomial") return ScheduleForm::polynomial;
  if (s == "constant-then-decay") return ScheduleForm::constant_then_decay;
  if (s == "table") return ScheduleForm::table;
  return std::nullopt;
}

/// Polynomial:           a_k = c (k+1)^-gamma
/// Constant-then-decay:  a_k = c for k < k0, then c (k-k0+1)^-gamma
/// Table:                a_k = table[k], defined up to the table horizon
struct ScheduleParams {
  ScheduleForm form = ScheduleForm::polynomial;
  double c = 0.5;
  double gamma = 0.75;
  std::size_t k0 = 0;
  std::vector<double> table;
};

struct ScheduleValidity {
  bool valid = false;
  /// True when validity was inferred from finite data only (tables).
  bool heuristic = false;
  std::string reason;
};

inline constexpr const char *kStepAssumption =
    "step sizes must be nonnegative, square summable, but not summable";

namespace detail {

inline ScheduleValidity classify_exponent(double gamma, bool heuristic) {
  if (!std::isfinite(gamma)) return {false, heuristic, "non-finite exponent"};
  if (gamma > 1.0) return {false, heuristic, "summable"};
  if (gamma <= 0.5) return {false, heuristic, "not square-summable"};
  return {true, heuristic, "square summable, not summable"};
}

// Least-squares slope of log a_k against log(k+1) over the second half of
// the table. Returns the decay exponent estimate.
inline std::optional<double> fitted_decay_exponent(const std::vector<double> &t) {
  const std::size_t n = t.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t cnt = 0;
  for (std::size_t k = n / 2; k < n; ++k) {
    if (t[k] <= 0.0) continue;
    const double lx = std::log(static_cast<double>(k + 1));
    const double ly = std::log(t[k]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++cnt;
  }
  if (cnt < 2) return std::nullopt;
  const double denom = static_cast<double>(cnt) * sxx - sx * sx;
  if (denom <= 0.0) return std::nullopt;
  return -(static_cast<double>(cnt) * sxy - sx * sy) / denom;
}

} // namespace detail

/// Analytic test for the parametric forms; partial-data heuristic for
/// tables (certified only up to the table horizon).
inline ScheduleValidity validate(const ScheduleParams &p) {
  if (p.form == ScheduleForm::table) {
    if (p.table.size() < 16)
      return {false, true, "table shorter than 16 entries"};
    for (double a : p.table)
      if (!std::isfinite(a) || a < 0.0)
        return {false, true, "negative or non-finite step"};
    const auto g = detail::fitted_decay_exponent(p.table);
    if (!g) return {false, true, "summable"};
    // Fitted exponents carry estimation noise; accept a small slack above 1.
    if (*g > 1.0 && *g <= 1.02)
      return {true, true, "square summable, not summable (fitted exponent)"};
    auto v = detail::classify_exponent(*g, true);
    if (v.valid) v.reason += " (fitted exponent)";
    return v;
  }
  if (!std::isfinite(p.c) || p.c <= 0.0)
    return {false, false, "scale c must be positive"};
  return detail::classify_exponent(p.gamma, false);
}

class InvalidSchedule : public ContractViolation {
public:
  InvalidSchedule(const std::string &reason)
      : ContractViolation("invalid step schedule (" + reason + "): " +
                          kStepAssumption),
        reason_(reason) {}
  const std::string &reason() const { return reason_; }

private:
  std::string reason_;
};

class StepSchedule {
public:
  /// Throws InvalidSchedule unless the parameters pass `validate`.
  explicit StepSchedule(ScheduleParams p) : p_(std::move(p)) {
    validity_ = validate(p_);
    if (!validity_.valid) throw InvalidSchedule(validity_.reason);
  }

  static StepSchedule polynomial(double c, double gamma) {
    return StepSchedule({ScheduleForm::polynomial, c, gamma, 0, {}});
  }
  static StepSchedule constant_then_decay(double c, double gamma, std::size_t k0) {
    return StepSchedule({ScheduleForm::constant_then_decay, c, gamma, k0, {}});
  }
  static StepSchedule table(std::vector<double> steps) {
    return StepSchedule({ScheduleForm::table, 0.0, 0.0, 0, std::move(steps)});
  }

  double step(std::size_t k) const {
    switch (p_.form) {
    case ScheduleForm::polynomial:
      return p_.c * std::pow(static_cast<double>(k) + 1.0, -p_.gamma);
    case ScheduleForm::constant_then_decay:
      if (k < p_.k0) return p_.c;
      return p_.c * std::pow(static_cast<double>(k - p_.k0) + 1.0, -p_.gamma);
    case ScheduleForm::table:
      if (k >= p_.table.size())
        throw ContractViolation("step: index " + std::to_string(k) +
                                " beyond table horizon " +
                                std::to_string(p_.table.size()));
      return p_.table[k];
    }
    return 0.0;
  }

  /// Largest index at which `step` is defined, if finite.
  std::optional<std::size_t> horizon() const {
    if (p_.form == ScheduleForm::table) return p_.table.size();
    return std::nullopt;
  }

  const ScheduleParams &params() const { return p_; }
  const ScheduleValidity &validity() const { return validity_; }

  std::string describe() const {
    if (p_.form == ScheduleForm::table) {
      std::string bytes;
      for (double a : p_.table) bytes += fmt_double(a) + ",";
      return "table[" + std::to_string(p_.table.size()) + "," + hex64(fnv1a64(bytes)) + "]";
    }
    std::string s = std::string(to_string(p_.form)) + "(c=" + fmt_double(p_.c) +
                    ",gamma=" + fmt_double(p_.gamma);
    if (p_.form == ScheduleForm::constant_then_decay)
      s += ",k0=" + std::to_string(p_.k0);
    return s + ")";
  }

private:
  ScheduleParams p_;
  ScheduleValidity validity_;
};

inline ScheduleValidity validate(const StepSchedule &s) { return s.validity(); }

/// Upper bound on sum_{k>=n} a_k^2 for polynomial schedules (integral test).
inline double square_tail_bound(const StepSchedule &s, std::size_t n) {
  const auto &p = s.params();
  if (p.form == ScheduleForm::table) {
    double tail = 0.0;
    for (std::size_t k = n; k < p.table.size(); ++k) tail += p.table[k] * p.table[k];
    return tail;
  }
  const std::size_t shift = p.form == ScheduleForm::constant_then_decay ? p.k0 : 0;
  const double e = 2.0 * p.gamma;
  const double m = n > shift ? static_cast<double>(n - shift) : 0.0;
  // sum_{j>=m} (j+1)^-e <= (m+1)^-e + m^(1-e)/(e-1) <= (m+1)^(1-e) * e/(e-1)
  double tail = p.c * p.c * std::pow(m + 1.0, 1.0 - e) * e / (e - 1.0);
  if (n < shift) tail += p.c * p.c * static_cast<double>(shift - n);
  return tail;
}

} // namespace tamesg
