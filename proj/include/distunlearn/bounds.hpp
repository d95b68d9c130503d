#pragma once

// Finite-sample (alpha, epsilon) guarantees for random and selective removal
// in the univariate known-variance Gaussian model, the budget formulas that
// invert their simplified forms, and the Hoeffding / DKW radii they rest on.
//
// Notation: r = (n1 - f) / n2, L = ln(4 / delta), D = KL(p1 || p2),
// q = 1 - f/n1 + sqrt(L / (2 n1)).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

#include "distunlearn/gaussian.hpp"
#include "distunlearn/normal.hpp"

namespace distunlearn {

enum class Mechanism { Random, Selective };

inline std::string_view to_string(Mechanism m) {
  return m == Mechanism::Random ? "random" : "selective";
}

struct GuaranteeBound {
  double alpha_lower = 0.0;
  double epsilon_upper = 0.0;
  double delta = 0.0;
  std::size_t f = 0;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  double divergence_d = 0.0;
  Mechanism mechanism = Mechanism::Random;
  /// False when the selective quantile argument q falls outside (0, 1); the
  /// two bound values are then NaN.
  bool applicable = true;
  /// alpha_lower <= 0: the removal side guarantees nothing.
  bool vacuous = false;
};

namespace detail {

inline void check_bound_args(std::size_t n1, std::size_t n2, std::size_t f, double delta,
                             double divergence_d) {
  if (n1 < 1) throw std::invalid_argument("bound: n1 must be >= 1");
  if (n2 < 1) throw std::invalid_argument("bound: n2 must be >= 1");
  if (f > n1) throw std::invalid_argument("bound: f exceeds n1");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("bound: delta must lie in (0, 1)");
  if (!(divergence_d >= 0.0) || !std::isfinite(divergence_d)) {
    throw std::invalid_argument("bound: divergence must be finite and >= 0");
  }
}

}  // namespace detail

/// alpha >= (1/2 - 3 r^2) D - (3L / 2n2)(1 + r)
/// eps   <= 3 r^2 D + (3L / n2)(1 + r)
inline GuaranteeBound bound_random(std::size_t n1, std::size_t n2, std::size_t f, double delta,
                                   double divergence_d) {
  detail::check_bound_args(n1, n2, f, delta, divergence_d);
  const double r = static_cast<double>(n1 - f) / static_cast<double>(n2);
  const double big_l = std::log(4.0 / delta);
  const double dn2 = static_cast<double>(n2);
  GuaranteeBound b{};
  b.alpha_lower = (0.5 - 3.0 * r * r) * divergence_d - 3.0 * big_l / (2.0 * dn2) * (1.0 + r);
  b.epsilon_upper = 3.0 * r * r * divergence_d + 3.0 * big_l / dn2 * (1.0 + r);
  b.delta = delta;
  b.f = f;
  b.n1 = n1;
  b.n2 = n2;
  b.divergence_d = divergence_d;
  b.mechanism = Mechanism::Random;
  b.vacuous = !(b.alpha_lower > 0.0);
  return b;
}

/// With G = g^-1(q; D):
/// alpha >= D/2 - r^2 G^2 / 2 - L / n2
/// eps   <= r^2 G^2 + 2L / n2
inline GuaranteeBound bound_selective(std::size_t n1, std::size_t n2, std::size_t f,
                                      double delta, double divergence_d) {
  detail::check_bound_args(n1, n2, f, delta, divergence_d);
  const double dn1 = static_cast<double>(n1);
  const double dn2 = static_cast<double>(n2);
  const double big_l = std::log(4.0 / delta);
  const double q = 1.0 - static_cast<double>(f) / dn1 + std::sqrt(big_l / (2.0 * dn1));
  GuaranteeBound b{};
  b.delta = delta;
  b.f = f;
  b.n1 = n1;
  b.n2 = n2;
  b.divergence_d = divergence_d;
  b.mechanism = Mechanism::Selective;
  if (!(q > 0.0 && q < 1.0)) {
    b.applicable = false;
    b.vacuous = true;
    b.alpha_lower = std::numeric_limits<double>::quiet_NaN();
    b.epsilon_upper = std::numeric_limits<double>::quiet_NaN();
    return b;
  }
  const double r = static_cast<double>(n1 - f) / dn2;
  const double quantile = g_inverse(q, divergence_d);
  const double spread = r * r * quantile * quantile;
  b.alpha_lower = 0.5 * divergence_d - 0.5 * spread - big_l / dn2;
  b.epsilon_upper = spread + 2.0 * big_l / dn2;
  b.vacuous = !(b.alpha_lower > 0.0);
  return b;
}

inline GuaranteeBound bound_for(Mechanism m, std::size_t n1, std::size_t n2, std::size_t f,
                                double delta, double divergence_d) {
  return m == Mechanism::Random ? bound_random(n1, n2, f, delta, divergence_d)
                                : bound_selective(n1, n2, f, delta, divergence_d);
}

enum class BindingConstraint { None, Removal, Preservation, Floor };

inline std::string_view to_string(BindingConstraint c) {
  switch (c) {
    case BindingConstraint::None: return "none";
    case BindingConstraint::Removal: return "removal";
    case BindingConstraint::Preservation: return "preservation";
    case BindingConstraint::Floor: return "floor";
  }
  return "none";
}

struct BudgetResult {
  std::size_t f = 0;
  bool applicable = true;
  std::string inapplicable_reason;
  /// Real-valued right-hand sides of the simplified inequalities (NaN when
  /// not defined). floor_term is only used by selective removal.
  double removal_term = std::numeric_limits<double>::quiet_NaN();
  double preservation_term = std::numeric_limits<double>::quiet_NaN();
  double floor_term = std::numeric_limits<double>::quiet_NaN();
  BindingConstraint binding = BindingConstraint::None;
  /// The simplified inequalities did not deliver the targets under the exact
  /// guarantee; f was raised to the smallest value that does.
  bool closed_form_insufficient = false;
};

namespace detail {

inline void check_budget_args(std::size_t n1, std::size_t n2, double delta, double divergence_d,
                              double target_alpha, double target_epsilon) {
  if (n1 < 1 || n2 < 1) throw std::invalid_argument("budget: n1 and n2 must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("budget: delta must lie in (0, 1)");
  if (!(divergence_d > 0.0) || !std::isfinite(divergence_d)) {
    throw std::invalid_argument("budget: divergence must be finite and > 0");
  }
  if (!(target_alpha > 0.0) || !(target_epsilon > 0.0)) {
    throw std::invalid_argument("budget: targets must be > 0");
  }
}

inline std::size_t clamp_ceil(double x, std::size_t n1) {
  if (!(x > 0.0)) return 0;
  const double c = std::ceil(x);
  if (c >= static_cast<double>(n1)) return n1;
  return static_cast<std::size_t>(c);
}

/// Raise f until the exact guarantee meets both targets (monotone in f).
inline void enforce_exact(Mechanism m, std::size_t n1, std::size_t n2, double delta,
                          double divergence_d, double target_alpha, double target_epsilon,
                          BudgetResult& out) {
  auto meets = [&](std::size_t f) {
    const auto b = bound_for(m, n1, n2, f, delta, divergence_d);
    return b.applicable && b.alpha_lower >= target_alpha && b.epsilon_upper <= target_epsilon;
  };
  if (meets(out.f)) return;
  std::size_t lo = out.f;  // fails
  std::size_t hi = n1;
  if (!meets(hi)) {
    out.closed_form_insufficient = true;
    out.applicable = false;
    out.inapplicable_reason = "targets not reachable even at f = n1";
    out.f = n1;
    return;
  }
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (meets(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  out.f = hi;
  out.closed_form_insufficient = true;
  const auto below = bound_for(m, n1, n2, hi - 1, delta, divergence_d);
  out.binding = (below.applicable && below.alpha_lower >= target_alpha)
                    ? BindingConstraint::Preservation
                    : BindingConstraint::Removal;
}

}  // namespace detail

/// Smallest f with
///   f >= n1 - n2 sqrt((2D - alpha) / (12 D))          (removal)
///   f >= n1 - n2 min{1, sqrt(eps / (6 D))}             (preservation)
/// under n2 >= 12 L / min{eps, alpha} and D >= 8 alpha. The result is then
/// checked against the exact random-removal guarantee and raised if needed.
inline BudgetResult budget_random(std::size_t n1, std::size_t n2, double delta,
                                  double divergence_d, double target_alpha,
                                  double target_epsilon) {
  detail::check_budget_args(n1, n2, delta, divergence_d, target_alpha, target_epsilon);
  const double big_l = std::log(4.0 / delta);
  const double dn1 = static_cast<double>(n1);
  const double dn2 = static_cast<double>(n2);
  BudgetResult out;
  if (dn2 < 12.0 * big_l / std::min(target_epsilon, target_alpha)) {
    out.applicable = false;
    out.inapplicable_reason = "n2 < 12 ln(4/delta) / min(eps, alpha)";
  } else if (divergence_d < 8.0 * target_alpha) {
    out.applicable = false;
    out.inapplicable_reason = "D < 8 alpha";
  }
  const double d = divergence_d;
  out.removal_term = dn1 - dn2 * std::sqrt(std::max(0.0, (2.0 * d - target_alpha) / (12.0 * d)));
  out.preservation_term = dn1 - dn2 * std::min(1.0, std::sqrt(target_epsilon / (6.0 * d)));
  const double need = std::max(out.removal_term, out.preservation_term);
  out.f = detail::clamp_ceil(need, n1);
  if (need <= 0.0) {
    out.binding = BindingConstraint::None;
  } else {
    out.binding = out.removal_term >= out.preservation_term ? BindingConstraint::Removal
                                                            : BindingConstraint::Preservation;
  }
  if (out.applicable) {
    detail::enforce_exact(Mechanism::Random, n1, n2, delta, divergence_d, target_alpha,
                          target_epsilon, out);
  }
  return out;
}

/// Smallest f with
///   f >= n1 (3/2 + sqrt(L / 2n1) - Phi(2 sqrt(2D)))                       (floor)
///   f >= n1 - sqrt(n1 n2) (eps / 16 pi)^(1/4) exp(-D)                      (preservation)
///   f >= n1 - sqrt(n1 n2) ((D - 4 alpha) / 8 pi)^(1/4) exp(-D)             (removal)
/// under D >= 4 alpha and n2 >= 2L max{1/eps, 1/sqrt(eps), 1/alpha, sqrt(D - 4 alpha)}.
inline BudgetResult budget_selective(std::size_t n1, std::size_t n2, double delta,
                                     double divergence_d, double target_alpha,
                                     double target_epsilon) {
  detail::check_budget_args(n1, n2, delta, divergence_d, target_alpha, target_epsilon);
  const double big_l = std::log(4.0 / delta);
  const double dn1 = static_cast<double>(n1);
  const double dn2 = static_cast<double>(n2);
  const double d = divergence_d;
  BudgetResult out;
  if (d < 4.0 * target_alpha) {
    out.applicable = false;
    out.inapplicable_reason = "D < 4 alpha";
  } else {
    const double need_n2 =
        2.0 * big_l *
        std::max({1.0 / target_epsilon, 1.0 / std::sqrt(target_epsilon), 1.0 / target_alpha,
                  std::sqrt(d - 4.0 * target_alpha)});
    if (dn2 < need_n2) {
      out.applicable = false;
      out.inapplicable_reason = "n2 below the selective-removal sample requirement";
    }
  }
  const double scale = std::sqrt(dn1 * dn2) * std::exp(-d);
  out.floor_term =
      dn1 * (1.5 + std::sqrt(big_l / (2.0 * dn1)) - normal_cdf(2.0 * std::sqrt(2.0 * d)));
  out.preservation_term = dn1 - scale * std::pow(target_epsilon / (16.0 * std::numbers::pi), 0.25);
  out.removal_term =
      dn1 - scale * std::pow(std::max(0.0, d - 4.0 * target_alpha) / (8.0 * std::numbers::pi), 0.25);
  const double need = std::max({out.floor_term, out.preservation_term, out.removal_term});
  out.f = detail::clamp_ceil(need, n1);
  if (need <= 0.0) {
    out.binding = BindingConstraint::None;
  } else if (out.removal_term >= out.preservation_term && out.removal_term >= out.floor_term) {
    out.binding = BindingConstraint::Removal;
  } else if (out.preservation_term >= out.floor_term) {
    out.binding = BindingConstraint::Preservation;
  } else {
    out.binding = BindingConstraint::Floor;
  }
  if (out.applicable) {
    detail::enforce_exact(Mechanism::Selective, n1, n2, delta, divergence_d, target_alpha,
                          target_epsilon, out);
  }
  return out;
}

struct DeviationTerms {
  double hoeffding = 0.0;  // sigma sqrt(2 ln(2/delta) / n)
  double dkw = 0.0;        // sqrt(ln(2/delta) / 2n)
};

inline DeviationTerms deviation_terms(double n, double delta, double sigma) {
  if (!(n >= 1.0)) throw std::invalid_argument("deviation_terms: n must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("deviation_terms: delta must lie in (0, 1)");
  }
  if (!(sigma > 0.0)) throw std::invalid_argument("deviation_terms: sigma must be > 0");
  const double l2 = std::log(2.0 / delta);
  return {sigma * std::sqrt(2.0 * l2 / n), std::sqrt(l2 / (2.0 * n))};
}

}  // namespace distunlearn
