#pragma once

// Removal/preservation trade-off frontier.
//
// For the shared-covariance Gaussian family the frontier is the parabola
// eps = (sqrt(alpha) - sqrt(D))^2 for alpha >= D = KL(p1 || p2). For a general
// regular exponential family the optimal member p* has mean
//   E_{p*}[T] = (lambda E_{p1}[T] - E_{p2}[T]) / (lambda - 1),  lambda in (0, 1),
// with lambda chosen so that KL(p1 || p*) = alpha, and the frontier value is
// v(alpha) = KL(p2 || p*). The three-point identity gives
//   v(alpha) = KL(p2 || p1) + alpha + (theta* - theta1)^T (E_{p1}[T] - E_{p2}[T]),
// which reduces to KL(p2 || p1) + alpha + (theta2 - theta1)^T (E_{p2}[T] - E_{p1}[T]) / (lambda - 1)
// only when the mean map is linear (the Gaussian case). The second form is
// reported separately as `v_linear_form`.

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "distunlearn/gaussian.hpp"

namespace distunlearn {

/// An (alpha, epsilon) pair of forward-KL divergences. `dominated` marks
/// points with alpha below the reference divergence D, which are beaten by
/// (D, 0).
struct TradeoffPoint {
  double alpha = 0.0;
  double epsilon = 0.0;
  bool dominated = false;
};

/// True when p meets removal level alpha and preservation level epsilon.
inline bool check_unlearning(double kl_p1_p, double kl_p2_p, double alpha, double epsilon) {
  return kl_p1_p >= alpha && kl_p2_p <= epsilon;
}

inline TradeoffPoint frontier_gaussian(double divergence_d, double alpha) {
  if (!(divergence_d >= 0.0) || !std::isfinite(divergence_d)) {
    throw std::invalid_argument("frontier_gaussian: divergence must be finite and >= 0");
  }
  if (!(alpha >= 0.0)) throw std::invalid_argument("frontier_gaussian: alpha must be >= 0");
  if (alpha < divergence_d) return {alpha, 0.0, true};
  const double gap = std::sqrt(alpha) - std::sqrt(divergence_d);
  return {alpha, gap * gap, false};
}

/// A regular minimal exponential family p_theta(x) = h(x) exp(theta^T T(x) - A(theta)),
/// described through its log-partition A, the mean map grad A, and the inverse
/// of the mean map. `inverse_mean_map` returns nullopt for mean vectors outside
/// the interior of the mean domain.
struct ExpFamilySpec {
  Eigen::VectorXd theta1;
  Eigen::VectorXd theta2;
  std::function<double(const Eigen::VectorXd&)> log_partition;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> mean_map;
  std::function<std::optional<Eigen::VectorXd>(const Eigen::VectorXd&)> inverse_mean_map;
};

/// KL(p_from || p_to) as the Bregman divergence of A:
/// A(to) - A(from) - (to - from)^T grad A(from).
inline double bregman_kl(const ExpFamilySpec& family, const Eigen::VectorXd& theta_from,
                         const Eigen::VectorXd& theta_to) {
  return family.log_partition(theta_to) - family.log_partition(theta_from) -
         (theta_to - theta_from).dot(family.mean_map(theta_from));
}

/// N(mu, Sigma) with Sigma fixed: theta = Sigma^-1 mu, T(x) = x,
/// A(theta) = theta^T Sigma theta / 2, grad A(theta) = Sigma theta.
inline ExpFamilySpec make_gaussian_family(const Eigen::VectorXd& mu1, const Eigen::VectorXd& mu2,
                                          const Eigen::MatrixXd& covariance) {
  const GaussianModel check(mu1, covariance);  // validates covariance
  auto llt = std::make_shared<Eigen::LLT<Eigen::MatrixXd>>(covariance);
  ExpFamilySpec spec;
  spec.theta1 = llt->solve(mu1);
  spec.theta2 = llt->solve(mu2);
  spec.log_partition = [covariance](const Eigen::VectorXd& t) {
    return 0.5 * t.dot(covariance * t);
  };
  spec.mean_map = [covariance](const Eigen::VectorXd& t) -> Eigen::VectorXd {
    return covariance * t;
  };
  spec.inverse_mean_map = [llt](const Eigen::VectorXd& m) -> std::optional<Eigen::VectorXd> {
    if (!m.allFinite()) return std::nullopt;
    return Eigen::VectorXd(llt->solve(m));
  };
  return spec;
}

/// Bernoulli(q) with theta = logit(q), A(theta) = log(1 + e^theta).
inline ExpFamilySpec make_bernoulli_family(double q1, double q2) {
  if (!(q1 > 0.0 && q1 < 1.0 && q2 > 0.0 && q2 < 1.0)) {
    throw std::invalid_argument("make_bernoulli_family: probabilities must lie in (0, 1)");
  }
  ExpFamilySpec spec;
  spec.theta1 = Eigen::VectorXd::Constant(1, std::log(q1 / (1.0 - q1)));
  spec.theta2 = Eigen::VectorXd::Constant(1, std::log(q2 / (1.0 - q2)));
  spec.log_partition = [](const Eigen::VectorXd& t) {
    const double x = t(0);
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  };
  spec.mean_map = [](const Eigen::VectorXd& t) -> Eigen::VectorXd {
    const double x = t(0);
    const double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    return Eigen::VectorXd::Constant(1, s);
  };
  spec.inverse_mean_map = [](const Eigen::VectorXd& m) -> std::optional<Eigen::VectorXd> {
    const double q = m(0);
    if (!(q > 0.0 && q < 1.0)) return std::nullopt;
    return Eigen::VectorXd::Constant(1, std::log(q / (1.0 - q)));
  };
  return spec;
}

struct ExpFamilyFrontierPoint {
  TradeoffPoint point;
  double lambda_star = 0.0;
  Eigen::VectorXd theta_star;
  /// |H(lambda*) - alpha|.
  double residual = 0.0;
  /// max-norm of (1 - lambda*) grad A(theta*) - (E_{p2}[T] - lambda* E_{p1}[T]).
  double stationarity_residual = 0.0;
  /// KL(p2 || p1) + alpha + (theta2 - theta1)^T (E_{p2}[T] - E_{p1}[T]) / (lambda* - 1).
  /// Equals point.epsilon for Gaussian families; differs otherwise.
  double v_linear_form = 0.0;
  bool used_golden_section = false;
};

namespace detail {

struct StationaryPoint {
  std::optional<Eigen::VectorXd> theta;
  double kl_from_p1 = std::numeric_limits<double>::infinity();
};

inline StationaryPoint stationary_point(const ExpFamilySpec& family, const Eigen::VectorXd& m1,
                                        const Eigen::VectorXd& m2, double lambda) {
  const Eigen::VectorXd mean = (lambda * m1 - m2) / (lambda - 1.0);
  StationaryPoint out;
  out.theta = family.inverse_mean_map(mean);
  if (!out.theta) return out;
  const double a_star = family.log_partition(*out.theta);
  if (!std::isfinite(a_star)) {
    out.theta.reset();
    return out;
  }
  out.kl_from_p1 = a_star - family.log_partition(family.theta1) -
                   (*out.theta - family.theta1).dot(m1);
  return out;
}

}  // namespace detail

/// Solve KL(p1 || p*(lambda)) = alpha for lambda in (0, 1) and evaluate v(alpha).
/// alpha <= KL(p1 || p2) yields a dominated point with epsilon = 0 and lambda = 0.
inline ExpFamilyFrontierPoint frontier_expfamily(const ExpFamilySpec& family, double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("frontier_expfamily: alpha must be finite and >= 0");
  }
  if (family.theta1.size() != family.theta2.size() || family.theta1.size() == 0) {
    throw std::invalid_argument("frontier_expfamily: natural parameters have mismatched size");
  }
  if ((family.theta1 - family.theta2).cwiseAbs().maxCoeff() == 0.0) {
    throw std::invalid_argument("frontier_expfamily: theta1 equals theta2");
  }
  const Eigen::VectorXd m1 = family.mean_map(family.theta1);
  const Eigen::VectorXd m2 = family.mean_map(family.theta2);
  const double d12 = bregman_kl(family, family.theta1, family.theta2);

  ExpFamilyFrontierPoint out;
  if (alpha <= d12) {
    out.point = {alpha, 0.0, true};
    out.theta_star = family.theta2;
    return out;
  }

  auto excess = [&](double lambda) {
    return detail::stationary_point(family, m1, m2, lambda).kl_from_p1 - alpha;
  };

  constexpr double lo_end = 1e-9;
  constexpr double hi_end = 1.0 - 1e-9;
  constexpr int max_iter = 200;

  // Coarse scan for monotonicity; the direction is not assumed.
  constexpr int scan_points = 65;
  bool increasing = true;
  bool decreasing = true;
  double prev = excess(lo_end);
  for (int i = 1; i < scan_points; ++i) {
    const double lam = lo_end + (hi_end - lo_end) * i / (scan_points - 1);
    const double cur = excess(lam);
    if (cur < prev) increasing = false;
    if (cur > prev) decreasing = false;
    prev = cur;
  }

  double lambda_star = 0.0;
  const double f_lo = excess(lo_end);
  const double f_hi = excess(hi_end);
  if ((increasing || decreasing) && (f_lo < 0.0) != (f_hi < 0.0)) {
    double lo = lo_end;
    double hi = hi_end;
    const bool lo_negative = f_lo < 0.0;
    for (int it = 0; it < max_iter; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if ((excess(mid) < 0.0) == lo_negative) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    const double e_lo = std::abs(excess(lo));
    const double e_hi = std::abs(excess(hi));
    lambda_star = (e_lo <= e_hi) ? lo : hi;
  } else if (!increasing && !decreasing) {
    // Golden-section on |H(lambda) - alpha|.
    out.used_golden_section = true;
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo_end;
    double b = hi_end;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    for (int it = 0; it < max_iter && b - a > 1e-15; ++it) {
      if (std::abs(excess(c)) < std::abs(excess(d))) {
        b = d;
      } else {
        a = c;
      }
      c = b - inv_phi * (b - a);
      d = a + inv_phi * (b - a);
    }
    lambda_star = 0.5 * (a + b);
  } else {
    throw std::runtime_error(
        "frontier_expfamily: no sign change of KL(p1||p*) - alpha on the lambda bracket");
  }

  const auto sp = detail::stationary_point(family, m1, m2, lambda_star);
  out.residual = std::abs(sp.kl_from_p1 - alpha);
  if (!sp.theta || !(out.residual <= 1e-9 * std::max(1.0, alpha))) {
    throw std::runtime_error("frontier_expfamily: lambda bracket failed to converge (residual " +
                             std::to_string(out.residual) + ")");
  }
  out.lambda_star = lambda_star;
  out.theta_star = *sp.theta;
  const double d21 = bregman_kl(family, family.theta2, family.theta1);
  const double cross = (family.theta2 - family.theta1).dot(m2 - m1);
  out.v_linear_form = d21 + alpha + cross / (lambda_star - 1.0);
  const double v = bregman_kl(family, family.theta2, out.theta_star);
  out.point = {alpha, std::max(0.0, v), false};
  const Eigen::VectorXd lhs = (1.0 - lambda_star) * family.mean_map(out.theta_star);
  const Eigen::VectorXd rhs = m2 - lambda_star * m1;
  out.stationarity_residual = (lhs - rhs).cwiseAbs().maxCoeff();
  return out;
}

}  // namespace distunlearn
