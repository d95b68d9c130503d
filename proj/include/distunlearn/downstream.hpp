#pragma once

// Log-loss accounting on finite joint distributions over X x Y.
//
// With h the Bayes predictor of p, h(y|x) = p(x, y) / p^X(x), and h_q* that of q:
//   L(h; q) - L(h_q*; q) = KL(q || p) - KL(q^X || p^X).
// Both sides are computed independently so the identity can be checked.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace distunlearn {

/// probs(x, y) over a finite support; rows index X, columns index Y.
class FiniteJoint {
 public:
  explicit FiniteJoint(Eigen::MatrixXd probs) : probs_(std::move(probs)) {
    if (probs_.rows() < 1) throw std::invalid_argument("FiniteJoint: |X| must be >= 1");
    if (probs_.cols() < 2) throw std::invalid_argument("FiniteJoint: |Y| must be >= 2");
    if (!probs_.allFinite() || (probs_.array() < 0.0).any()) {
      throw std::invalid_argument("FiniteJoint: probabilities must be finite and >= 0");
    }
    const double total = probs_.sum();
    if (std::abs(total - 1.0) > 1e-12) {
      throw std::invalid_argument("FiniteJoint: total mass " + std::to_string(total) + " != 1");
    }
  }

  const Eigen::MatrixXd& probs() const { return probs_; }
  Eigen::Index size_x() const { return probs_.rows(); }
  Eigen::Index size_y() const { return probs_.cols(); }
  Eigen::VectorXd marginal_x() const { return probs_.rowwise().sum(); }

 private:
  Eigen::MatrixXd probs_;
};

namespace detail {

inline double kl_terms(const Eigen::ArrayXd& q, const Eigen::ArrayXd& p) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    if (q(i) == 0.0) continue;
    if (p(i) == 0.0) return std::numeric_limits<double>::infinity();
    s += q(i) * std::log(q(i) / p(i));
  }
  return s;
}

inline void check_shapes(const FiniteJoint& a, const FiniteJoint& b) {
  if (a.size_x() != b.size_x() || a.size_y() != b.size_y()) {
    throw std::invalid_argument("finite joints have different supports");
  }
}

}  // namespace detail

inline double kl_joint(const FiniteJoint& q, const FiniteJoint& p) {
  detail::check_shapes(q, p);
  return detail::kl_terms(q.probs().reshaped().array(), p.probs().reshaped().array());
}

inline double kl_marginal_x(const FiniteJoint& q, const FiniteJoint& p) {
  detail::check_shapes(q, p);
  return detail::kl_terms(q.marginal_x().array(), p.marginal_x().array());
}

/// Expected log-loss under q of the Bayes predictor of `model`.
inline double expected_logloss(const FiniteJoint& q, const FiniteJoint& model) {
  detail::check_shapes(q, model);
  const Eigen::VectorXd mx = model.marginal_x();
  double loss = 0.0;
  for (Eigen::Index x = 0; x < q.size_x(); ++x) {
    for (Eigen::Index y = 0; y < q.size_y(); ++y) {
      const double w = q.probs()(x, y);
      if (w == 0.0) continue;
      const double h = mx(x) > 0.0 ? model.probs()(x, y) / mx(x) : 0.0;
      if (h == 0.0) return std::numeric_limits<double>::infinity();
      loss -= w * std::log(h);
    }
  }
  return loss;
}

struct LoglossDecomposition {
  double excess_loss = 0.0;  // L(h; q) - L(h_q*; q)
  double joint_kl = 0.0;     // KL(q || p)
  double marginal_kl = 0.0;  // KL(q^X || p^X)
  /// Some divergence is infinite (p misses part of q's support).
  bool infinite = false;
  double identity_gap() const {
    return infinite ? std::numeric_limits<double>::quiet_NaN()
                    : excess_loss - (joint_kl - marginal_kl);
  }
};

inline LoglossDecomposition logloss_decomposition(const FiniteJoint& q, const FiniteJoint& p) {
  LoglossDecomposition out;
  const double lh = expected_logloss(q, p);
  const double lq = expected_logloss(q, q);
  out.excess_loss = lh - lq;
  out.joint_kl = kl_joint(q, p);
  out.marginal_kl = kl_marginal_x(q, p);
  out.infinite = !std::isfinite(out.excess_loss) || !std::isfinite(out.joint_kl) ||
                 !std::isfinite(out.marginal_kl);
  return out;
}

struct Prop2Report {
  double alpha = 0.0;     // KL(p1 || p)
  double epsilon = 0.0;   // KL(p2 || p)
  double delta1 = 0.0;    // KL(p1^X || p^X)
  double delta2 = 0.0;    // KL(p2^X || p^X)
  double removal_excess = 0.0;       // L(h; p1) - L(h1; p1)
  double preservation_excess = 0.0;  // L(h; p2) - L(h2; p2)
  bool infinite = false;
  /// removal_excess >= alpha - delta1 and preservation_excess <= epsilon - delta2,
  /// both met with equality up to `tolerance`.
  bool holds_with_equality = false;
  double tolerance = 1e-12;
};

inline Prop2Report check_prop2(const FiniteJoint& p1, const FiniteJoint& p2, const FiniteJoint& p,
                               double tolerance = 1e-12) {
  const auto d1 = logloss_decomposition(p1, p);
  const auto d2 = logloss_decomposition(p2, p);
  Prop2Report r;
  r.alpha = d1.joint_kl;
  r.epsilon = d2.joint_kl;
  r.delta1 = d1.marginal_kl;
  r.delta2 = d2.marginal_kl;
  r.removal_excess = d1.excess_loss;
  r.preservation_excess = d2.excess_loss;
  r.infinite = d1.infinite || d2.infinite;
  r.tolerance = tolerance;
  if (!r.infinite) {
    const double scale1 = std::max(1.0, std::abs(r.alpha));
    const double scale2 = std::max(1.0, std::abs(r.epsilon));
    r.holds_with_equality =
        std::abs(r.removal_excess - (r.alpha - r.delta1)) <= tolerance * scale1 &&
        std::abs(r.preservation_excess - (r.epsilon - r.delta2)) <= tolerance * scale2;
  }
  return r;
}

}  // namespace distunlearn
