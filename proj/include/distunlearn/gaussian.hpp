#pragma once

// Shared-covariance Gaussian family: model type, forward KL, pooled refit,
// and the folded-normal CDF g(u; kappa) with its inverse.

#include <algorithm>
#include <cmath>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "distunlearn/normal.hpp"

namespace distunlearn {

/// A Gaussian with a known, fixed covariance. Immutable after construction;
/// the Cholesky factor is computed once and shared between copies.
class GaussianModel {
 public:
  GaussianModel(Eigen::VectorXd mean, Eigen::MatrixXd covariance)
      : mean_(std::move(mean)), covariance_(std::move(covariance)) {
    const auto d = mean_.size();
    if (d < 1) throw std::invalid_argument("GaussianModel: empty mean vector");
    if (covariance_.rows() != d || covariance_.cols() != d) {
      throw std::invalid_argument("GaussianModel: covariance is " +
                                  std::to_string(covariance_.rows()) + "x" +
                                  std::to_string(covariance_.cols()) +
                                  " but mean has dimension " + std::to_string(d));
    }
    if (!mean_.allFinite() || !covariance_.allFinite()) {
      throw std::invalid_argument("GaussianModel: non-finite parameters");
    }
    const double scale = std::max(1.0, covariance_.cwiseAbs().maxCoeff());
    if ((covariance_ - covariance_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      throw std::invalid_argument("GaussianModel: covariance is not symmetric");
    }
    auto llt = std::make_shared<Eigen::LLT<Eigen::MatrixXd>>(covariance_);
    if (llt->info() != Eigen::Success) {
      throw std::invalid_argument("GaussianModel: covariance is not positive definite");
    }
    chol_ = std::move(llt);
  }

  /// Univariate N(mean, variance).
  static GaussianModel univariate(double mean, double variance) {
    return GaussianModel(Eigen::VectorXd::Constant(1, mean),
                         Eigen::MatrixXd::Constant(1, 1, variance));
  }

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& covariance() const { return covariance_; }
  Eigen::Index dimension() const { return mean_.size(); }
  const Eigen::LLT<Eigen::MatrixXd>& cholesky() const { return *chol_; }

  /// Squared Mahalanobis norm (x - mean)^T Sigma^-1 (x - mean).
  double mahalanobis_sq(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd z = chol_->matrixL().solve(x - mean_);
    return z.squaredNorm();
  }

  double log_density(const Eigen::VectorXd& x) const {
    const auto& l = chol_->matrixLLT();
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < l.rows(); ++i) log_det += 2.0 * std::log(l(i, i));
    return -0.5 * (static_cast<double>(dimension()) * std::log(2.0 * std::numbers::pi) +
                   log_det + mahalanobis_sq(x));
  }

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd covariance_;
  std::shared_ptr<const Eigen::LLT<Eigen::MatrixXd>> chol_;
};

/// Forward KL(p || q) for two members of the same shared-covariance family:
/// (mu_p - mu_q)^T Sigma^-1 (mu_p - mu_q) / 2.
inline double kl_gaussian(const GaussianModel& p, const GaussianModel& q) {
  if (p.dimension() != q.dimension()) {
    throw std::invalid_argument("kl_gaussian: dimension mismatch (" +
                                std::to_string(p.dimension()) + " vs " +
                                std::to_string(q.dimension()) + ")");
  }
  if ((p.covariance() - q.covariance()).cwiseAbs().maxCoeff() > 1e-12) {
    throw std::invalid_argument("kl_gaussian: models do not share a covariance");
  }
  return 0.5 * p.mahalanobis_sq(q.mean());
}

/// Refit of the mean on the union of retained p1 samples and all p2 samples,
/// with the covariance held fixed at the family's known value.
inline GaussianModel pooled_mle(std::span<const double> kept_p1,
                                std::span<const double> samples_p2, double variance) {
  const std::size_t n = kept_p1.size() + samples_p2.size();
  if (n == 0) throw std::invalid_argument("pooled_mle: no samples to fit");
  double sum = 0.0;
  for (double x : kept_p1) sum += x;
  for (double x : samples_p2) sum += x;
  return GaussianModel::univariate(sum / static_cast<double>(n), variance);
}

/// Multivariate refit; rows of each matrix are samples.
template <class Derived1, class Derived2>
GaussianModel pooled_mle(const Eigen::MatrixBase<Derived1>& kept_p1,
                         const Eigen::MatrixBase<Derived2>& samples_p2,
                         const Eigen::MatrixXd& covariance) {
  const Eigen::Index n = kept_p1.rows() + samples_p2.rows();
  if (n == 0) throw std::invalid_argument("pooled_mle: no samples to fit");
  const Eigen::Index d = covariance.rows();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
  if (kept_p1.rows() > 0) {
    if (kept_p1.cols() != d) throw std::invalid_argument("pooled_mle: p1 dimension mismatch");
    sum += kept_p1.colwise().sum().transpose();
  }
  if (samples_p2.rows() > 0) {
    if (samples_p2.cols() != d) throw std::invalid_argument("pooled_mle: p2 dimension mismatch");
    sum += samples_p2.colwise().sum().transpose();
  }
  return GaussianModel(sum / static_cast<double>(n), covariance);
}

/// Parameters of the shifted folded normal |X - sqrt(2 kappa)|, X ~ N(0, 1),
/// evaluated at u.
struct FoldedNormalSpec {
  double u = 0.0;
  double kappa = 0.0;
};

/// g(u; kappa) = Phi(u - c) + Phi(u + c) - 1 with c = sqrt(2 kappa); the CDF of
/// |X - c|. Written as a difference of upper tails so g(0; kappa) is exactly 0.
inline double g_folded(double u, double kappa) {
  if (u < 0.0 || kappa < 0.0 || std::isnan(u) || std::isnan(kappa)) {
    throw std::invalid_argument("g_folded: requires u >= 0 and kappa >= 0");
  }
  const double c = std::sqrt(2.0 * kappa);
  return normal_sf(c - u) - normal_sf(c + u);
}

inline double g_folded(const FoldedNormalSpec& s) { return g_folded(s.u, s.kappa); }

/// 1 - g(u; kappa) = Phi(c - u) tail sum, accurate where g rounds to 1.
inline double g_folded_upper(double u, double kappa) {
  if (u < 0.0 || kappa < 0.0 || std::isnan(u) || std::isnan(kappa)) {
    throw std::invalid_argument("g_folded_upper: requires u >= 0 and kappa >= 0");
  }
  const double c = std::sqrt(2.0 * kappa);
  return normal_sf(u - c) + normal_sf(u + c);
}

/// p-th quantile of the folded normal, by bisection on
/// [0, sqrt(2 kappa) + Phi^-1(1 - (1 - p)/4) + 10] down to 1e-12 in u.
inline double g_inverse(double p, double kappa) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("g_inverse: p must lie in (0, 1)");
  }
  if (kappa < 0.0 || std::isnan(kappa)) {
    throw std::invalid_argument("g_inverse: kappa must be non-negative");
  }
  double lo = 0.0;
  double hi = std::sqrt(2.0 * kappa) + normal_quantile(1.0 - (1.0 - p) / 4.0) + 10.0;
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (g_folded(mid, kappa) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace distunlearn
