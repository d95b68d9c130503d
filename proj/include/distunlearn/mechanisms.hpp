#pragma once

// Deletion mechanisms: uniform random removal, the distance-to-p2-mean rule
// for univariate samples, and the scoring-rule library used on feature
// matrices. Every plan deletes the top-f rows under a stable ordering of
// (score descending, index ascending).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "distunlearn/dataset.hpp"
#include "distunlearn/rng.hpp"

namespace distunlearn {

enum class ScoringRule {
  Random,
  SelectiveGaussian,
  CosMu2,
  LrCos,
  KnnRatio,
  Norm,
  MahaMu2,
  LrMaha,
};

inline std::string_view to_string(ScoringRule r) {
  switch (r) {
    case ScoringRule::Random: return "random";
    case ScoringRule::SelectiveGaussian: return "selective-gaussian";
    case ScoringRule::CosMu2: return "cos-mu2";
    case ScoringRule::LrCos: return "lr-cos";
    case ScoringRule::KnnRatio: return "knn-ratio";
    case ScoringRule::Norm: return "norm";
    case ScoringRule::MahaMu2: return "maha-mu2";
    case ScoringRule::LrMaha: return "lr-maha";
  }
  return "unknown";
}

/// Accepts the canonical names plus the aliases tfidf-norm, l2-norm and selective.
inline ScoringRule parse_rule(std::string_view name) {
  if (name == "random") return ScoringRule::Random;
  if (name == "selective-gaussian" || name == "selective") return ScoringRule::SelectiveGaussian;
  if (name == "cos-mu2") return ScoringRule::CosMu2;
  if (name == "lr-cos") return ScoringRule::LrCos;
  if (name == "knn-ratio") return ScoringRule::KnnRatio;
  if (name == "norm" || name == "tfidf-norm" || name == "l2-norm") return ScoringRule::Norm;
  if (name == "maha-mu2") return ScoringRule::MahaMu2;
  if (name == "lr-maha") return ScoringRule::LrMaha;
  throw std::invalid_argument("unknown scoring rule '" + std::string(name) + "'");
}

struct RemovalPlan {
  ScoringRule rule = ScoringRule::Random;
  std::size_t budget_f = 0;
  /// Positions within the p1 partition, in deletion-priority order.
  std::vector<std::size_t> removed_indices;
  std::uint64_t seed = 0;
};

struct ScoredSample {
  std::size_t index = 0;
  double score = 0.0;
};

struct ScoringParams {
  int k = 10;                        // knn-ratio neighbours
  std::optional<double> bandwidth;   // knn-ratio sigma; median pairwise distance if unset
  std::size_t bandwidth_sample_limit = 2000;
  double ridge_scale = 1e-6;         // Mahalanobis ridge = ridge_scale * trace / d
  std::uint64_t seed = 0;            // random rule only
};

struct ScoreResult {
  std::vector<ScoredSample> scores;
  /// p1 rows with zero norm under a cosine rule (scored 0).
  std::vector<std::size_t> zero_norm_rows;
  /// p1 rows whose knn log-ratio was clamped to +-700 to stay finite.
  std::vector<std::size_t> clamped_rows;
  double bandwidth = 0.0;
};

/// Indices of the f largest scores, ties broken by lower index first.
inline std::vector<std::size_t> top_f_indices(std::span<const ScoredSample> scores,
                                              std::size_t f) {
  if (f > scores.size()) throw std::invalid_argument("top_f_indices: budget exceeds rows");
  std::vector<ScoredSample> sorted(scores.begin(), scores.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const ScoredSample& a, const ScoredSample& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.index < b.index;
  });
  std::vector<std::size_t> out;
  out.reserve(f);
  for (std::size_t i = 0; i < f; ++i) out.push_back(sorted[i].index);
  return out;
}

inline RemovalPlan plan_from_scores(std::span<const ScoredSample> scores, std::size_t f,
                                    ScoringRule rule, std::uint64_t seed = 0) {
  return {rule, f, top_f_indices(scores, f), seed};
}

inline RemovalPlan random_removal(std::size_t n1, std::size_t f, std::uint64_t seed) {
  if (f > n1) {
    throw std::invalid_argument("random_removal: budget " + std::to_string(f) +
                                " exceeds n1 = " + std::to_string(n1));
  }
  return {ScoringRule::Random, f, sample_without_replacement(n1, f, seed), seed};
}

/// Scores s_i = |x_i - mean(p2)| for univariate samples.
inline std::vector<ScoredSample> selective_scores(std::span<const double> samples_p1,
                                                  std::span<const double> samples_p2) {
  if (samples_p2.empty()) throw std::invalid_argument("selective removal: p2 sample is empty");
  double mu2 = 0.0;
  for (double x : samples_p2) mu2 += x;
  mu2 /= static_cast<double>(samples_p2.size());
  std::vector<ScoredSample> out(samples_p1.size());
  for (std::size_t i = 0; i < samples_p1.size(); ++i) out[i] = {i, std::abs(samples_p1[i] - mu2)};
  return out;
}

inline RemovalPlan selective_removal_gaussian(std::span<const double> samples_p1,
                                              std::span<const double> samples_p2,
                                              std::size_t f) {
  if (f > samples_p1.size()) {
    throw std::invalid_argument("selective_removal_gaussian: budget exceeds p1 size");
  }
  const auto scores = selective_scores(samples_p1, samples_p2);
  return plan_from_scores(scores, f, ScoringRule::SelectiveGaussian);
}

namespace detail {

template <class M>
inline constexpr bool is_sparse_v = std::is_base_of_v<Eigen::SparseMatrixBase<M>, M>;

template <class M>
Eigen::VectorXd column_mean(const M& x) {
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(x.rows());
  return Eigen::VectorXd(x.transpose() * ones) / static_cast<double>(x.rows());
}

template <class M>
Eigen::VectorXd row_sq_norms(const M& x) {
  Eigen::VectorXd out(x.rows());
  if constexpr (is_sparse_v<M>) {
    for (Eigen::Index i = 0; i < x.outerSize(); ++i) {
      double s = 0.0;
      for (typename M::InnerIterator it(x, i); it; ++it) s += it.value() * it.value();
      out(i) = s;
    }
  } else {
    out = x.rowwise().squaredNorm();
  }
  return out;
}

/// Dense Gram matrix a * b^T.
template <class M>
DenseMatrix gram(const M& a, const M& b) {
  if constexpr (is_sparse_v<M>) {
    const SparseMatrix bt = b.transpose();
    const SparseMatrix prod = (a * bt).pruned();
    return DenseMatrix(prod);
  } else {
    return a * b.transpose();
  }
}

template <class M>
DenseMatrix pairwise_sq_dist(const M& a, const M& b) {
  const Eigen::VectorXd na = row_sq_norms(a);
  const Eigen::VectorXd nb = row_sq_norms(b);
  DenseMatrix d = gram(a, b);
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
      d(i, j) = std::max(0.0, na(i) + nb(j) - 2.0 * d(i, j));
    }
  }
  return d;
}

/// Cosine distance 1 - <x, mu> / (|x| |mu|); zero rows get 0 and are recorded.
template <class M>
Eigen::VectorXd cosine_distance(const M& x, const Eigen::VectorXd& mu,
                                std::vector<std::size_t>* zero_rows) {
  const double mu_norm = mu.norm();
  if (mu_norm == 0.0) throw std::invalid_argument("cosine rule: reference mean vector is zero");
  const Eigen::VectorXd dots = x * mu;
  const Eigen::VectorXd norms = row_sq_norms(x).cwiseSqrt();
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (norms(i) == 0.0) {
      out(i) = 0.0;
      if (zero_rows) zero_rows->push_back(static_cast<std::size_t>(i));
    } else {
      out(i) = 1.0 - dots(i) / (norms(i) * mu_norm);
    }
  }
  return out;
}

template <class M>
Eigen::VectorXd euclidean_distance(const M& x, const Eigen::VectorXd& mu) {
  if constexpr (is_sparse_v<M>) {
    const Eigen::VectorXd dots = x * mu;
    const Eigen::VectorXd norms = row_sq_norms(x);
    const double mu_sq = mu.squaredNorm();
    Eigen::VectorXd out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      out(i) = std::sqrt(std::max(0.0, norms(i) - 2.0 * dots(i) + mu_sq));
    }
    return out;
  } else {
    return (x.rowwise() - mu.transpose()).rowwise().norm();
  }
}

inline double median_of(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty set");
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double m = *mid;
  if (v.size() % 2 == 0) {
    const double lower = *std::max_element(v.begin(), mid);
    m = 0.5 * (m + lower);
  }
  return m;
}

/// Median pairwise Euclidean distance over p1 and p2 rows. Above `limit`
/// pooled rows an evenly strided subset of `limit` rows is used.
template <class M>
double median_pairwise_distance(const M& p1, const M& p2, std::size_t limit) {
  const std::size_t n = static_cast<std::size_t>(p1.rows() + p2.rows());
  std::vector<std::size_t> pick;
  if (n <= limit || limit < 2) {
    pick.resize(n);
    std::iota(pick.begin(), pick.end(), 0);
  } else {
    for (std::size_t i = 0; i < limit; ++i) pick.push_back(i * n / limit);
  }
  std::vector<std::size_t> from1, from2;
  for (std::size_t r : pick) {
    if (r < static_cast<std::size_t>(p1.rows())) {
      from1.push_back(r);
    } else {
      from2.push_back(r - static_cast<std::size_t>(p1.rows()));
    }
  }
  M pooled;
  {
    const M a = select_rows(p1, from1);
    const M b = select_rows(p2, from2);
    if constexpr (is_sparse_v<M>) {
      std::vector<Eigen::Triplet<double>> t;
      for (Eigen::Index i = 0; i < a.outerSize(); ++i)
        for (typename M::InnerIterator it(a, i); it; ++it) t.emplace_back(i, it.col(), it.value());
      for (Eigen::Index i = 0; i < b.outerSize(); ++i)
        for (typename M::InnerIterator it(b, i); it; ++it)
          t.emplace_back(a.rows() + i, it.col(), it.value());
      pooled.resize(a.rows() + b.rows(), p1.cols());
      pooled.setFromTriplets(t.begin(), t.end());
    } else {
      pooled.resize(a.rows() + b.rows(), p1.cols());
      pooled << a, b;
    }
  }
  const DenseMatrix d = pairwise_sq_dist(pooled, pooled);
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(d.rows() * (d.rows() - 1) / 2));
  for (Eigen::Index i = 0; i < d.rows(); ++i)
    for (Eigen::Index j = i + 1; j < d.cols(); ++j) dist.push_back(std::sqrt(d(i, j)));
  if (dist.empty()) throw std::invalid_argument("knn-ratio: need at least two rows for bandwidth");
  return median_of(std::move(dist));
}

/// Squared distance from each query row to its k-th nearest row in `pool`,
/// optionally skipping the pool row with the same index (self-match).
inline Eigen::VectorXd kth_neighbor_sq_dist(const DenseMatrix& sq_dist, int k, bool skip_self) {
  Eigen::VectorXd out(sq_dist.rows());
  std::vector<double> row;
  for (Eigen::Index i = 0; i < sq_dist.rows(); ++i) {
    row.clear();
    for (Eigen::Index j = 0; j < sq_dist.cols(); ++j) {
      if (skip_self && i == j) continue;
      row.push_back(sq_dist(i, j));
    }
    const auto kth = row.begin() + (k - 1);
    std::nth_element(row.begin(), kth, row.end());
    out(i) = *kth;
  }
  return out;
}

struct MahalanobisReference {
  Eigen::LLT<Eigen::MatrixXd> chol;
  Eigen::VectorXd mu2;
};

inline MahalanobisReference fit_mahalanobis(const DenseMatrix& p2, double ridge_scale) {
  if (p2.rows() < 2) throw std::invalid_argument("Mahalanobis rule: need at least two p2 rows");
  MahalanobisReference ref;
  ref.mu2 = p2.colwise().mean().transpose();
  const DenseMatrix centered = p2.rowwise() - ref.mu2.transpose();
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(p2.rows() - 1);
  const double d = static_cast<double>(cov.rows());
  const double ridge = ridge_scale * cov.trace() / d;
  cov.diagonal().array() += ridge;
  ref.chol.compute(cov);
  if (ref.chol.info() != Eigen::Success || !(ridge > 0.0)) {
    throw std::invalid_argument("Mahalanobis rule: p2 covariance is singular after ridge");
  }
  return ref;
}

inline Eigen::VectorXd mahalanobis_distance(const DenseMatrix& x, const Eigen::VectorXd& mu,
                                            const Eigen::LLT<Eigen::MatrixXd>& chol) {
  Eigen::MatrixXd diff = (x.rowwise() - mu.transpose()).transpose();
  chol.matrixL().solveInPlace(diff);
  return diff.colwise().norm().transpose();
}

}  // namespace detail

/// One score per p1 row; larger score = higher deletion priority.
template <class M>
ScoreResult score_features(const M& p1, const M& p2, ScoringRule rule,
                           const ScoringParams& params = {}) {
  if (p1.rows() == 0) throw std::invalid_argument("score_features: p1 has no rows");
  if (p2.rows() > 0 && p2.cols() != p1.cols()) {
    throw std::invalid_argument("score_features: p1 and p2 feature dimensions differ");
  }
  const bool needs_p2 = rule != ScoringRule::Random && rule != ScoringRule::Norm;
  if (needs_p2 && p2.rows() == 0) {
    throw std::invalid_argument("score_features: rule '" + std::string(to_string(rule)) +
                                "' needs p2 rows");
  }
  ScoreResult result;
  Eigen::VectorXd s(p1.rows());
  switch (rule) {
    case ScoringRule::Random: {
      Rng rng(params.seed);
      for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = rng.uniform01();
      break;
    }
    case ScoringRule::Norm:
      s = detail::row_sq_norms(p1).cwiseSqrt();
      break;
    case ScoringRule::SelectiveGaussian:
      s = detail::euclidean_distance(p1, detail::column_mean(p2));
      break;
    case ScoringRule::CosMu2:
      s = detail::cosine_distance(p1, detail::column_mean(p2), &result.zero_norm_rows);
      break;
    case ScoringRule::LrCos: {
      const Eigen::VectorXd d2 =
          detail::cosine_distance(p1, detail::column_mean(p2), &result.zero_norm_rows);
      const Eigen::VectorXd d1 = detail::cosine_distance(p1, detail::column_mean(p1), nullptr);
      s = d2 - d1;
      break;
    }
    case ScoringRule::MahaMu2:
    case ScoringRule::LrMaha: {
      if constexpr (detail::is_sparse_v<M>) {
        throw std::invalid_argument("Mahalanobis rules need dense features");
      } else {
        const auto ref = detail::fit_mahalanobis(p2, params.ridge_scale);
        s = detail::mahalanobis_distance(p1, ref.mu2, ref.chol);
        if (rule == ScoringRule::LrMaha) {
          const Eigen::VectorXd mu1 = p1.colwise().mean().transpose();
          s -= detail::mahalanobis_distance(p1, mu1, ref.chol);
        }
      }
      break;
    }
    case ScoringRule::KnnRatio: {
      const int k = params.k;
      if (k < 1 || k > p1.rows() - 1 || k > p2.rows()) {
        throw std::invalid_argument("knn-ratio: k = " + std::to_string(k) +
                                    " out of range for |p1| - 1 = " +
                                    std::to_string(p1.rows() - 1) +
                                    ", |p2| = " + std::to_string(p2.rows()));
      }
      const double sigma = params.bandwidth.value_or(
          detail::median_pairwise_distance(p1, p2, params.bandwidth_sample_limit));
      if (!(sigma > 0.0)) throw std::invalid_argument("knn-ratio: bandwidth must be positive");
      result.bandwidth = sigma;
      const Eigen::VectorXd d1 = detail::kth_neighbor_sq_dist(detail::pairwise_sq_dist(p1, p1), k, true);
      const Eigen::VectorXd d2 = detail::kth_neighbor_sq_dist(detail::pairwise_sq_dist(p1, p2), k, false);
      const double s2 = sigma * sigma;
      for (Eigen::Index i = 0; i < s.size(); ++i) {
        double log_ratio = (d2(i) - d1(i)) / s2;
        if (std::abs(log_ratio) > 700.0) {
          log_ratio = std::copysign(700.0, log_ratio);
          result.clamped_rows.push_back(static_cast<std::size_t>(i));
        }
        s(i) = std::exp(log_ratio);
      }
      break;
    }
  }
  result.scores.resize(static_cast<std::size_t>(p1.rows()));
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (!std::isfinite(s(i))) {
      throw std::runtime_error("score_features: non-finite score at p1 row " + std::to_string(i));
    }
    result.scores[static_cast<std::size_t>(i)] = {static_cast<std::size_t>(i), s(i)};
  }
  return result;
}

/// Removes the planned p1 rows; p2 rows and the order of survivors are kept.
template <class Matrix>
BasicDataset<Matrix> apply_plan(const BasicDataset<Matrix>& ds, const RemovalPlan& plan) {
  const auto p1_rows = ds.rows_of(Group::P1);
  std::vector<char> drop(ds.size(), 0);
  for (std::size_t idx : plan.removed_indices) {
    if (idx >= p1_rows.size()) {
      throw std::out_of_range("apply_plan: p1 index " + std::to_string(idx) +
                              " out of range (n1 = " + std::to_string(p1_rows.size()) + ")");
    }
    drop[p1_rows[idx]] = 1;
  }
  std::vector<std::size_t> keep;
  keep.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (!drop[i]) keep.push_back(i);
  return subset(ds, keep);
}

}  // namespace distunlearn
