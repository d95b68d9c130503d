#pragma once

// L2-regularized logistic regression trained by deterministic full-batch
// accelerated gradient descent, and the evaluation metrics used on the
// forget / preserve test slices.
//
// Objective: mean_i loss_i(W, b) + (l2 / 2) ||W||_F^2, bias unregularized.
// Binary problems use one weight row with the sigmoid; K > 2 classes use K
// rows with the softmax.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "distunlearn/dataset.hpp"

namespace distunlearn {

struct TrainingMeta {
  std::uint64_t seed = 0;
  int iterations = 0;
  double final_objective = 0.0;
  double gradient_norm = 0.0;
  bool converged = false;
  /// Objective after each accepted iteration, starting with the initial point.
  std::vector<double> objective_history;
};

struct ClassifierModel {
  Eigen::MatrixXd weights;  // 1 x d (binary) or K x d
  Eigen::VectorXd bias;     // 1 or K
  int num_classes = 2;
  double l2_strength = 1.0;
  TrainingMeta meta;

  bool binary() const { return num_classes == 2; }

  /// n x K class probabilities.
  template <class M>
  Eigen::MatrixXd predict_proba(const M& x) const;

  template <class M>
  std::vector<int> predict(const M& x) const {
    const Eigen::MatrixXd p = predict_proba(x);
    std::vector<int> out(static_cast<std::size_t>(p.rows()));
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      Eigen::Index best = 0;
      for (Eigen::Index c = 1; c < p.cols(); ++c)
        if (p(i, c) > p(i, best)) best = c;
      out[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return out;
  }
};

namespace detail {

inline double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

inline double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

/// Scores X W^T + b, n x rows(W).
template <class M>
Eigen::MatrixXd linear_scores(const M& x, const Eigen::MatrixXd& w, const Eigen::VectorXd& b) {
  Eigen::MatrixXd z = x * w.transpose();
  z.rowwise() += b.transpose();
  return z;
}

}  // namespace detail

template <class M>
Eigen::MatrixXd ClassifierModel::predict_proba(const M& x) const {
  if (x.cols() != weights.cols()) throw std::invalid_argument("predict: feature dimension mismatch");
  const Eigen::MatrixXd z = detail::linear_scores(x, weights, bias);
  Eigen::MatrixXd p(z.rows(), num_classes);
  if (binary()) {
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      p(i, 1) = detail::sigmoid(z(i, 0));
      p(i, 0) = detail::sigmoid(-z(i, 0));
    }
  } else {
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      const double m = z.row(i).maxCoeff();
      const Eigen::RowVectorXd e = (z.row(i).array() - m).exp();
      p.row(i) = e / e.sum();
    }
  }
  return p;
}

struct ObjectiveEval {
  double value = 0.0;
  Eigen::MatrixXd grad_w;
  Eigen::VectorXd grad_b;
  double grad_norm() const {
    return std::sqrt(grad_w.squaredNorm() + grad_b.squaredNorm());
  }
};

/// Mean log-loss + (l2 / 2) ||w||^2 and its gradient.
template <class M>
ObjectiveEval logistic_objective(const M& x, const std::vector<int>& y, int num_classes,
                                 const Eigen::MatrixXd& w, const Eigen::VectorXd& b, double l2) {
  const Eigen::Index n = x.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  const Eigen::MatrixXd z = detail::linear_scores(x, w, b);
  Eigen::MatrixXd r(z.rows(), z.cols());
  double loss = 0.0;
  if (num_classes == 2) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double zi = z(i, 0);
      const bool pos = y[static_cast<std::size_t>(i)] == 1;
      loss += detail::softplus(pos ? -zi : zi);
      r(i, 0) = detail::sigmoid(zi) - (pos ? 1.0 : 0.0);
    }
  } else {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double m = z.row(i).maxCoeff();
      const Eigen::RowVectorXd e = (z.row(i).array() - m).exp();
      const double s = e.sum();
      const int yi = y[static_cast<std::size_t>(i)];
      loss += m + std::log(s) - z(i, yi);
      r.row(i) = e / s;
      r(i, yi) -= 1.0;
    }
  }
  ObjectiveEval out;
  out.value = loss * inv_n + 0.5 * l2 * w.squaredNorm();
  out.grad_w = (x.transpose() * r).transpose() * inv_n + l2 * w;
  out.grad_b = r.colwise().sum().transpose() * inv_n;
  return out;
}

namespace detail {

/// Largest eigenvalue of [X 1]^T [X 1] / n by power iteration from a fixed
/// start; a starting guess for the Lipschitz constant.
template <class M>
double gram_power_estimate(const M& x) {
  const Eigen::Index d = x.cols();
  const double inv_n = 1.0 / static_cast<double>(x.rows());
  Eigen::VectorXd v = Eigen::VectorXd::Ones(d + 1) / std::sqrt(static_cast<double>(d + 1));
  double lambda = 1.0;
  for (int it = 0; it < 30; ++it) {
    Eigen::VectorXd xv = x * v.head(d);
    xv.array() += v(d);
    Eigen::VectorXd next(d + 1);
    next.head(d) = x.transpose() * xv * inv_n;
    next(d) = xv.sum() * inv_n;
    lambda = next.norm();
    if (!(lambda > 0.0)) return 1.0;
    v = next / lambda;
  }
  return lambda;
}

}  // namespace detail

/// Trains from the zero initialization with FISTA (backtracking step, restart
/// whenever the objective would rise), so the recorded objective is
/// non-increasing. Stops when the gradient norm falls to `tol` or after
/// `max_iter` iterations. The seed is recorded; training itself draws no
/// random numbers.
template <class Matrix>
ClassifierModel train_logistic(const BasicDataset<Matrix>& train, double l2_strength,
                               std::uint64_t seed = 0, int max_iter = 1000, double tol = 1e-6) {
  if (!(l2_strength > 0.0)) throw std::invalid_argument("train_logistic: l2_strength must be > 0");
  if (train.size() == 0) throw std::invalid_argument("train_logistic: empty training set");
  if (train.num_classes < 2) throw std::invalid_argument("train_logistic: need >= 2 classes");
  std::set<int> present(train.labels.begin(), train.labels.end());
  if (present.size() < 2) {
    throw std::invalid_argument("train_logistic: training set contains a single class");
  }
  for (int label : present) {
    if (label < 0 || label >= train.num_classes) {
      throw std::invalid_argument("train_logistic: label out of range");
    }
  }
  const auto& x = train.features;
  if constexpr (std::is_base_of_v<Eigen::SparseMatrixBase<Matrix>, Matrix>) {
    for (Eigen::Index k = 0; k < x.outerSize(); ++k)
      for (typename Matrix::InnerIterator it(x, k); it; ++it)
        if (!std::isfinite(it.value())) throw std::invalid_argument("train_logistic: non-finite feature");
  } else {
    if (!x.allFinite()) throw std::invalid_argument("train_logistic: non-finite feature");
  }

  const int rows = train.num_classes == 2 ? 1 : train.num_classes;
  const Eigen::Index d = x.cols();
  const auto& y = train.labels;
  const double curvature = train.num_classes == 2 ? 0.25 : 0.5;
  double lip = curvature * detail::gram_power_estimate(x) + l2_strength;

  ClassifierModel model;
  model.num_classes = train.num_classes;
  model.l2_strength = l2_strength;
  model.meta.seed = seed;

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(rows, d);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(rows);
  Eigen::MatrixXd yw = w;
  Eigen::VectorXd yb = b;
  double t = 1.0;
  ObjectiveEval at_x = logistic_objective(x, y, train.num_classes, w, b, l2_strength);
  model.meta.objective_history.push_back(at_x.value);

  int iter = 0;
  bool converged = at_x.grad_norm() <= tol;
  while (!converged && iter < max_iter) {
    const ObjectiveEval at_y = logistic_objective(x, y, train.num_classes, yw, yb, l2_strength);
    const double g2 = at_y.grad_w.squaredNorm() + at_y.grad_b.squaredNorm();
    Eigen::MatrixXd nw;
    Eigen::VectorXd nb;
    ObjectiveEval at_new;
    for (int bt = 0; bt < 60; ++bt) {
      nw = yw - at_y.grad_w / lip;
      nb = yb - at_y.grad_b / lip;
      at_new = logistic_objective(x, y, train.num_classes, nw, nb, l2_strength);
      if (at_new.value <= at_y.value - 0.5 * g2 / lip + 1e-15 * std::abs(at_y.value)) break;
      lip *= 2.0;
    }
    ++iter;
    if (at_new.value > at_x.value) {
      // Momentum overshot: restart from the current iterate.
      if (yw == w && yb == b) {
        // A plain gradient step from x failed to descend; numerically stuck.
        break;
      }
      yw = w;
      yb = b;
      t = 1.0;
      continue;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double mom = (t - 1.0) / t_next;
    yw = nw + mom * (nw - w);
    yb = nb + mom * (nb - b);
    w = std::move(nw);
    b = std::move(nb);
    t = t_next;
    at_x = std::move(at_new);
    model.meta.objective_history.push_back(at_x.value);
    converged = at_x.grad_norm() <= tol;
  }
  model.weights = std::move(w);
  model.bias = std::move(b);
  model.meta.iterations = iter;
  model.meta.final_objective = at_x.value;
  model.meta.gradient_norm = at_x.grad_norm();
  model.meta.converged = converged;
  return model;
}

enum class RecallMode {
  /// Positives are p1-slice rows whose label is the positive label.
  Label,
  /// Positives are all p1-slice rows; a hit is a prediction of the positive label.
  Group,
};

struct EvalOptions {
  RecallMode recall_mode = RecallMode::Label;
  int positive_label = 1;
};

struct Metrics {
  /// Undefined (nullopt) when the p1 slice has no positives.
  std::optional<double> recall_p1;
  /// Undefined when the p2 slice is empty.
  std::optional<double> macro_f1_p2;
  std::map<int, double> accuracy_per_class;
  double logloss = 0.0;
  std::size_t n_p1 = 0;
  std::size_t n_p2 = 0;
};

/// Unweighted mean of per-class F1 over the labels that occur in either the
/// truth or the predictions.
inline double macro_f1(const std::vector<int>& truth, const std::vector<int>& pred) {
  if (truth.size() != pred.size()) throw std::invalid_argument("macro_f1: length mismatch");
  std::map<int, std::size_t> tp, fp, fn;
  std::set<int> labels;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    labels.insert(truth[i]);
    labels.insert(pred[i]);
    if (truth[i] == pred[i]) {
      ++tp[truth[i]];
    } else {
      ++fp[pred[i]];
      ++fn[truth[i]];
    }
  }
  if (labels.empty()) return 0.0;
  double sum = 0.0;
  for (int c : labels) {
    const double denom = 2.0 * tp[c] + fp[c] + fn[c];
    sum += denom > 0.0 ? 2.0 * tp[c] / denom : 0.0;
  }
  return sum / static_cast<double>(labels.size());
}

template <class Matrix>
Metrics evaluate(const ClassifierModel& model, const BasicDataset<Matrix>& test,
                 const EvalOptions& options = {}) {
  if (test.size() == 0) throw std::invalid_argument("evaluate: empty test set");
  const Eigen::MatrixXd proba = model.predict_proba(test.features);
  std::vector<int> pred(test.size());
  for (Eigen::Index i = 0; i < proba.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < proba.cols(); ++c)
      if (proba(i, c) > proba(i, best)) best = c;
    pred[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }

  Metrics m;
  double loss = 0.0;
  std::map<int, std::pair<std::size_t, std::size_t>> per_class;  // hits, total
  std::size_t pos = 0, hits = 0;
  std::vector<int> t2, p2;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const int yi = test.labels[i];
    const double pi = proba(static_cast<Eigen::Index>(i), yi);
    loss += pi > 0.0 ? -std::log(pi) : std::numeric_limits<double>::infinity();
    auto& pc = per_class[yi];
    pc.first += pred[i] == yi;
    ++pc.second;
    if (test.groups[i] == Group::P1) {
      ++m.n_p1;
      const bool multiclass = model.num_classes > 2;
      if (options.recall_mode == RecallMode::Group) {
        ++pos;
        hits += pred[i] == options.positive_label;
      } else if (multiclass) {
        ++pos;
        hits += pred[i] == yi;
      } else if (yi == options.positive_label) {
        ++pos;
        hits += pred[i] == yi;
      }
    } else {
      ++m.n_p2;
      t2.push_back(yi);
      p2.push_back(pred[i]);
    }
  }
  m.logloss = loss / static_cast<double>(test.size());
  for (const auto& [c, hc] : per_class) {
    m.accuracy_per_class[c] = static_cast<double>(hc.first) / static_cast<double>(hc.second);
  }
  if (pos > 0) m.recall_p1 = static_cast<double>(hits) / static_cast<double>(pos);
  if (!t2.empty()) m.macro_f1_p2 = macro_f1(t2, p2);
  return m;
}

}  // namespace distunlearn
