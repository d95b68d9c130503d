#pragma once

// Budget sweeps over (rule x budget fraction x seed), their summaries, and the
// half-target budget / saving computations.
//
// Sub-seeds are pure functions of the master seed (see rng.hpp for derive_seed):
//   data       derive_seed(master, "data", seed)                    Gaussian samples
//   split      derive_seed(master, "split", seed)                   train/validation split
//   plan       derive_seed(master, "plan", rule, seed)              random scores
//   downsample derive_seed(master, "downsample", seed, budget_idx)  p2 subsample
//   train      derive_seed(master, "train", rule, seed, budget_idx) recorded on the model
// where `seed` is the value from the seed list, `rule` the canonical rule name
// and budget_idx the position in the budget grid. The split and the p2
// subsample do not depend on the rule, so every rule sees the same data at a
// given (seed, budget).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "distunlearn/dataset.hpp"
#include "distunlearn/emit.hpp"
#include "distunlearn/gaussian.hpp"
#include "distunlearn/io.hpp"
#include "distunlearn/logistic.hpp"
#include "distunlearn/mechanisms.hpp"
#include "distunlearn/rng.hpp"
#include "distunlearn/split.hpp"
#include "distunlearn/tfidf.hpp"

namespace distunlearn {

/// DISTUNLEARN_WORKERS if set to a positive integer, else the hardware thread count.
inline unsigned worker_count() {
  if (const char* env = std::getenv("DISTUNLEARN_WORKERS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(0..n-1) on a bounded pool. fn must not throw.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn, unsigned workers = worker_count()) {
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

struct SweepConfig {
  std::vector<std::string> rules;
  std::vector<double> budget_fractions;
  std::vector<std::uint64_t> seeds;
  std::uint64_t master_seed = 0;
  ScoringParams scoring;
  /// Metrics kept in the output; empty keeps every metric the sweep produces.
  std::vector<std::string> metrics;
  std::string output;
  OutputFormat format = OutputFormat::Csv;

  void validate() const {
    if (rules.empty()) throw std::invalid_argument("sweep: at least one rule is required");
    if (seeds.empty()) throw std::invalid_argument("sweep: at least one seed is required");
    if (budget_fractions.empty()) throw std::invalid_argument("sweep: empty budget grid");
    for (const auto& r : rules) parse_rule(r);
    for (std::size_t i = 0; i < budget_fractions.size(); ++i) {
      const double b = budget_fractions[i];
      if (!(b >= 0.0 && b <= 1.0)) throw std::invalid_argument("sweep: budget fractions must lie in [0, 1]");
      if (i > 0 && !(b > budget_fractions[i - 1])) {
        throw std::invalid_argument("sweep: budget fractions must be strictly ascending");
      }
    }
  }
};

struct SweepRow {
  std::string rule;
  std::size_t budget_index = 0;
  double budget_fraction = 0.0;
  std::uint64_t seed = 0;
  std::size_t removed = 0;
  bool failed = false;
  std::string failure;
  /// Missing or NaN entries are undefined metrics.
  std::map<std::string, double> metrics;
};

struct CellSummary {
  std::string rule;
  std::size_t budget_index = 0;
  double budget_fraction = 0.0;
  std::string metric;
  double mean = std::numeric_limits<double>::quiet_NaN();
  /// Sample standard deviation / sqrt(count); NaN with fewer than two values.
  double std_error = std::numeric_limits<double>::quiet_NaN();
  std::size_t count = 0;     // seeds with a defined value
  std::size_t failed = 0;    // seeds whose cell failed
  std::size_t undefined = 0; // seeds that ran but left the metric undefined
};

struct SweepResult {
  std::vector<std::string> rules;
  std::vector<double> budgets;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> metric_names;
  /// Ordered by rule, then budget, then seed.
  std::vector<SweepRow> rows;

  std::size_t failed_count() const {
    return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const SweepRow& r) { return r.failed; }));
  }

  CellSummary summarize_cell(const std::string& rule, std::size_t budget_index, const std::string& metric) const {
    CellSummary c;
    c.rule = rule;
    c.budget_index = budget_index;
    c.budget_fraction = budgets.at(budget_index);
    c.metric = metric;
    std::vector<double> vals;
    for (const auto& r : rows) {
      if (r.rule != rule || r.budget_index != budget_index) continue;
      if (r.failed) {
        ++c.failed;
        continue;
      }
      const auto it = r.metrics.find(metric);
      if (it == r.metrics.end() || std::isnan(it->second)) {
        ++c.undefined;
        continue;
      }
      vals.push_back(it->second);
    }
    c.count = vals.size();
    if (!vals.empty()) {
      double sum = 0.0;
      for (double v : vals) sum += v;
      c.mean = sum / static_cast<double>(vals.size());
      if (vals.size() >= 2) {
        double ss = 0.0;
        for (double v : vals) ss += (v - c.mean) * (v - c.mean);
        c.std_error = std::sqrt(ss / static_cast<double>(vals.size() - 1)) / std::sqrt(static_cast<double>(vals.size()));
      }
    }
    return c;
  }

  std::vector<CellSummary> summarize() const {
    std::vector<CellSummary> out;
    for (const auto& rule : rules)
      for (std::size_t b = 0; b < budgets.size(); ++b)
        for (const auto& m : metric_names) out.push_back(summarize_cell(rule, b, m));
    return out;
  }

  /// One line per (rule, budget, seed); metric columns follow metric_names.
  Table rows_table() const {
    Table t;
    t.columns = {"rule", "budget_fraction", "budget_index", "seed", "removed", "status", "failure"};
    t.columns.insert(t.columns.end(), metric_names.begin(), metric_names.end());
    for (const auto& r : rows) {
      std::vector<Cell> row = {r.rule, r.budget_fraction, static_cast<std::int64_t>(r.budget_index),
                               static_cast<std::int64_t>(r.seed), static_cast<std::int64_t>(r.removed),
                               std::string(r.failed ? "failed" : "ok"), r.failure};
      for (const auto& m : metric_names) {
        const auto it = r.metrics.find(m);
        if (r.failed || it == r.metrics.end() || std::isnan(it->second)) {
          row.emplace_back(std::monostate{});
        } else {
          row.emplace_back(it->second);
        }
      }
      t.add_row(std::move(row));
    }
    return t;
  }

  Table summary_table() const {
    Table t;
    t.columns = {"rule", "budget_fraction", "metric", "mean", "std_error", "n", "n_failed", "n_undefined"};
    for (const auto& c : summarize()) {
      t.add_row({c.rule, c.budget_fraction, c.metric, c.count ? Cell{c.mean} : Cell{},
                 c.count >= 2 ? Cell{c.std_error} : Cell{}, static_cast<std::int64_t>(c.count),
                 static_cast<std::int64_t>(c.failed), static_cast<std::int64_t>(c.undefined)});
    }
    return t;
  }
};

namespace detail {

inline std::size_t budget_count(double fraction, std::size_t n) {
  return std::min<std::size_t>(n, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))));
}

inline void keep_metrics(SweepResult& result, const std::vector<std::string>& wanted) {
  if (wanted.empty()) return;
  for (const auto& m : wanted) {
    if (std::find(result.metric_names.begin(), result.metric_names.end(), m) == result.metric_names.end()) {
      throw std::invalid_argument("sweep: unknown metric '" + m + "'");
    }
  }
  result.metric_names = wanted;
  for (auto& r : result.rows) {
    std::map<std::string, double> kept;
    for (const auto& m : wanted) {
      if (auto it = r.metrics.find(m); it != r.metrics.end()) kept.insert(*it);
    }
    r.metrics = std::move(kept);
  }
}

inline SweepResult empty_result(const SweepConfig& config) {
  SweepResult res;
  res.rules.clear();
  for (const auto& r : config.rules) res.rules.emplace_back(to_string(parse_rule(r)));
  res.budgets = config.budget_fractions;
  res.seeds = config.seeds;
  return res;
}

}  // namespace detail

/// p1 = N(0, 1) with n1 samples, p2 = N(mu2, 1) with n2 samples, refit N(mu_hat, 1)
/// on the retained data. Metrics: alpha = KL(p1 || p_hat), epsilon = KL(p2 || p_hat),
/// mu_hat. Rules: random and selective-gaussian.
inline SweepResult run_gaussian_sweep(double mu2, std::size_t n1, std::size_t n2, const SweepConfig& config) {
  config.validate();
  if (!std::isfinite(mu2)) throw std::invalid_argument("gaussian sweep: mu2 must be finite");
  if (n1 == 0 || n2 == 0) throw std::invalid_argument("gaussian sweep: n1 and n2 must be positive");
  SweepResult res = detail::empty_result(config);
  for (const auto& r : res.rules) {
    const auto rule = parse_rule(r);
    if (rule != ScoringRule::Random && rule != ScoringRule::SelectiveGaussian) {
      throw std::invalid_argument("gaussian sweep: rule '" + r + "' needs feature data; use random or selective-gaussian");
    }
  }
  res.metric_names = {"alpha", "epsilon", "mu_hat"};
  const std::size_t nb = res.budgets.size(), ns = res.seeds.size();
  res.rows.resize(res.rules.size() * nb * ns);
  const GaussianModel p1 = GaussianModel::univariate(0.0, 1.0);
  const GaussianModel p2 = GaussianModel::univariate(mu2, 1.0);

  parallel_for(ns * res.rules.size(), [&](std::size_t task) {
    const std::size_t ri = task / ns, si = task % ns;
    const std::string& rule_name = res.rules[ri];
    const auto seed = res.seeds[si];
    Rng rng(derive_seed(config.master_seed, "data", seed));
    std::vector<double> x1(n1), x2(n2);
    for (auto& v : x1) v = rng.normal(0.0, 1.0);
    for (auto& v : x2) v = rng.normal(mu2, 1.0);
    // deletion order over all of p1; each budget removes a prefix
    std::vector<std::size_t> order;
    if (parse_rule(rule_name) == ScoringRule::Random) {
      order = sample_without_replacement(n1, n1, derive_seed(config.master_seed, "plan", rule_name, seed));
    } else {
      order = top_f_indices(selective_scores(x1, x2), n1);
    }
    std::vector<char> removed(n1, 0);
    std::size_t done = 0;
    for (std::size_t b = 0; b < nb; ++b) {
      SweepRow& row = res.rows[(ri * nb + b) * ns + si];
      row.rule = rule_name;
      row.budget_index = b;
      row.budget_fraction = res.budgets[b];
      row.seed = seed;
      const std::size_t f = detail::budget_count(res.budgets[b], n1);
      for (; done < f; ++done) removed[order[done]] = 1;
      row.removed = f;
      std::vector<double> kept;
      kept.reserve(n1 - f);
      for (std::size_t i = 0; i < n1; ++i)
        if (!removed[i]) kept.push_back(x1[i]);
      const auto fit = pooled_mle(kept, x2, 1.0);
      row.metrics["alpha"] = kl_gaussian(p1, fit);
      row.metrics["epsilon"] = kl_gaussian(p2, fit);
      row.metrics["mu_hat"] = fit.mean()(0);
    }
  });
  detail::keep_metrics(res, config.metrics);
  return res;
}

struct PipelineConfig {
  double train_fraction = 0.7;
  /// p2 kept at ratio x (remaining p1) after deletion; 0 disables downsampling.
  double downsample_ratio = 0.0;
  /// Unset: 1 / (number of training rows), i.e. unit weight on the summed loss.
  std::optional<double> l2_strength;
  int max_iter = 1000;
  double tol = 1e-6;
  EvalOptions eval;
};

/// Metric columns of run_dataset_sweep for a dataset with `classes` labels.
inline std::vector<std::string> dataset_metric_names(int classes) {
  std::vector<std::string> names = {"recall_p1", "macro_f1_p2", "logloss"};
  for (int k = 0; k < classes; ++k) names.push_back("accuracy_class_" + std::to_string(k));
  names.insert(names.end(), {"train_rows", "converged"});
  return names;
}

/// Split, score the p1 training rows, delete, downsample p2, train, evaluate on
/// the validation split. Cells that throw are recorded as failed.
template <class Matrix>
SweepResult run_dataset_sweep(const BasicDataset<Matrix>& data, const PipelineConfig& pipeline,
                              const SweepConfig& config) {
  config.validate();
  data.validate();
  if (!(pipeline.train_fraction > 0.0 && pipeline.train_fraction < 1.0)) {
    throw std::invalid_argument("pipeline: train_fraction must be in (0, 1)");
  }
  if (pipeline.downsample_ratio < 0.0) throw std::invalid_argument("pipeline: downsample_ratio must be >= 0");
  SweepResult res = detail::empty_result(config);
  res.metric_names = dataset_metric_names(data.num_classes);
  const std::size_t nr = res.rules.size(), nb = res.budgets.size(), ns = res.seeds.size();
  res.rows.resize(nr * nb * ns);
  for (std::size_t ri = 0; ri < nr; ++ri)
    for (std::size_t b = 0; b < nb; ++b)
      for (std::size_t si = 0; si < ns; ++si) {
        auto& row = res.rows[(ri * nb + b) * ns + si];
        row.rule = res.rules[ri];
        row.budget_index = b;
        row.budget_fraction = res.budgets[b];
        row.seed = res.seeds[si];
      }

  std::vector<SplitResult<Matrix>> splits(ns);
  std::vector<std::string> split_error(ns);
  parallel_for(ns, [&](std::size_t si) {
    try {
      splits[si] = split_stratified(data, pipeline.train_fraction,
                                    derive_seed(config.master_seed, "split", res.seeds[si]));
    } catch (const std::exception& e) {
      split_error[si] = std::string("split: ") + e.what();
    }
  });

  std::vector<ScoreResult> scores(nr * ns);
  std::vector<std::string> score_error(nr * ns);
  parallel_for(nr * ns, [&](std::size_t task) {
    const std::size_t ri = task / ns, si = task % ns;
    if (!split_error[si].empty()) {
      score_error[task] = split_error[si];
      return;
    }
    try {
      const auto& train = splits[si].train;
      ScoringParams params = config.scoring;
      params.seed = derive_seed(config.master_seed, "plan", res.rules[ri], res.seeds[si]);
      scores[task] = score_features(group_features(train, Group::P1), group_features(train, Group::P2),
                                    parse_rule(res.rules[ri]), params);
    } catch (const std::exception& e) {
      score_error[task] = std::string("scoring: ") + e.what();
    }
  });

  parallel_for(res.rows.size(), [&](std::size_t idx) {
    SweepRow& row = res.rows[idx];
    const std::size_t si = idx % ns, ri = idx / (nb * ns);
    const std::size_t task = ri * ns + si;
    if (!score_error[task].empty()) {
      row.failed = true;
      row.failure = score_error[task];
      return;
    }
    try {
      const auto& split = splits[si];
      const auto& s = scores[task].scores;
      const std::size_t f = detail::budget_count(row.budget_fraction, s.size());
      row.removed = f;
      const auto plan = plan_from_scores(s, f, parse_rule(row.rule));
      auto edited = apply_plan(split.train, plan);
      if (pipeline.downsample_ratio > 0.0) {
        edited = downsample_p2(edited, pipeline.downsample_ratio,
                               derive_seed(config.master_seed, "downsample", row.seed,
                                           static_cast<std::uint64_t>(row.budget_index)));
      }
      const double l2 = pipeline.l2_strength.value_or(1.0 / static_cast<double>(edited.size()));
      const auto model = train_logistic(
          edited, l2,
          derive_seed(config.master_seed, "train", row.rule, row.seed, static_cast<std::uint64_t>(row.budget_index)),
          pipeline.max_iter, pipeline.tol);
      const auto m = evaluate(model, split.validation, pipeline.eval);
      const double nan = std::numeric_limits<double>::quiet_NaN();
      row.metrics["recall_p1"] = m.recall_p1.value_or(nan);
      row.metrics["macro_f1_p2"] = m.macro_f1_p2.value_or(nan);
      row.metrics["logloss"] = m.logloss;
      for (int k = 0; k < data.num_classes; ++k) {
        const auto it = m.accuracy_per_class.find(k);
        row.metrics["accuracy_class_" + std::to_string(k)] = it == m.accuracy_per_class.end() ? nan : it->second;
      }
      row.metrics["train_rows"] = static_cast<double>(edited.size());
      row.metrics["converged"] = model.meta.converged ? 1.0 : 0.0;
    } catch (const std::exception& e) {
      row.failed = true;
      row.failure = e.what();
      row.metrics.clear();
    }
  });
  detail::keep_metrics(res, config.metrics);
  return res;
}

/// Text corpus -> TF-IDF features, with labels in `p1_labels` tagged p1.
inline SparseDataset text_dataset(const TextCorpus& corpus, const TfidfConfig& tfidf,
                                  const std::set<int>& p1_labels,
                                  std::vector<std::size_t>* zero_rows = nullptr) {
  auto features = tfidf_fit_transform(corpus.texts, tfidf);
  SparseDataset ds;
  ds.features = std::move(features.matrix);
  ds.labels = corpus.labels;
  ds.groups = groups_from_labels(corpus.labels, p1_labels);
  ds.row_ids = corpus.ids;
  ds.num_classes = infer_num_classes(corpus.labels, std::nullopt);
  if (zero_rows) *zero_rows = std::move(features.zero_rows);
  ds.validate();
  return ds;
}

enum class TargetDirection {
  /// The metric falls with deletion (recall, accuracy); target = half the budget-0 mean.
  Decrease,
  /// The metric rises with deletion (removal divergence); target = half the mean at
  /// the largest swept budget.
  Increase,
};

struct HalfTarget {
  /// Budget fraction at which the target is met; unset when never reached.
  std::optional<double> fraction;
  double reference = 0.0;  // budget-0 mean (Decrease) or largest-budget mean (Increase)
  double target = 0.0;
};

/// First crossing of `threshold` by the seed-mean curve of (rule, metric),
/// interpolated linearly between the last budget that misses and the first
/// that meets it. Budgets whose cells all failed are skipped.
inline std::optional<double> threshold_budget(const SweepResult& result, const std::string& rule,
                                              const std::string& metric, double threshold,
                                              TargetDirection direction) {
  if (std::find(result.metric_names.begin(), result.metric_names.end(), metric) == result.metric_names.end()) {
    throw std::invalid_argument("half_target_budget: metric '" + metric + "' not in result");
  }
  const std::string canon(to_string(parse_rule(rule)));
  if (std::find(result.rules.begin(), result.rules.end(), canon) == result.rules.end()) {
    throw std::invalid_argument("half_target_budget: rule '" + rule + "' not in result");
  }
  auto meets = [&](double v) { return direction == TargetDirection::Decrease ? v <= threshold : v >= threshold; };
  std::optional<std::pair<double, double>> prev;
  for (std::size_t b = 0; b < result.budgets.size(); ++b) {
    const auto c = result.summarize_cell(canon, b, metric);
    if (c.count == 0) continue;
    if (meets(c.mean)) {
      if (!prev || c.mean == prev->second) return c.budget_fraction;
      const double t = (threshold - prev->second) / (c.mean - prev->second);
      return prev->first + std::clamp(t, 0.0, 1.0) * (c.budget_fraction - prev->first);
    }
    prev = std::make_pair(c.budget_fraction, c.mean);
  }
  return std::nullopt;
}

inline HalfTarget half_target_budget(const SweepResult& result, const std::string& rule, const std::string& metric,
                                     TargetDirection direction = TargetDirection::Decrease) {
  const std::string canon(to_string(parse_rule(rule)));
  HalfTarget h;
  std::optional<CellSummary> ref;
  if (direction == TargetDirection::Decrease) {
    if (result.budgets.empty() || result.budgets.front() != 0.0) {
      throw std::invalid_argument("half_target_budget: missing budget-0 cell");
    }
    ref = result.summarize_cell(canon, 0, metric);
  } else {
    if (result.budgets.empty()) throw std::invalid_argument("half_target_budget: empty budget grid");
    ref = result.summarize_cell(canon, result.budgets.size() - 1, metric);
  }
  if (ref->count == 0) throw std::invalid_argument("half_target_budget: reference cell has no successful seeds");
  h.reference = ref->mean;
  h.target = 0.5 * ref->mean;
  h.fraction = threshold_budget(result, rule, metric, h.target, direction);
  return h;
}

/// 1 - budget(rule) / budget(baseline); unset when either target is not reached.
/// Throws when the baseline budget is zero.
inline std::optional<double> saving(const SweepResult& result, const std::string& baseline_rule,
                                    const std::string& rule, const std::string& metric,
                                    TargetDirection direction = TargetDirection::Decrease) {
  const auto base = half_target_budget(result, baseline_rule, metric, direction).fraction;
  const auto other = half_target_budget(result, rule, metric, direction).fraction;
  if (!base || !other) return std::nullopt;
  if (*base == 0.0) throw std::domain_error("saving: baseline half-target budget is zero");
  return 1.0 - *other / *base;
}

}  // namespace distunlearn
