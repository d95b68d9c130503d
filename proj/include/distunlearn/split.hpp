#pragma once

// Seeded stratified splitting and p2 downsampling.

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "distunlearn/dataset.hpp"
#include "distunlearn/rng.hpp"

namespace distunlearn {

template <class Matrix>
struct SplitResult {
  BasicDataset<Matrix> train;
  BasicDataset<Matrix> validation;
  std::vector<std::size_t> train_rows;       // indices into the input, ascending
  std::vector<std::size_t> validation_rows;  // indices into the input, ascending
  /// Strata with fewer than 2 rows, e.g. "p1/label=3"; their rows go to train.
  std::vector<std::string> small_strata;
};

/// Splits each (group, label) stratum on its own: round(fraction * size) rows
/// of a seeded shuffle go to train (clamped to leave both sides non-empty),
/// the rest to validation. Output rows keep input order.
template <class Matrix>
SplitResult<Matrix> split_stratified(const BasicDataset<Matrix>& ds, double train_fraction,
                                     std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("split_stratified: train_fraction must be in (0, 1)");
  }
  std::map<std::pair<int, int>, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    strata[{static_cast<int>(ds.groups[i]), ds.labels[i]}].push_back(i);
  }
  SplitResult<Matrix> out;
  for (const auto& [key, rows] : strata) {
    const auto [group, label] = key;
    if (rows.size() < 2) {
      out.small_strata.push_back(std::string(to_string(static_cast<Group>(group))) +
                                 "/label=" + std::to_string(label));
      out.train_rows.insert(out.train_rows.end(), rows.begin(), rows.end());
      continue;
    }
    const auto n = rows.size();
    auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
    const auto order = sample_without_replacement(
        n, n, derive_seed(seed, "stratum", static_cast<std::uint64_t>(group), static_cast<std::uint64_t>(label)));
    for (std::size_t k = 0; k < n; ++k) {
      (k < n_train ? out.train_rows : out.validation_rows).push_back(rows[order[k]]);
    }
  }
  std::sort(out.train_rows.begin(), out.train_rows.end());
  std::sort(out.validation_rows.begin(), out.validation_rows.end());
  out.train = subset(ds, out.train_rows);
  out.validation = subset(ds, out.validation_rows);
  return out;
}

/// Number of p2 rows kept for a given p1 count: ceil(ratio * n_p1).
inline std::size_t downsample_target(std::size_t n_p1, double ratio) {
  const double t = ratio * static_cast<double>(n_p1);
  // guard against 5 * 10 landing a hair above 50 in floating point
  const double r = std::round(t);
  return static_cast<std::size_t>(std::abs(t - r) <= 1e-9 * std::max(1.0, t) ? r : std::ceil(t));
}

/// Keeps every p1 row and a uniform subset of ceil(ratio * |p1|) p2 rows
/// (all of p2 if it is no larger). Row order is preserved.
template <class Matrix>
BasicDataset<Matrix> downsample_p2(const BasicDataset<Matrix>& ds, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0)) throw std::invalid_argument("downsample_p2: ratio must be > 0");
  const auto p1 = ds.rows_of(Group::P1);
  const auto p2 = ds.rows_of(Group::P2);
  const std::size_t target = downsample_target(p1.size(), ratio);
  if (p2.size() <= target) return ds;
  const auto pick = sample_without_replacement(p2.size(), target, seed);
  std::vector<std::size_t> keep = p1;
  for (auto k : pick) keep.push_back(p2[k]);
  std::sort(keep.begin(), keep.end());
  return subset(ds, keep);
}

}  // namespace distunlearn
